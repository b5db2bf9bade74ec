"""
The glued double graph and its canonical two-class decomposition.

Two copies G_1, G_2 of a base graph G are glued along a vertex set H in
which no two vertices are adjacent, and every unglued vertex v is joined to
its twin by a cross edge. Copies are named "v#1" and "v#2"; glued vertices
keep their base name.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import networkx as nx
import numpy as np

from config import Tolerances, config
from modules.chain_core import ReversibleChain, random_walk_chain
from modules.constants import poincare_constant
from modules.coupling import Coupling, CouplingSet, build_coupling_set, product_coupling_set
from modules.decomposition import FuzzyPartition, decompose, exact_partition_from_labels
from modules.errors import DomainError

logger = logging.getLogger(__name__)

CLASS_IDS = ("1", "2")


@dataclass(frozen=True)
class BaseGraph:
    """Base graph G with the glued vertex set H."""
    vertices: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]
    H: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        object.__setattr__(self, "edges", tuple((str(u), str(v)) for u, v in self.edges))
        object.__setattr__(self, "H", tuple(str(h) for h in self.H))

    def graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        graph.add_edges_from(self.edges)
        return graph

    def degree(self, v: str) -> int:
        return int(self.graph().degree[v])

    @property
    def unglued(self) -> Tuple[str, ...]:
        """G \\ H in vertex order."""
        glued = set(self.H)
        return tuple(v for v in self.vertices if v not in glued)

    def validate(self) -> None:
        """
        Check the base-graph conditions.

        Raises:
            DomainError: naming the first offending vertex or edge
        """
        if len(set(self.vertices)) != len(self.vertices):
            raise DomainError("vertex names must be distinct")
        if not self.vertices:
            raise DomainError("base graph has no vertices")
        bad_names = [v for v in self.vertices if "#" in v]
        if bad_names:
            raise DomainError(f"vertex name {bad_names[0]!r} must not contain '#'")
        known = set(self.vertices)
        for u, v in self.edges:
            if u not in known or v not in known:
                raise DomainError(f"edge ({u}, {v}) uses an unknown vertex")
            if u == v:
                raise DomainError(f"self-loop at vertex {u}")
        unknown = [h for h in self.H if h not in known]
        if unknown:
            raise DomainError(f"H contains unknown vertex {unknown[0]}")
        graph = self.graph()
        if not nx.is_connected(graph):
            raise DomainError("base graph G is not connected")
        glued = set(self.H)
        if glued == known:
            raise DomainError("H must not be all of G")
        for h in self.H:
            clash = sorted(set(graph.neighbors(h)) & glued)
            if clash:
                raise DomainError(f"H violates the neighbour condition at vertex {h} (adjacent to {clash[0]})")


@dataclass(frozen=True, eq=False)
class GluedGraph:
    """The glued double graph, with vertices ordered G_1 block, H block, G_2 block."""
    base: BaseGraph
    graph: nx.Graph
    order: Tuple[str, ...]

    @staticmethod
    def copy_name(v: str, copy: int) -> str:
        return f"{v}#{copy}"

    @property
    def degrees(self) -> Dict[str, int]:
        return {v: int(self.graph.degree[v]) for v in self.order}

    @property
    def total_degree(self) -> int:
        return sum(self.degrees.values())

    def adjacency(self) -> np.ndarray:
        return nx.to_numpy_array(self.graph, nodelist=list(self.order), dtype=float)

    def random_walk(self) -> ReversibleChain:
        return random_walk_chain(self.adjacency(), states=self.order)


def build_glued_graph(base: BaseGraph) -> Tuple[GluedGraph, ReversibleChain]:
    """
    Glue two copies of G along H and add the cross edges.

    Returns:
        Tuple of (glued graph, simple random walk on it)

    Raises:
        DomainError: if the base graph conditions fail
    """
    base.validate()
    glued = set(base.H)

    def name(v: str, copy: int) -> str:
        return v if v in glued else GluedGraph.copy_name(v, copy)

    order = tuple([name(v, 1) for v in base.unglued] + list(base.H)
                  + [name(v, 2) for v in base.unglued])
    graph = nx.Graph()
    graph.add_nodes_from(order)
    for copy in (1, 2):
        graph.add_edges_from((name(u, copy), name(v, copy)) for u, v in base.edges)
    graph.add_edges_from((name(v, 1), name(v, 2)) for v in base.unglued)
    result = GluedGraph(base, graph, order)
    logger.info("glued graph: %d vertices, total degree %d", len(order), result.total_degree)
    return result, result.random_walk()


def canonical_partition(glued: GluedGraph) -> FuzzyPartition:
    """a = (1, 0) on G_1, (0, 1) on G_2 and (1/2, 1/2) on H."""
    glued_set = set(glued.base.H)
    membership = np.zeros((len(glued.order), 2))
    for x, v in enumerate(glued.order):
        if v in glued_set:
            membership[x] = (0.5, 0.5)
        elif v.endswith("#1"):
            membership[x] = (1.0, 0.0)
        else:
            membership[x] = (0.0, 1.0)
    return FuzzyPartition(CLASS_IDS, membership)


def canonical_couplings(glued: GluedGraph, chain: ReversibleChain) -> List[Coupling]:
    """kappa_12 with kappa(h, h) = pi(h) on H and kappa(v#1, v#2) = 2 pi(v#1); kappa_21 is its transpose."""
    support = [(chain.index(h), chain.index(h), float(chain.pi[chain.index(h)]))
               for h in glued.base.H]
    for v in glued.base.unglued:
        x = chain.index(GluedGraph.copy_name(v, 1))
        y = chain.index(GluedGraph.copy_name(v, 2))
        support.append((x, y, 2.0 * float(chain.pi[x])))
    kappa = Coupling.from_triples(CLASS_IDS[0], CLASS_IDS[1], support)
    return [kappa, kappa.transpose()]


def canonical_coupling(glued: GluedGraph, chain: Optional[ReversibleChain] = None,
                       tolerances: Optional[Tolerances] = None) -> CouplingSet:
    """Validated canonical couplings for the pairs (1, 2) and (2, 1) with their chi."""
    chain = chain if chain is not None else glued.random_walk()
    partition = canonical_partition(glued)
    system = decompose(chain, partition, tolerances)
    return build_coupling_set(chain, partition, system, canonical_couplings(glued, chain),
                              tolerances=tolerances)


@dataclass(frozen=True)
class ClosedForm:
    """Closed-form projection rate, coupling quality and projection bound term."""
    q_hat_12: float
    chi: float
    projection_bound: float
    total_degree: int

    def to_dict(self) -> dict:
        return {
            "Q_hat_12": self.q_hat_12,
            "chi": self.chi,
            "projection_bound": self.projection_bound,
            "total_degree": self.total_degree,
        }


def closed_form_quantities(base: BaseGraph) -> ClosedForm:
    """
    Q_hat(1,2) = (2 / D) (sum_{h in H} d_G(h) + #(G \\ H)) with D = 2 D_G + 2 #(G \\ H),
    chi = 1 / (Q_hat(1,2) (max_{v in G \\ H} d_G(v) + 1)),
    projection bound chi * lambda(Q_hat) = 2 / (max_{v in G \\ H} d_G(v) + 1).
    """
    base.validate()
    graph = base.graph()
    unglued = base.unglued
    total = 2 * sum(d for _, d in graph.degree) + 2 * len(unglued)
    q_hat_12 = 2.0 / total * (sum(graph.degree[h] for h in base.H) + len(unglued))
    max_degree = max(graph.degree[v] for v in unglued)
    chi = 1.0 / (q_hat_12 * (max_degree + 1))
    return ClosedForm(q_hat_12, chi, 2.0 / (max_degree + 1), total)


def definition_quantities(base: BaseGraph,
                          tolerances: Optional[Tolerances] = None) -> Dict[str, float]:
    """The same three quantities computed from the definitions on the built instance."""
    glued, chain = build_glued_graph(base)
    partition = canonical_partition(glued)
    system = decompose(chain, partition, tolerances)
    couplings = build_coupling_set(chain, partition, system, canonical_couplings(glued, chain),
                                   tolerances=tolerances)
    lam_hat = poincare_constant(system.projection, tolerances)
    return {
        "Q_hat_12": float(system.Q_hat[0, 1]),
        "chi": couplings.chi,
        "projection_bound": couplings.chi * lam_hat,
        "total_degree": float(glued.total_degree),
    }


def exact_partition_attempt(glued: GluedGraph, assignment: Optional[Mapping[str, str]] = None,
                            rng: Optional[np.random.Generator] = None,
                            tolerances: Optional[Tolerances] = None) -> dict:
    """
    Split H between the two classes and decompose with the resulting exact partition.

    Diagnostic only: with product couplings chi usually collapses to 0, or a
    restriction chain becomes reducible, so the exact-partition bound is trivial.

    Args:
        assignment: Class ("1" or "2") for each H vertex (default: random, or all "1")
    """
    tol = tolerances or config.tolerances
    chain = glued.random_walk()
    split: Dict[str, str] = {}
    for h in glued.base.H:
        if assignment is not None and h in assignment:
            split[h] = str(assignment[h])
        elif rng is not None:
            split[h] = CLASS_IDS[int(rng.integers(2))]
        else:
            split[h] = CLASS_IDS[0]
        if split[h] not in CLASS_IDS:
            raise DomainError(f"H vertex {h} assigned to unknown class {split[h]}")
    labels = [split.get(v, v.rsplit("#", 1)[-1]) for v in glued.order]
    partition = exact_partition_from_labels(labels, CLASS_IDS)
    system = decompose(chain, partition, tol)
    couplings = product_coupling_set(chain, partition, system, tol)
    chi = couplings.chi
    warnings = list(system.warnings) + list(couplings.warnings)
    class_constants = {c: poincare_constant(r, tol)
                       for c, r in zip(system.class_ids, system.restrictions)}
    lam_hat = poincare_constant(system.projection, tol)
    chi_term = 0.0 if chi == 0 or lam_hat == 0 else chi * lam_hat
    return {
        "assignment": split,
        "chi": chi,
        "projection_constant": lam_hat,
        "class_constants": class_constants,
        "bound": min([chi_term] + list(class_constants.values())),
        "warnings": warnings,
    }
