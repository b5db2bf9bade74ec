"""Random test instances: reversible chains, fuzzy partitions and base graphs."""

import logging
from typing import Optional

import networkx as nx
import numpy as np

from modules.chain_core import ReversibleChain
from modules.decomposition import FuzzyPartition
from modules.errors import DomainError
from modules.glued_graph import BaseGraph

logger = logging.getLogger(__name__)


def random_reversible_chain(n: int, rng: np.random.Generator,
                            density: float = 1.0) -> ReversibleChain:
    """
    Random irreducible reversible chain on n states.

    Rates are Q(x, y) = W(x, y) / pi(x) for a symmetric positive weight
    matrix W, so detailed balance holds by construction. With density < 1
    some edges are dropped, but a random spanning path is always kept.
    """
    if n < 1:
        raise DomainError(f"a chain needs at least one state, got n={n}")
    if not 0 < density <= 1:
        raise DomainError(f"density must lie in (0, 1], got {density}")
    pi = rng.uniform(0.5, 2.0, size=n)
    pi /= pi.sum()
    W = np.triu(rng.uniform(0.1, 1.0, size=(n, n)), k=1)
    if density < 1:
        keep = np.triu(rng.random((n, n)) < density, k=1)
        order = rng.permutation(n)
        for a, b in zip(order[:-1], order[1:]):
            keep[min(a, b), max(a, b)] = True
        W = W * keep
    W = W + W.T
    Q = W / pi[:, None]
    np.fill_diagonal(Q, 0.0 - Q.sum(axis=1))
    return ReversibleChain(tuple(f"s{x}" for x in range(n)), pi, Q)


def random_fuzzy_partition(n: int, k: int, rng: np.random.Generator,
                           fuzziness: float = 0.5) -> FuzzyPartition:
    """
    Random fuzzy partition of n states into k classes.

    State c < k is anchored in class c so no class is empty; every state
    is split between two classes with probability ``fuzziness``.
    """
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    membership = np.zeros((n, k))
    for x in range(n):
        home = x if x < k else int(rng.integers(k))
        if k > 1 and rng.random() < fuzziness:
            other = int(rng.choice([c for c in range(k) if c != home]))
            share = rng.uniform(0.1, 0.9)
            membership[x, home] = share
            membership[x, other] = 1.0 - share
        else:
            membership[x, home] = 1.0
    return FuzzyPartition(tuple(str(c + 1) for c in range(k)), membership)


def random_base_graph(rng: np.random.Generator, n_min: int = 5, n_max: int = 15,
                      p: Optional[float] = None) -> BaseGraph:
    """
    Connected Erdos-Renyi graph with a greedily chosen H (possibly empty).

    H only takes vertices none of whose neighbours are already in H.
    """
    n = int(rng.integers(n_min, n_max + 1))
    edge_p = p if p is not None else min(1.0, 2.5 / max(n - 1, 1) + 0.1)
    while True:
        graph = nx.gnp_random_graph(n, edge_p, seed=int(rng.integers(2 ** 31)))
        if n == 1 or nx.is_connected(graph):
            break
    names = {v: f"g{v}" for v in graph.nodes}
    H = []
    for v in rng.permutation(n):
        v = int(v)
        if rng.random() < 0.5 and not any(names[u] in H for u in graph.neighbors(v)):
            H.append(names[v])
    if len(H) == n:
        H.pop()
    edges = tuple((names[u], names[v]) for u, v in graph.edges)
    logger.debug("base graph with %d vertices, %d edges, |H|=%d", n, len(edges), len(H))
    return BaseGraph(tuple(names[v] for v in range(n)), edges, tuple(sorted(H)))
