"""Couplings of restriction measures and the quality of a coupling family."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import Tolerances, config
from modules.chain_core import ReversibleChain
from modules.decomposition import DecomposedSystem, FuzzyPartition
from modules.errors import DomainError, MissingCouplingError, StructuralError
from utils.validators import ValidationReport, validate_coupling

logger = logging.getLogger(__name__)

Pair = Tuple[str, str]


@dataclass(frozen=True, eq=False)
class Coupling:
    """
    A probability measure on Lambda_i x Lambda_j given by its support.

    ``x`` and ``y`` are state indices of the full chain; ``mass`` is aligned
    with them.
    """
    i: str
    j: str
    x: np.ndarray
    y: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "i", str(self.i))
        object.__setattr__(self, "j", str(self.j))
        x = np.asarray(self.x, dtype=np.intp).ravel()
        y = np.asarray(self.y, dtype=np.intp).ravel()
        mass = np.asarray(self.mass, dtype=float).ravel()
        if not (x.shape == y.shape == mass.shape):
            raise StructuralError("coupling support columns must have equal length")
        for array in (x, y, mass):
            array.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_triples(cls, i: str, j: str, support: Iterable[Sequence]) -> "Coupling":
        triples = list(support)
        if not triples:
            return cls(i, j, np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0))
        x, y, mass = zip(*triples)
        return cls(i, j, np.array(x), np.array(y), np.array(mass, dtype=float))

    @property
    def pair(self) -> Pair:
        return (self.i, self.j)

    def transpose(self) -> "Coupling":
        return Coupling(self.j, self.i, self.y, self.x, self.mass)

    def triples(self) -> List[Tuple[int, int, float]]:
        return [(int(a), int(b), float(m)) for a, b, m in zip(self.x, self.y, self.mass)]


@dataclass(frozen=True, eq=False)
class CouplingSet:
    """One coupling per ordered class pair with positive projection rate, plus chi."""
    couplings: Dict[Pair, Coupling]
    chi: float
    warnings: Tuple[str, ...] = field(default=())

    def pairs(self) -> List[Pair]:
        return sorted(self.couplings)


def product_coupling(pi_i, pi_j, i: str = "i", j: str = "j") -> Coupling:
    """
    Independent coupling kappa(x, y) = pi_i(x) pi_j(y).

    Args:
        pi_i: Measure of class i over all states (zero outside its support)
        pi_j: Measure of class j over all states
    """
    pi_i = np.asarray(pi_i, dtype=float)
    pi_j = np.asarray(pi_j, dtype=float)
    xs = np.flatnonzero(pi_i > 0)
    ys = np.flatnonzero(pi_j > 0)
    x, y = np.meshgrid(xs, ys, indexing="ij")
    mass = np.outer(pi_i[xs], pi_j[ys])
    return Coupling(i, j, x.ravel(), y.ravel(), mass.ravel())


def required_pairs(system: DecomposedSystem) -> List[Pair]:
    """Ordered class pairs (i, j), i != j, with Q_hat(i, j) > 0."""
    Q_hat = system.Q_hat
    ids = system.class_ids
    return [(ids[a], ids[b]) for a in range(len(ids)) for b in range(len(ids))
            if a != b and Q_hat[a, b] > 0]


def _chi_with_warnings(chain: ReversibleChain, partition: FuzzyPartition,
                       system: DecomposedSystem, couplings: Mapping[Pair, Coupling],
                       tolerances: Tolerances) -> Tuple[float, List[str]]:
    a = partition.membership
    flow = chain.flow()
    chi = math.inf
    warnings: List[str] = []
    for pair in required_pairs(system):
        if pair not in couplings:
            raise MissingCouplingError(f"no coupling for class pair {pair}")
        kappa = couplings[pair]
        ci, cj = partition.index(pair[0]), partition.index(pair[1])
        off = kappa.x != kappa.y
        off &= kappa.mass > 0
        if not np.any(off):
            continue
        x, y, mass = kappa.x[off], kappa.y[off], kappa.mass[off]
        numerator = a[x, ci] * a[y, cj] * flow[x, y]
        denominator = system.pi_hat[ci] * system.Q_hat[ci, cj] * mass
        if np.any(denominator < tolerances.underflow):
            raise StructuralError(f"coupling {pair} has an underflowing chi denominator")
        off_edges = np.flatnonzero(numerator == 0)
        if off_edges.size:
            k = int(off_edges[0])
            warnings.append(
                f"coupling {pair} charges ({chain.states[x[k]]}, {chain.states[y[k]]}) "
                f"which is not an edge of the chain; chi = 0"
            )
        chi = min(chi, float(np.min(numerator / denominator)))
    for message in warnings:
        logger.warning(message)
    return chi, warnings


def quality_chi(chain: ReversibleChain, partition: FuzzyPartition, system: DecomposedSystem,
                couplings: Union[CouplingSet, Mapping[Pair, Coupling]],
                tolerances: Optional[Tolerances] = None) -> float:
    """
    Coupling quality chi.

    Minimum over (x, y, i, j) with kappa_ij(x, y) > 0 and x != y of
    a_i(x) a_j(y) pi(x) Q(x, y) / (pi_hat(i) Q_hat(i, j) kappa_ij(x, y));
    +inf when no such candidate exists.

    Raises:
        MissingCouplingError: if a pair with Q_hat(i, j) > 0 has no coupling
    """
    mapping = couplings.couplings if isinstance(couplings, CouplingSet) else couplings
    chi, _ = _chi_with_warnings(chain, partition, system, mapping,
                                tolerances or config.tolerances)
    return chi


def coupling_reports(system: DecomposedSystem, n_states: int, couplings: Iterable[Coupling],
                     tolerances: Optional[Tolerances] = None) -> List[ValidationReport]:
    """Validate each coupling against the restriction measures of its two classes."""
    reports = []
    for kappa in couplings:
        if kappa.i not in system.class_ids or kappa.j not in system.class_ids:
            raise StructuralError(f"coupling names unknown classes ({kappa.i}, {kappa.j})")
        reports.append(validate_coupling(kappa, system.lifted_measure(kappa.i, n_states),
                                         system.lifted_measure(kappa.j, n_states),
                                         tolerances or config.tolerances))
    return reports


def build_coupling_set(chain: ReversibleChain, partition: FuzzyPartition,
                       system: DecomposedSystem, couplings: Iterable[Coupling],
                       complete_transpose: bool = False,
                       tolerances: Optional[Tolerances] = None) -> CouplingSet:
    """
    Validate supplied couplings and compute their quality.

    Args:
        complete_transpose: Fill a missing kappa_ji with the transpose of kappa_ij

    Raises:
        DomainError: if a coupling fails its marginal conditions
        MissingCouplingError: if a required pair is still uncovered
    """
    tol = tolerances or config.tolerances
    supplied: Dict[Pair, Coupling] = {}
    for kappa in couplings:
        if kappa.pair in supplied:
            raise DomainError(f"duplicate coupling for class pair {kappa.pair}")
        supplied[kappa.pair] = kappa
    if complete_transpose:
        for pair, kappa in list(supplied.items()):
            supplied.setdefault((pair[1], pair[0]), kappa.transpose())
    for report in coupling_reports(system, chain.n, supplied.values(), tol):
        if not report.ok:
            raise DomainError(f"{report.subject} is not a coupling: "
                              + "; ".join(v.message for v in report.violations))
    needed = set(required_pairs(system))
    warnings = [f"coupling for pair {pair} ignored: Q_hat is zero there"
                for pair in sorted(set(supplied) - needed)]
    selected = {pair: supplied[pair] for pair in supplied if pair in needed}
    chi, chi_warnings = _chi_with_warnings(chain, partition, system, selected, tol)
    return CouplingSet(selected, chi, tuple(warnings + chi_warnings))


def product_coupling_set(chain: ReversibleChain, partition: FuzzyPartition,
                         system: DecomposedSystem,
                         tolerances: Optional[Tolerances] = None) -> CouplingSet:
    """Product couplings for every required pair."""
    couplings = [
        product_coupling(system.lifted_measure(i, chain.n), system.lifted_measure(j, chain.n), i, j)
        for i, j in required_pairs(system)
    ]
    return build_coupling_set(chain, partition, system, couplings, tolerances=tolerances)
