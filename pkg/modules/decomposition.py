"""
Fuzzy partitions and the projection / restriction chains they induce.

Given a chain (Q, pi) and memberships a_i(x), the class measure is
pi_hat(i) = sum_x a_i(x) pi(x), each class carries pi_i(x) = a_i(x) pi(x) / pi_hat(i)
on its support Lambda_i = {x : a_i(x) > 0}, the projection chain moves
between classes with membership-weighted flows, and the restriction chain
on Lambda_i discounts each rate Q(x, y) by a_i(y).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Tolerances, config
from modules.chain_core import ReversibleChain, communicating_classes, expectation
from modules.errors import DomainError, StructuralError
from utils.validators import validate_chain, validate_partition

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FuzzyPartition:
    """Membership matrix with one row per state and one column per class."""
    class_ids: Tuple[str, ...]
    membership: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "class_ids", tuple(str(c) for c in self.class_ids))
        a = np.array(self.membership, dtype=float)
        if a.ndim != 2 or a.shape[1] != len(self.class_ids):
            raise StructuralError(
                f"membership has shape {a.shape} for {len(self.class_ids)} classes"
            )
        if len(set(self.class_ids)) != len(self.class_ids):
            raise StructuralError("class ids must be distinct")
        a.setflags(write=False)
        object.__setattr__(self, "membership", a)

    @property
    def k(self) -> int:
        return len(self.class_ids)

    @property
    def n_states(self) -> int:
        return self.membership.shape[0]

    def index(self, class_id: str) -> int:
        try:
            return self.class_ids.index(str(class_id))
        except ValueError:
            raise StructuralError(f"unknown class {class_id!r}") from None

    def support(self, i) -> np.ndarray:
        """Lambda_i as sorted state indices (strict positivity, no thresholding)."""
        column = self.membership[:, self.column(i)]
        return np.flatnonzero(column > 0)

    def is_exact(self) -> bool:
        return bool(np.all((self.membership == 0) | (self.membership == 1)))

    def column(self, i) -> int:
        return i if isinstance(i, (int, np.integer)) else self.index(i)


@dataclass(frozen=True, eq=False)
class DecomposedSystem:
    """Projection chain on the classes plus one restriction chain per class."""
    class_ids: Tuple[str, ...]
    class_supports: Tuple[np.ndarray, ...]
    projection: ReversibleChain
    restrictions: Tuple[ReversibleChain, ...]
    warnings: Tuple[str, ...] = field(default=())

    @property
    def pi_hat(self) -> np.ndarray:
        return self.projection.pi

    @property
    def Q_hat(self) -> np.ndarray:
        return self.projection.Q

    @property
    def pi_i(self) -> Tuple[np.ndarray, ...]:
        return tuple(r.pi for r in self.restrictions)

    @property
    def Q_i(self) -> Tuple[np.ndarray, ...]:
        return tuple(r.Q for r in self.restrictions)

    def class_index(self, class_id: str) -> int:
        return self.class_ids.index(str(class_id))

    def lifted_measure(self, i, n_states: int) -> np.ndarray:
        """pi_i as a vector over all states, zero outside Lambda_i."""
        idx = i if isinstance(i, (int, np.integer)) else self.class_index(i)
        lifted = np.zeros(n_states)
        lifted[self.class_supports[idx]] = self.restrictions[idx].pi
        return lifted


def _check_sizes(chain: ReversibleChain, partition: FuzzyPartition) -> None:
    if partition.n_states != chain.n:
        raise StructuralError(
            f"partition has {partition.n_states} rows but the chain has {chain.n} states"
        )


def class_measure(chain: ReversibleChain, partition: FuzzyPartition) -> np.ndarray:
    """pi_hat(i) = sum_x a_i(x) pi(x)."""
    _check_sizes(chain, partition)
    return partition.membership.T @ chain.pi


def restriction_measure(chain: ReversibleChain, partition: FuzzyPartition, i) -> np.ndarray:
    """pi_i on the compacted support Lambda_i, in the order of ``partition.support(i)``."""
    _check_sizes(chain, partition)
    col = partition.column(i)
    support = partition.support(col)
    weights = partition.membership[support, col] * chain.pi[support]
    return weights / weights.sum()


def _generator_from_rates(rates: np.ndarray) -> np.ndarray:
    Q = np.array(rates, dtype=float)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, 0.0 - Q.sum(axis=1))
    return Q


def projection_chain(chain: ReversibleChain, partition: FuzzyPartition) -> ReversibleChain:
    """
    Projection chain on the classes.

    Q_hat(i, j) = (1/pi_hat(i)) sum_{x in L_i} sum_{y in L_j, y != x} a_i(x) a_j(y) pi(x) Q(x, y)
    for i != j; states shared by two classes contribute no diagonal mass.
    """
    a = partition.membership
    pi_hat = class_measure(chain, partition)
    flow = chain.flow()
    np.fill_diagonal(flow, 0.0)
    class_flow = a.T @ flow @ a
    Q_hat = _generator_from_rates(class_flow / pi_hat[:, None])
    return ReversibleChain(partition.class_ids, pi_hat, Q_hat)


def restriction_chain(chain: ReversibleChain, partition: FuzzyPartition, i) -> ReversibleChain:
    """Restriction chain on Lambda_i with Q_i(x, y) = a_i(y) Q(x, y) for x != y."""
    _check_sizes(chain, partition)
    col = partition.column(i)
    support = partition.support(col)
    rates = chain.Q[np.ix_(support, support)] * partition.membership[support, col][None, :]
    states = tuple(chain.states[x] for x in support)
    return ReversibleChain(states, restriction_measure(chain, partition, col),
                           _generator_from_rates(rates))


def project_function(chain: ReversibleChain, partition: FuzzyPartition, f) -> np.ndarray:
    """f_hat(i) = E_{pi_i}[f restricted to Lambda_i]."""
    values = np.asarray(f, dtype=float)
    if values.shape != (chain.n,):
        raise StructuralError(f"function has shape {values.shape}, expected ({chain.n},)")
    weighted = partition.membership * chain.pi[:, None]
    return (weighted.T @ values) / weighted.sum(axis=0)


def exact_partition_from_labels(labels: Sequence[str],
                                class_ids: Optional[Sequence[str]] = None) -> FuzzyPartition:
    """
    Encode an exact partition as 0/1 memberships.

    Args:
        labels: One class id per state
        class_ids: Class order (default: order of first appearance)

    Returns:
        FuzzyPartition with one-hot rows
    """
    labels = [str(label) for label in labels]
    if class_ids is None:
        class_ids = list(dict.fromkeys(labels))
    class_ids = [str(c) for c in class_ids]
    position = {c: k for k, c in enumerate(class_ids)}
    unknown = sorted(set(labels) - set(position))
    if unknown:
        raise DomainError(f"labels use undeclared classes {unknown}")
    unused = [c for c in class_ids if c not in set(labels)]
    if unused:
        raise DomainError(f"class {unused[0]} is not used by any state")
    membership = np.zeros((len(labels), len(class_ids)))
    membership[np.arange(len(labels)), [position[label] for label in labels]] = 1.0
    return FuzzyPartition(tuple(class_ids), membership)


def reducibility_warnings(system: DecomposedSystem) -> List[str]:
    """Names of the derived chains that are reducible (their constants vanish)."""
    warnings = []
    if system.projection.n > 1 and len(communicating_classes(system.Q_hat)) > 1:
        warnings.append("projection chain is reducible; its constants are 0")
    for class_id, restriction in zip(system.class_ids, system.restrictions):
        if restriction.n > 1 and len(communicating_classes(restriction.Q)) > 1:
            warnings.append(f"restriction chain of class {class_id} is reducible; its constants are 0")
    return warnings


def decompose(chain: ReversibleChain, partition: FuzzyPartition,
              tolerances: Optional[Tolerances] = None) -> DecomposedSystem:
    """
    Build pi_hat, every pi_i, the projection chain and all restriction chains.

    Raises:
        DomainError: if the partition is not a valid fuzzy partition of the chain
    """
    tol = tolerances or config.tolerances
    report = validate_partition(partition, chain.n, tol)
    if not report.ok:
        raise DomainError("invalid partition: " + "; ".join(v.message for v in report.violations))
    projection = projection_chain(chain, partition)
    restrictions = tuple(restriction_chain(chain, partition, c) for c in range(partition.k))
    system = DecomposedSystem(
        class_ids=partition.class_ids,
        class_supports=tuple(partition.support(c) for c in range(partition.k)),
        projection=projection,
        restrictions=restrictions,
    )
    warnings = reducibility_warnings(system)
    for derived in (projection,) + restrictions:
        derived_report = validate_chain(derived, tol)
        if not derived_report.ok:
            warnings.append(
                f"derived chain on {list(derived.states)} fails {', '.join(derived_report.invariants())}"
            )
    if partition.k == 1:
        warnings.append("single class: the projection chain is trivial")
    for message in warnings:
        logger.warning(message)
    return DecomposedSystem(system.class_ids, system.class_supports, projection,
                            restrictions, tuple(warnings))


def mean_preservation_residual(chain: ReversibleChain, partition: FuzzyPartition,
                               pi_hat: np.ndarray, f) -> float:
    """|E_{pi_hat} f_hat - E_pi f|."""
    f_hat = project_function(chain, partition, f)
    return abs(expectation(pi_hat, f_hat) - expectation(chain.pi, f))


def classical_projection(chain: ReversibleChain, labels: Sequence[str]) -> Dict[Tuple[str, str], float]:
    """
    Projection rates of an exact partition, sum_{x in O_i, y in O_j} pi(x)Q(x,y) / pi(O_i).

    Used to compare the fuzzy construction with its exact counterpart.
    """
    labels = [str(label) for label in labels]
    blocks = list(dict.fromkeys(labels))
    members = {b: [x for x, label in enumerate(labels) if label == b] for b in blocks}
    flow = chain.flow()
    rates = {}
    for i in blocks:
        mass = chain.pi[members[i]].sum()
        for j in blocks:
            if i != j:
                rates[(i, j)] = float(flow[np.ix_(members[i], members[j])].sum() / mass)
    return rates
