"""Validation utilities for chains, fuzzy partitions and couplings.

Validators never raise on an invariant violation; they return a
:class:`ValidationReport` listing each failed invariant with its worst
offender. Inconsistent dimensions are not reportable and raise
:class:`~modules.errors.StructuralError`.
"""

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Tolerances, config
from modules.errors import StructuralError

if TYPE_CHECKING:
    from modules.chain_core import ReversibleChain
    from modules.coupling import Coupling
    from modules.decomposition import FuzzyPartition


@dataclass(frozen=True)
class Violation:
    """A single failed invariant."""
    invariant: str
    indices: Tuple[Any, ...]
    magnitude: float
    message: str
    count: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "invariant": self.invariant,
            "indices": list(self.indices),
            "magnitude": self.magnitude,
            "message": self.message,
            "count": self.count,
        }


@dataclass
class ValidationReport:
    """Result of a validator: empty iff every invariant holds."""
    subject: str
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, invariant: str, indices: Tuple[Any, ...], magnitude: float,
            message: str, count: int = 1) -> None:
        self.violations.append(Violation(invariant, indices, float(magnitude), message, count))

    def invariants(self) -> List[str]:
        return [v.invariant for v in self.violations]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "subject": self.subject,
            "ok": self.ok,
            "violations": [v.to_dict() for v in self.violations],
        }


def _tol(tolerances: Optional[Tolerances]) -> Tolerances:
    return tolerances if tolerances is not None else config.tolerances


def check_dimensions(n_states: int, pi: np.ndarray, Q: np.ndarray,
                     states: Optional[Sequence[str]] = None) -> None:
    """Raise StructuralError unless pi, Q and states agree on the state count."""
    if pi.ndim != 1 or pi.shape[0] != n_states:
        raise StructuralError(f"pi has shape {pi.shape}, expected ({n_states},)")
    if Q.ndim != 2 or Q.shape != (n_states, n_states):
        raise StructuralError(f"Q has shape {Q.shape}, expected ({n_states}, {n_states})")
    if states is not None and len(states) != n_states:
        raise StructuralError(f"{len(states)} state names for {n_states} states")
    if n_states == 0:
        raise StructuralError("a chain needs at least one state")


def validate_measure(pi: np.ndarray, report: ValidationReport, tolerances: Tolerances,
                     label: str = "pi") -> None:
    """Append positivity and normalisation violations of a probability vector."""
    if not np.all(np.isfinite(pi)):
        bad = int(np.flatnonzero(~np.isfinite(pi))[0])
        report.add(f"{label}_finite", (bad,), float("nan"), f"{label}({bad}) is not finite")
        return
    nonpositive = np.flatnonzero(pi <= 0)
    if nonpositive.size:
        worst = int(nonpositive[np.argmin(pi[nonpositive])])
        report.add(f"{label}_positive", (worst,), abs(pi[worst]),
                   f"{label}({worst}) = {pi[worst]:.3g} is not strictly positive",
                   count=nonpositive.size)
    total = float(pi.sum())
    if abs(total - 1.0) > tolerances.measure_sum:
        report.add(f"{label}_sum", (), abs(total - 1.0),
                   f"{label} sums to {total:.17g}, not 1")


def validate_generator(Q: np.ndarray, report: ValidationReport, tolerances: Tolerances) -> None:
    """Append row-sum and off-diagonal sign violations of a generator."""
    if not np.all(np.isfinite(Q)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(Q))[0])
        report.add("Q_finite", bad, float("nan"), f"Q{bad} is not finite")
        return
    row_sums = np.abs(Q.sum(axis=1))
    bad_rows = np.flatnonzero(row_sums > tolerances.row_sum)
    if bad_rows.size:
        worst = int(bad_rows[np.argmax(row_sums[bad_rows])])
        report.add("row_sum", (worst,), row_sums[worst],
                   f"row {worst} of Q sums to {Q[worst].sum():.3g}", count=bad_rows.size)
    off = Q - np.diag(np.diag(Q))
    negative = np.argwhere(off < 0)
    if negative.size:
        values = off[negative[:, 0], negative[:, 1]]
        x, y = (int(i) for i in negative[np.argmin(values)])
        report.add("off_diagonal_nonnegative", (x, y), abs(Q[x, y]),
                   f"Q({x},{y}) = {Q[x, y]:.3g} is negative", count=len(negative))


def validate_detailed_balance(pi: np.ndarray, Q: np.ndarray, report: ValidationReport,
                              tolerances: Tolerances) -> None:
    """Append the worst detailed-balance violation, if any."""
    flow = pi[:, None] * Q
    diff = np.abs(flow - flow.T)
    bound = tolerances.reversibility * np.maximum(1.0, np.abs(flow))
    excess = np.triu(diff - bound, k=1)
    bad = np.argwhere(excess > 0)
    if bad.size:
        x, y = (int(i) for i in bad[np.argmax(diff[bad[:, 0], bad[:, 1]])])
        report.add("detailed_balance", (x, y), diff[x, y],
                   f"pi({x})Q({x},{y}) = {flow[x, y]:.6g} but pi({y})Q({y},{x}) = {flow[y, x]:.6g}",
                   count=len(bad))


def validate_chain(chain: "ReversibleChain",
                   tolerances: Optional[Tolerances] = None) -> ValidationReport:
    """
    Validate the invariants of a reversible chain.

    Args:
        chain: Chain to validate
        tolerances: Tolerances to apply (default: config.tolerances)

    Returns:
        Report that is empty iff the chain is a valid reversible generator
    """
    tol = _tol(tolerances)
    pi = np.asarray(chain.pi, dtype=float)
    Q = np.asarray(chain.Q, dtype=float)
    check_dimensions(len(chain.states), pi, Q)
    report = ValidationReport("chain")
    validate_measure(pi, report, tol)
    validate_generator(Q, report, tol)
    if np.all(np.isfinite(pi)) and np.all(np.isfinite(Q)):
        validate_detailed_balance(pi, Q, report, tol)
    return report


def validate_partition(partition: "FuzzyPartition", n_states: int,
                       tolerances: Optional[Tolerances] = None) -> ValidationReport:
    """
    Validate the two fuzzy-partition conditions.

    Args:
        partition: Fuzzy partition to validate
        n_states: Number of states of the chain it partitions

    Returns:
        Report that is empty iff rows sum to one and no class is empty
    """
    tol = _tol(tolerances)
    a = np.asarray(partition.membership, dtype=float)
    if a.ndim != 2 or a.shape != (n_states, len(partition.class_ids)):
        raise StructuralError(
            f"membership has shape {a.shape}, expected ({n_states}, {len(partition.class_ids)})"
        )
    report = ValidationReport("partition")
    if not np.all(np.isfinite(a)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(a))[0])
        report.add("membership_finite", bad, float("nan"), f"membership{bad} is not finite")
        return report
    outside = np.argwhere((a < 0) | (a > 1))
    if outside.size:
        x, i = (int(k) for k in outside[0])
        report.add("membership_range", (x, partition.class_ids[i]), a[x, i],
                   f"a_{partition.class_ids[i]}({x}) = {a[x, i]:.3g} is outside [0, 1]",
                   count=len(outside))
    row_err = np.abs(a.sum(axis=1) - 1.0)
    bad_rows = np.flatnonzero(row_err > tol.row_sum)
    if bad_rows.size:
        worst = int(bad_rows[np.argmax(row_err[bad_rows])])
        report.add("row_sum", (worst,), row_err[worst],
                   f"memberships of state {worst} sum to {a[worst].sum():.17g}",
                   count=bad_rows.size)
    empty = np.flatnonzero(~np.any(a > 0, axis=0))
    for i in empty:
        report.add("empty_class", (partition.class_ids[int(i)],), 0.0,
                   f"class {partition.class_ids[int(i)]} has no state with positive membership")
    return report


def validate_coupling(coupling: "Coupling", pi_i: np.ndarray, pi_j: np.ndarray,
                      tolerances: Optional[Tolerances] = None) -> ValidationReport:
    """
    Validate a coupling against its two marginals.

    Args:
        coupling: Coupling of classes i and j (state indices into the chain)
        pi_i: Restriction measure of class i lifted to all states (zero off its support)
        pi_j: Restriction measure of class j lifted to all states

    Returns:
        Report that is empty iff mass and both marginals match
    """
    tol = _tol(tolerances)
    pi_i = np.asarray(pi_i, dtype=float)
    pi_j = np.asarray(pi_j, dtype=float)
    x, y, mass = coupling.x, coupling.y, coupling.mass
    n = pi_i.shape[0]
    if np.any((x < 0) | (x >= n)) or np.any((y < 0) | (y >= n)):
        raise StructuralError(f"coupling ({coupling.i},{coupling.j}) indexes a state outside the chain")
    off_i = np.flatnonzero(pi_i[x] <= 0)
    if off_i.size:
        raise StructuralError(
            f"coupling ({coupling.i},{coupling.j}) puts mass on state {int(x[off_i[0]])} outside class {coupling.i}"
        )
    off_j = np.flatnonzero(pi_j[y] <= 0)
    if off_j.size:
        raise StructuralError(
            f"coupling ({coupling.i},{coupling.j}) puts mass on state {int(y[off_j[0]])} outside class {coupling.j}"
        )
    report = ValidationReport(f"coupling({coupling.i},{coupling.j})")
    nonpositive = np.flatnonzero(mass <= 0)
    if nonpositive.size:
        k = int(nonpositive[0])
        report.add("mass_positive", (int(x[k]), int(y[k])), mass[k],
                   "support entries must carry positive mass", count=nonpositive.size)
    total = float(mass.sum())
    if abs(total - 1.0) > tol.mass:
        report.add("total_mass", (), abs(total - 1.0), f"total mass is {total:.17g}, not 1")
    for label, idx, target in (("row_marginal", x, pi_i), ("column_marginal", y, pi_j)):
        marginal = np.bincount(idx, weights=mass, minlength=n)
        err = np.abs(marginal - target)
        worst = int(np.argmax(err))
        if err[worst] > tol.marginal:
            report.add(label, (worst,), err[worst],
                       f"{label.replace('_', ' ')} at state {worst} is {marginal[worst]:.6g}, "
                       f"expected {target[worst]:.6g}",
                       count=int(np.sum(err > tol.marginal)))
    return report


def parse_tolerance_overrides(lines: Sequence[str]) -> Tuple[bool, Dict[str, float], str]:
    """
    Parse ``KEY=VALUE`` tolerance overrides.

    Args:
        lines: Strings such as ``"reversibility=1e-9"``

    Returns:
        Tuple of (is_valid, overrides, error_message)
    """
    overrides: Dict[str, float] = {}
    known = set(Tolerances.model_fields)
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            return False, {}, f"Invalid tolerance format: {line}. Expected format: KEY=VALUE"
        key, value = (part.strip() for part in line.split("=", 1))
        if not re.match(r"^[a-z_]+$", key) or key not in known:
            return False, {}, f"Unknown tolerance: {key}"
        try:
            number = float(value)
        except ValueError:
            return False, {}, f"Tolerance {key} must be a number, got {value!r}"
        if not number > 0:
            return False, {}, f"Tolerance {key} must be positive"
        overrides[key] = number
    return True, overrides, ""
