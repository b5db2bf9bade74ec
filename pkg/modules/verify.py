"""
Machine checks of the decomposition identities, the Dirichlet-form
inequality and the lower bounds on the three constants.

POINCARE verdicts compare exact spectral values. MLSI and LSI verdicts
compare estimates that are upper bounds on both sides and are reported as
advisory.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from config import Tolerances, config
from modules.chain_core import (PsiKind, ReversibleChain, dirichlet_form, entropy, expectation,
                                variance)
from modules.constants import RatioEstimate, chain_constant
from modules.coupling import (Coupling, CouplingSet, build_coupling_set, coupling_reports,
                              product_coupling_set)
from modules.decomposition import (DecomposedSystem, FuzzyPartition, decompose,
                                   mean_preservation_residual, project_function)
from utils.validators import validate_chain, validate_partition

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    """
    Worst value of a randomized check over its trials.

    ``value`` is what the tolerance is compared against. For the Dirichlet
    inequality that is the slack relative to max(1, L_pi f); ``raw_value``
    keeps the worst unscaled slack. The two agree for the identities.
    """
    name: str
    value: float
    passed: bool
    tolerance: float
    trials: int
    mean_residual: float = 0.0
    raw_value: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "trials": self.trials,
            "mean_residual": self.mean_residual,
            "raw_value": self.raw_value,
        }


def _extended_product(a: float, b: float) -> float:
    """a * b with inf * 0 = 0."""
    if a == 0 or b == 0:
        return 0.0
    return a * b


def variance_residual(chain: ReversibleChain, system: DecomposedSystem,
                      partition: FuzzyPartition, f) -> float:
    """|Var_pi f - sum_i pi_hat(i) Var_{pi_i} f - Var_{pi_hat} f_hat|."""
    f = np.asarray(f, dtype=float)
    inner = sum(system.pi_hat[c] * variance(system.restrictions[c].pi, f[support])
                for c, support in enumerate(system.class_supports))
    f_hat = project_function(chain, partition, f)
    return abs(variance(chain.pi, f) - inner - variance(system.pi_hat, f_hat))


def entropy_residual(chain: ReversibleChain, system: DecomposedSystem,
                     partition: FuzzyPartition, f) -> float:
    """|Ent_pi f - sum_i pi_hat(i) Ent_{pi_i} f - Ent_{pi_hat} f_hat| for f > 0."""
    f = np.asarray(f, dtype=float)
    inner = sum(system.pi_hat[c] * entropy(system.restrictions[c].pi, f[support])
                for c, support in enumerate(system.class_supports))
    f_hat = project_function(chain, partition, f)
    return abs(entropy(chain.pi, f) - inner - entropy(system.pi_hat, f_hat))


def dirichlet_slack(chain: ReversibleChain, system: DecomposedSystem,
                    partition: FuzzyPartition, chi: float, f,
                    psi: PsiKind, tolerances: Optional[Tolerances] = None) -> float:
    """
    L_pi f - sum_i pi_hat(i) L_{pi_i} f - chi L_{pi_hat} f_hat.

    With chi = inf, a projected form within tol.dirichlet of zero relative
    to max(1, L_pi f) counts as zero.
    """
    tol = tolerances or config.tolerances
    f = np.asarray(f, dtype=float)
    inner = sum(system.pi_hat[c] * dirichlet_form(system.restrictions[c], f[support], psi)
                for c, support in enumerate(system.class_supports))
    f_hat = project_function(chain, partition, f)
    projected = dirichlet_form(system.projection, f_hat, psi)
    total = dirichlet_form(chain, f, psi)
    if math.isinf(chi) and abs(projected) <= tol.dirichlet * max(1.0, abs(total)):
        projected = 0.0
    return total - inner - _extended_product(chi, projected)


def _run_trials(name: str, chain: ReversibleChain, partition: FuzzyPartition,
                system: DecomposedSystem, trials: int, seed: int,
                sample: Callable[[np.random.Generator], np.ndarray],
                measure: Callable[[np.ndarray], Tuple[float, float]], worst: Callable,
                passes: Callable[[float], bool], tolerance: float,
                tol: Tolerances) -> CheckResult:
    values, raws, mean_worst = [], [], 0.0
    for trial in range(trials):
        f = sample(np.random.default_rng([seed, trial]))
        scale = max(1.0, abs(expectation(chain.pi, f)))
        mean_worst = max(mean_worst,
                         mean_preservation_residual(chain, partition, system.pi_hat, f) / scale)
        value, raw = measure(f)
        values.append(value)
        raws.append(raw)
    value = worst(values) if values else 0.0
    raw_value = worst(raws) if raws else 0.0
    passed = passes(value) and mean_worst <= tol.mean
    if mean_worst > tol.mean:
        logger.error("%s: projection does not preserve the mean (residual %.3g)", name, mean_worst)
    return CheckResult(name, float(value), bool(passed), tolerance, trials, float(mean_worst),
                       float(raw_value))


def _decomposed(chain, partition, system, tol) -> DecomposedSystem:
    return system if system is not None else decompose(chain, partition, tol)


def check_variance_decomposition(chain: ReversibleChain, partition: FuzzyPartition,
                                 trials: int = 200, seed: int = 0,
                                 tolerances: Optional[Tolerances] = None,
                                 system: Optional[DecomposedSystem] = None) -> CheckResult:
    """Max variance-decomposition residual over standard normal f; passes at tol.identity."""
    tol = tolerances or config.tolerances
    system = _decomposed(chain, partition, system, tol)
    return _run_trials(
        "variance_decomposition", chain, partition, system, trials, seed,
        lambda rng: rng.standard_normal(chain.n),
        lambda f: (variance_residual(chain, system, partition, f),) * 2,
        max, lambda v: v <= tol.identity, tol.identity, tol,
    )


def check_entropy_decomposition(chain: ReversibleChain, partition: FuzzyPartition,
                                trials: int = 200, seed: int = 0,
                                tolerances: Optional[Tolerances] = None,
                                system: Optional[DecomposedSystem] = None) -> CheckResult:
    """Max entropy-decomposition residual over f log-uniform in [e^-3, e^3]."""
    tol = tolerances or config.tolerances
    system = _decomposed(chain, partition, system, tol)
    return _run_trials(
        "entropy_decomposition", chain, partition, system, trials, seed,
        lambda rng: np.exp(rng.uniform(-3.0, 3.0, chain.n)),
        lambda f: (entropy_residual(chain, system, partition, f),) * 2,
        max, lambda v: v <= tol.identity, tol.identity, tol,
    )


def _relative_slack(chain, system, partition, chi, f, psi, tol) -> Tuple[float, float]:
    slack = dirichlet_slack(chain, system, partition, chi, f, psi, tol)
    return slack / max(1.0, dirichlet_form(chain, f, psi)), slack


def check_dirichlet_inequality(chain: ReversibleChain, partition: FuzzyPartition,
                               couplings: CouplingSet, psi: PsiKind, trials: int = 200,
                               seed: int = 0, tolerances: Optional[Tolerances] = None,
                               system: Optional[DecomposedSystem] = None) -> CheckResult:
    """
    Min slack of the Dirichlet-form inequality over f = exp(3 N(0, 1)).

    Each slack is divided by max(1, L_pi f) before comparison with
    tol.dirichlet; the unscaled minimum is kept as ``raw_value``.
    """
    tol = tolerances or config.tolerances
    psi = PsiKind(psi)
    system = _decomposed(chain, partition, system, tol)
    return _run_trials(
        f"dirichlet_inequality_{psi.value}", chain, partition, system, trials, seed,
        lambda rng: np.exp(3.0 * rng.standard_normal(chain.n)),
        lambda f: _relative_slack(chain, system, partition, couplings.chi, f, psi, tol),
        min, lambda v: v >= -tol.dirichlet, tol.dirichlet, tol,
    )


@dataclass
class BoundVerdict:
    """Comparison of c(Q) with min{chi c(Q_hat), min_i c(Q_i)}."""
    kind: PsiKind
    lhs: float
    rhs: float
    passed: bool
    slack: float
    chi: float
    projection_constant: float
    chi_term: float
    class_constants: Dict[str, float]
    reducible: Dict[str, bool]
    tolerance: str
    advisory: bool
    notes: List[str] = field(default_factory=list)
    estimates: Dict[str, RatioEstimate] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "pass": self.passed,
            "slack": self.slack,
            "chi": self.chi,
            "projection_constant": self.projection_constant,
            "chi_term": self.chi_term,
            "class_constants": dict(self.class_constants),
            "reducible": dict(self.reducible),
            "tolerance": self.tolerance,
            "advisory": self.advisory,
            "notes": list(self.notes),
            "estimates": {k: v.to_dict() for k, v in sorted(self.estimates.items())},
        }


def check_theorem_bound(chain: ReversibleChain, partition: FuzzyPartition,
                        couplings: CouplingSet, kind: PsiKind,
                        restarts: Optional[int] = None, seed: Optional[int] = None,
                        max_iter: Optional[int] = None, threads: Optional[int] = None,
                        tolerances: Optional[Tolerances] = None,
                        system: Optional[DecomposedSystem] = None) -> BoundVerdict:
    """
    Evaluate c(Q) >= min{chi c(Q_hat), min_i c(Q_i)} for one kind of constant.

    POINCARE passes iff lhs >= rhs - tol.bound_exact. MLSI and LSI pass iff
    lhs >= rhs (1 - tol.bound_relative) and are advisory only.
    """
    tol = tolerances or config.tolerances
    kind = PsiKind(kind)
    system = _decomposed(chain, partition, system, tol)
    options = dict(restarts=restarts, seed=seed, max_iter=max_iter, threads=threads,
                   tolerances=tol)
    estimates: Dict[str, RatioEstimate] = {}

    def constant(label: str, target: ReversibleChain) -> float:
        value, estimate = chain_constant(target, kind, **options)
        if estimate is not None:
            estimates[label] = estimate
        return value

    lhs = constant("Q", chain)
    projection_value = constant("Q_hat", system.projection)
    class_constants = {c: constant(f"Q_{c}", r)
                       for c, r in zip(system.class_ids, system.restrictions)}
    chi_term = _extended_product(couplings.chi, projection_value)
    rhs = min([chi_term] + list(class_constants.values()))

    notes: List[str] = []
    advisory = kind is not PsiKind.POINCARE
    if advisory:
        tolerance = f"relative {tol.bound_relative:g}"
        passed = lhs >= rhs * (1 - tol.bound_relative) if math.isfinite(rhs) else lhs == rhs
        notes.append("advisory: both sides are upper-bound estimates")
    else:
        tolerance = f"absolute {tol.bound_exact:g}"
        passed = lhs >= rhs - tol.bound_exact if math.isfinite(rhs) else lhs == rhs
    if rhs == 0:
        notes.append("bound is vacuous (right-hand side is 0)")
    if couplings.chi == 0:
        notes.append("chi = 0: the projection term vanishes")
    if system.projection.n == 1:
        notes.append("single class: the projection chain is trivial")
    reducible = {c: value == 0 for c, value in class_constants.items()}
    reducible["Q_hat"] = projection_value == 0
    slack = lhs - rhs if math.isfinite(lhs) or math.isfinite(rhs) else 0.0
    if not passed:
        logger.warning("%s bound fails: lhs %.12g < rhs %.12g", kind.value, lhs, rhs)
    return BoundVerdict(kind, lhs, rhs, bool(passed), slack, couplings.chi, projection_value,
                        chi_term, class_constants, reducible, tolerance, advisory, notes,
                        estimates)


def full_report(chain: ReversibleChain, partition: FuzzyPartition,
                couplings: Union[CouplingSet, Iterable[Coupling], None] = None,
                product_couplings: bool = False, complete_transpose: bool = False,
                trials: int = 200, seed: int = 0, restarts: Optional[int] = None,
                max_iter: Optional[int] = None, threads: Optional[int] = None,
                tolerances: Optional[Tolerances] = None) -> dict:
    """
    Validate, decompose and verify one (chain, partition, couplings) instance.

    Args:
        couplings: Supplied couplings; ignored when ``product_couplings`` is set
        product_couplings: Synthesize product couplings for every required pair

    Returns:
        Dictionary with validation, decomposition, identities, chi, verdicts,
        warnings and provenance sections

    Raises:
        MissingCouplingError: if a pair with positive projection rate has no coupling
    """
    tol = tolerances or config.tolerances
    chain_report = validate_chain(chain, tol)
    partition_report = validate_partition(partition, chain.n, tol)
    system = decompose(chain, partition, tol)
    warnings: List[str] = []
    if not chain_report.ok:
        warnings.append("chain fails " + ", ".join(chain_report.invariants()))
    warnings.extend(system.warnings)

    if product_couplings:
        coupling_set = product_coupling_set(chain, partition, system, tol)
    elif isinstance(couplings, CouplingSet):
        coupling_set = couplings
    else:
        coupling_set = build_coupling_set(chain, partition, system, list(couplings or []),
                                          complete_transpose=complete_transpose, tolerances=tol)
    warnings.extend(coupling_set.warnings)
    coupling_validation = [r.to_dict() for r in
                           coupling_reports(system, chain.n, coupling_set.couplings.values(), tol)]

    identities = {
        "variance": check_variance_decomposition(chain, partition, trials, seed, tol, system).to_dict(),
        "entropy": check_entropy_decomposition(chain, partition, trials, seed, tol, system).to_dict(),
        "dirichlet": {
            kind.value: check_dirichlet_inequality(chain, partition, coupling_set, kind, trials,
                                                   seed, tol, system).to_dict()
            for kind in PsiKind
        },
    }
    verdicts = [check_theorem_bound(chain, partition, coupling_set, kind, restarts, seed,
                                    max_iter, threads, tol, system)
                for kind in PsiKind]
    if coupling_set.chi == 0:
        warnings.append("chi = 0: the bound is vacuous")
    for verdict in verdicts:
        if verdict.rhs == 0 and coupling_set.chi != 0:
            warnings.append(f"{verdict.kind.value} bound is vacuous")
    warnings = list(dict.fromkeys(warnings))
    for message in warnings:
        logger.warning(message)

    return {
        "validation": {
            "chain": chain_report.to_dict(),
            "partition": partition_report.to_dict(),
            "couplings": coupling_validation,
        },
        "decomposition": {
            "classes": list(system.class_ids),
            "pi_hat": system.pi_hat.tolist(),
            "Q_hat": system.Q_hat.tolist(),
        },
        "identities": identities,
        "chi": coupling_set.chi,
        "verdicts": [v.to_dict() for v in verdicts],
        "warnings": warnings,
        "provenance": {
            "version": config.app.version,
            "seed": seed,
            "trials": trials,
            "restarts": restarts if restarts is not None else config.optimizer.restarts,
            "tolerances": tol.model_dump(),
        },
    }
