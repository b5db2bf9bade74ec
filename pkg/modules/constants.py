"""
Poincare, modified log-Sobolev and log-Sobolev constants of a reversible chain.

The Poincare constant is the spectral gap of the symmetrized generator and is
computed exactly. The MLSI and LSI constants are estimated by minimizing the
ratio of Dirichlet form to entropy over positive functions; every reported
estimate is a ratio actually achieved by some f, hence an upper bound on the
true constant.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg, optimize

from config import OptimizerConfig, OracleConfig, SpectralConfig, Tolerances, config
from modules.chain_core import (PsiKind, ReversibleChain, communicating_classes, dirichlet_form,
                                entropy, relative_entropy_terms, variance)
from modules.errors import NoValidCandidateError, NonReversibleError
from utils.validators import ValidationReport, validate_detailed_balance

logger = logging.getLogger(__name__)


def jacobi_eigh(matrix: np.ndarray, max_sweeps: int = 100,
                tol: float = 1e-15) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi eigensolver for a real symmetric matrix.

    Returns:
        Tuple of (ascending eigenvalues, eigenvectors as columns)
    """
    A = np.array(matrix, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A ** 2) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(diff) * 1e-150 > abs(apq):
                    # tau^2 would overflow; t ~ 1/(2 tau)
                    t = apq / diff
                else:
                    tau = diff / (2.0 * apq)
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning("Jacobi sweeps exhausted before convergence (n=%d)", n)
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def symmetrized_generator(chain: ReversibleChain) -> np.ndarray:
    """S = D^{1/2} (-Q) D^{-1/2} with D = diag(pi), symmetrized against round-off."""
    root = np.sqrt(chain.pi)
    S = root[:, None] * (-chain.Q) / root[None, :]
    return 0.5 * (S + S.T)


def spectrum(chain: ReversibleChain,
             spectral: Optional[SpectralConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the symmetrized generator, eigenvalues ascending."""
    settings = spectral or config.spectral
    S = symmetrized_generator(chain)
    if chain.n <= settings.jacobi_max_n:
        return jacobi_eigh(S, max_sweeps=settings.jacobi_max_sweeps)
    return linalg.eigh(S)


def _require_reversible(chain: ReversibleChain, tolerances: Tolerances) -> None:
    report = ValidationReport("chain")
    validate_detailed_balance(chain.pi, chain.Q, report, tolerances)
    if not report.ok:
        raise NonReversibleError(report.violations[0].message)


def poincare_constant(chain: ReversibleChain, tolerances: Optional[Tolerances] = None,
                      spectral: Optional[SpectralConfig] = None) -> float:
    """
    Spectral gap lambda(Q): second-smallest eigenvalue of D^{1/2}(-Q)D^{-1/2}.

    Returns 0 for reducible chains and +inf for a single state.

    Raises:
        NonReversibleError: if the chain violates detailed balance
    """
    tol = tolerances or config.tolerances
    _require_reversible(chain, tol)
    if chain.n == 1:
        return math.inf
    eigenvalues, _ = spectrum(chain, spectral)
    gap = float(eigenvalues[1])
    if gap < tol.eigen_zero:
        logger.warning("chain on %d states is reducible; Poincare constant is 0", chain.n)
        return 0.0
    return gap


def fiedler_function(chain: ReversibleChain,
                     spectral: Optional[SpectralConfig] = None) -> np.ndarray:
    """Eigenfunction of -Q for the spectral gap, normalized to max |phi| = 1."""
    _, vectors = spectrum(chain, spectral)
    phi = vectors[:, 1] / np.sqrt(chain.pi)
    phi = phi - chain.pi @ phi
    return phi / max(np.max(np.abs(phi)), 1e-300)


def global_functional(psi: PsiKind, pi: np.ndarray, f: np.ndarray) -> float:
    """Var for POINCARE, Ent for MLSI and LSI."""
    return variance(pi, f) if psi is PsiKind.POINCARE else entropy(pi, f)


def ratio_value(chain: ReversibleChain, psi: PsiKind, f: np.ndarray,
                degenerate: float) -> Optional[float]:
    """Dirichlet form over Var/Ent, or None when the denominator is below ``degenerate``."""
    denominator = global_functional(psi, chain.pi, f)
    if not math.isfinite(denominator) or denominator < degenerate:
        return None
    value = dirichlet_form(chain, f, psi) / denominator
    return value if math.isfinite(value) else None


@dataclass
class RatioEstimate:
    """Best achieved ratio over all restarts, with reproducibility metadata."""
    kind: PsiKind
    value: float
    minimizer: Optional[np.ndarray]
    restarts: int
    seed: int
    iterations: int = 0
    evaluations: int = 0
    best_restart: Optional[int] = None
    method: str = "bfgs-3point-multistart"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "minimizer": None if self.minimizer is None else self.minimizer.tolist(),
            "restarts": self.restarts,
            "seed": self.seed,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "best_restart": self.best_restart,
            "method": self.method,
            "bound": "upper",
        }


class _RatioObjective:
    """Objective in the free coordinates h; f = exp(h - E_pi h) or h - E_pi h."""

    def __init__(self, chain: ReversibleChain, psi: PsiKind, degenerate: float):
        self.chain = chain
        self.psi = psi
        self.degenerate = degenerate
        self.wall = math.inf
        self.best_value = math.inf
        self.best_f: Optional[np.ndarray] = None
        self.evaluations = 0

    def function(self, h: np.ndarray) -> np.ndarray:
        g = h - self.chain.pi @ h
        if self.psi is PsiKind.POINCARE:
            return g
        with np.errstate(over="ignore"):
            return np.exp(g)

    def evaluate(self, h: np.ndarray) -> Optional[float]:
        self.evaluations += 1
        f = self.function(np.asarray(h, dtype=float))
        if not np.all(np.isfinite(f)) or (self.psi.needs_positive and np.any(f <= 0)):
            return None
        with np.errstate(all="ignore"):
            value = ratio_value(self.chain, self.psi, f, self.degenerate)
        if value is not None and value < self.best_value:
            self.best_value = value
            self.best_f = f.copy()
        return value

    def __call__(self, h: np.ndarray) -> float:
        value = self.evaluate(h)
        return self.wall if value is None else value


class _StallMonitor:
    """Stops the optimizer when the ratio stops improving."""

    def __init__(self, window: int, rel: float):
        self.window = window
        self.rel = rel
        self.history: List[float] = []

    def __call__(self, intermediate_result):
        self.history.append(float(intermediate_result.fun))
        if len(self.history) > self.window:
            old = self.history[-self.window - 1]
            if old - self.history[-1] <= self.rel * abs(old):
                raise StopIteration


@dataclass
class _RestartOutcome:
    index: int
    value: float
    f: Optional[np.ndarray]
    iterations: int
    evaluations: int


def _start_point(chain: ReversibleChain, psi: PsiKind, index: int, seed: int,
                 seed_direction: Optional[np.ndarray]) -> np.ndarray:
    if index == 0 and seed_direction is not None:
        amplitude = 1.0 if psi is PsiKind.POINCARE else 1e-4
        return amplitude * seed_direction
    rng = np.random.default_rng([seed, index])
    scale = rng.uniform(0.05, 3.0)
    return scale * rng.standard_normal(chain.n)


def _run_restart(chain: ReversibleChain, psi: PsiKind, index: int, seed: int,
                 settings: OptimizerConfig, degenerate: float,
                 seed_direction: Optional[np.ndarray]) -> _RestartOutcome:
    objective = _RatioObjective(chain, psi, degenerate)
    h0 = _start_point(chain, psi, index, seed, seed_direction)
    start_value = objective.evaluate(h0)
    if start_value is None:
        return _RestartOutcome(index, math.inf, None, 0, objective.evaluations)
    objective.wall = start_value
    monitor = _StallMonitor(settings.stall_window, settings.stall_rel)
    result = optimize.minimize(
        objective, h0, method="BFGS", jac="3-point", callback=monitor,
        options={"maxiter": settings.max_iter, "gtol": 1e-12,
                 "finite_diff_rel_step": settings.fd_step},
    )
    return _RestartOutcome(index, objective.best_value, objective.best_f,
                           int(getattr(result, "nit", 0)), objective.evaluations)


def ratio_minimize(chain: ReversibleChain, psi: PsiKind, restarts: Optional[int] = None,
                   seed: Optional[int] = None, max_iter: Optional[int] = None,
                   threads: Optional[int] = None,
                   tolerances: Optional[Tolerances] = None,
                   optimizer: Optional[OptimizerConfig] = None) -> RatioEstimate:
    """
    Multi-start minimization of the Dirichlet-form ratio.

    MLSI/LSI minimize L(f)/Ent(f) over f = exp(g) with E_pi g = 0; POINCARE
    (sanity mode) minimizes E(f,f)/Var(f) over mean-zero f. Restart 0 starts
    near the spectral eigenfunction, the rest from random points seeded by
    (seed, restart index). Candidates with Var/Ent below the degenerate
    tolerance are rejected. Gradients are central finite differences.

    Raises:
        NoValidCandidateError: if no restart produced a valid candidate
    """
    psi = PsiKind(psi)
    base = optimizer or config.optimizer
    settings = base.model_copy(update={
        k: v for k, v in {"restarts": restarts, "seed": seed, "max_iter": max_iter,
                          "threads": threads}.items() if v is not None
    })
    tol = tolerances or config.tolerances
    if chain.n == 1:
        raise NoValidCandidateError("no valid candidate: a single state carries only constants")
    try:
        seed_direction = fiedler_function(chain)
    except (np.linalg.LinAlgError, ValueError):
        seed_direction = None

    def run(index: int) -> _RestartOutcome:
        return _run_restart(chain, psi, index, settings.seed, settings, tol.degenerate,
                            seed_direction)

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            outcomes = list(pool.map(run, range(settings.restarts)))
    else:
        outcomes = [run(index) for index in range(settings.restarts)]

    valid = [o for o in outcomes if o.f is not None]
    if not valid:
        raise NoValidCandidateError(f"no valid candidate for {psi.value} after {settings.restarts} restarts")
    best = min(valid, key=lambda o: (o.value, o.index))
    logger.debug("%s ratio %.12g from restart %d", psi.value, best.value, best.index)
    return RatioEstimate(
        kind=psi,
        value=best.value,
        minimizer=best.f,
        restarts=settings.restarts,
        seed=settings.seed,
        iterations=sum(o.iterations for o in outcomes),
        evaluations=sum(o.evaluations for o in outcomes),
        best_restart=best.index,
    )


def _batch_ratios(chain: ReversibleChain, psi: PsiKind, F: np.ndarray,
                  degenerate: float) -> np.ndarray:
    """Ratios for each row of F (one candidate function per row); +inf when degenerate."""
    flow = chain.flow()
    np.fill_diagonal(flow, 0.0)
    pi = chain.pi
    with np.errstate(all="ignore"):
        dirichlet = 0.5 * np.einsum("xy,mxy->m", flow, psi.psi(F[:, :, None], F[:, None, :]))
        if psi is PsiKind.POINCARE:
            centred = F - (F @ pi)[:, None]
            denominator = centred ** 2 @ pi
        else:
            mean = F @ pi
            denominator = mean * (relative_entropy_terms(F / mean[:, None]) @ pi)
        ratios = dirichlet / denominator
    bad = ~np.isfinite(ratios) | ~(denominator >= degenerate)
    ratios[bad] = np.inf
    return ratios


def brute_force_ratio_oracle(chain: ReversibleChain, psi: PsiKind, seed: int = 0,
                             oracle: Optional[OracleConfig] = None,
                             tolerances: Optional[Tolerances] = None) -> Optional[float]:
    """
    Derivative-free estimate of the same ratio, for cross-checking.

    Candidates are f = (1, exp(s)) with s on a full log-spaced grid for up to
    four states, or a uniform random cloud of ``samples`` points otherwise;
    the best point is then refined by shrinking Gaussian perturbations.

    Returns:
        Best ratio found, or None when every candidate is degenerate
    """
    psi = PsiKind(psi)
    settings = oracle or config.oracle
    tol = tolerances or config.tolerances
    n = chain.n
    if n == 1:
        return None
    rng = np.random.default_rng(seed)
    half_width = settings.log_range * math.log(10.0)
    chunk = max(1000, settings.chunk * 4 // (n * n))

    def scan(S: np.ndarray) -> Tuple[float, Optional[np.ndarray]]:
        best_value, best_s = math.inf, None
        for start in range(0, S.shape[0], chunk):
            block = S[start:start + chunk]
            F = np.hstack([np.ones((block.shape[0], 1)), np.exp(block)])
            ratios = _batch_ratios(chain, psi, F, tol.degenerate)
            k = int(np.argmin(ratios))
            if ratios[k] < best_value:
                best_value, best_s = float(ratios[k]), block[k].copy()
        return best_value, best_s

    if n <= 4:
        points = {2: settings.grid_points_2, 3: settings.grid_points_3, 4: settings.grid_points_4}[n]
        axis = np.log(np.logspace(-settings.log_range, settings.log_range, points))
        grids = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
        cloud = np.stack([g.ravel() for g in grids], axis=1)
    else:
        cloud = rng.uniform(-half_width, half_width, size=(settings.samples, n - 1))
    best_value, best_s = scan(cloud)
    if best_s is None:
        return None

    radius = 1.0
    for _ in range(settings.refine_rounds):
        trial = best_s + radius * rng.standard_normal((settings.refine_samples, n - 1))
        value, s = scan(trial)
        if s is not None and value < best_value:
            best_value, best_s = value, s
        radius *= 0.8
    return best_value


@dataclass
class ConstantsReport:
    """lambda (exact) with MLSI/LSI estimates and the ordering check."""
    lambda_: float
    alpha_est: RatioEstimate
    rho_est: RatioEstimate
    irreducible: bool
    warnings: List[str] = field(default_factory=list)
    ordering_ok: bool = True

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "alpha_est": self.alpha_est.to_dict(),
            "rho_est": self.rho_est.to_dict(),
            "irreducible": self.irreducible,
            "ordering_ok": self.ordering_ok,
            "warnings": list(self.warnings),
        }


def ordering_holds(lam: float, alpha: float, rho: float, tol_order: float) -> bool:
    """2 lambda >= alpha (1 - tol) and alpha >= 4 rho (1 - tol); infinite values pass."""
    first = not (math.isfinite(lam) and math.isfinite(alpha)) or 2 * lam >= alpha * (1 - tol_order)
    second = not (math.isfinite(alpha) and math.isfinite(rho)) or alpha >= 4 * rho * (1 - tol_order)
    return bool(first and second)


def _single_state_estimate(kind: PsiKind, seed: int) -> RatioEstimate:
    return RatioEstimate(kind, math.inf, None, 0, seed, method="single-state")


def chain_constant(chain: ReversibleChain, kind: PsiKind, restarts: Optional[int] = None,
                   seed: Optional[int] = None, max_iter: Optional[int] = None,
                   threads: Optional[int] = None,
                   tolerances: Optional[Tolerances] = None) -> Tuple[float, Optional[RatioEstimate]]:
    """Constant of the given kind: exact for POINCARE, estimated otherwise."""
    kind = PsiKind(kind)
    if kind is PsiKind.POINCARE:
        return poincare_constant(chain, tolerances), None
    if chain.n == 1:
        estimate = _single_state_estimate(kind, seed or 0)
        return estimate.value, estimate
    estimate = ratio_minimize(chain, kind, restarts=restarts, seed=seed, max_iter=max_iter,
                              threads=threads, tolerances=tolerances)
    return estimate.value, estimate


def estimate_constants(chain: ReversibleChain, restarts: Optional[int] = None,
                       seed: Optional[int] = None, max_iter: Optional[int] = None,
                       threads: Optional[int] = None,
                       tolerances: Optional[Tolerances] = None) -> ConstantsReport:
    """
    Compute lambda and estimate alpha and rho for one chain.

    Reducible chains yield lambda = 0 with a warning rather than an error.
    """
    tol = tolerances or config.tolerances
    seed = config.optimizer.seed if seed is None else seed
    warnings: List[str] = []
    irreducible = len(communicating_classes(chain.Q)) == 1
    if not irreducible:
        warnings.append("chain is reducible; all three constants are 0")
    lam = poincare_constant(chain, tol)
    if chain.n == 1:
        warnings.append("single state: the constants are infinite")
        alpha = _single_state_estimate(PsiKind.MLSI, seed)
        rho = _single_state_estimate(PsiKind.LSI, seed)
    else:
        alpha = ratio_minimize(chain, PsiKind.MLSI, restarts, seed, max_iter, threads, tol)
        rho = ratio_minimize(chain, PsiKind.LSI, restarts, seed, max_iter, threads, tol)
    ordering = ordering_holds(lam, alpha.value, rho.value, tol.order)
    if not ordering:
        warnings.append("estimates violate 2*lambda >= alpha >= 4*rho beyond the optimizer tolerance")
    for message in warnings:
        logger.warning(message)
    return ConstantsReport(lam, alpha, rho, irreducible, warnings, ordering)
