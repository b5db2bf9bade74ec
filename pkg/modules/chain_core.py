"""Finite reversible Markov chains and their basic functionals."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, special
from scipy.sparse.csgraph import connected_components

from config import Tolerances, config
from modules.errors import DomainError, StructuralError
from utils.validators import check_dimensions, validate_chain

logger = logging.getLogger(__name__)

__all__ = [
    "PsiKind",
    "ReversibleChain",
    "MixingResult",
    "validate_chain",
    "random_walk_chain",
    "dirichlet_form",
    "dirichlet_pairing",
    "expectation",
    "variance",
    "entropy",
    "relative_entropy_terms",
    "heat_kernel",
    "tv_distance",
    "mixing_curve",
    "tv_mixing_time",
    "mixing_diagnostics",
    "is_irreducible",
    "communicating_classes",
]


class PsiKind(str, Enum):
    """Selects the convex function Psi and the matching global functional."""
    POINCARE = "POINCARE"
    MLSI = "MLSI"
    LSI = "LSI"

    @property
    def needs_positive(self) -> bool:
        return self is not PsiKind.POINCARE

    def psi(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Evaluate Psi(u, v) elementwise."""
        if self is PsiKind.POINCARE:
            return (u - v) ** 2
        if self is PsiKind.MLSI:
            return (u - v) * (np.log(u) - np.log(v))
        return (np.sqrt(u) - np.sqrt(v)) ** 2


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ReversibleChain:
    """
    A generator Q on named states together with its stationary measure pi.

    Construction only checks that dimensions agree; use :func:`validate_chain`
    for the probabilistic invariants. Arrays are stored read-only.
    """
    states: Tuple[str, ...]
    pi: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "pi", _frozen(self.pi))
        object.__setattr__(self, "Q", _frozen(self.Q))
        check_dimensions(len(self.states), self.pi, self.Q)

    @property
    def n(self) -> int:
        return len(self.states)

    def index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise StructuralError(f"unknown state {state!r}") from None

    def flow(self) -> np.ndarray:
        """Matrix of equilibrium flows pi(x)Q(x,y)."""
        return self.pi[:, None] * self.Q


@dataclass(frozen=True, eq=False)
class MixingResult:
    """Grid bracket for the TV mixing time."""
    eps: float
    step: float
    t_max: float
    t_bracket: Optional[float]
    times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)

    @property
    def reached(self) -> bool:
        return self.t_bracket is not None


def _as_function(chain_or_n, f) -> np.ndarray:
    n = chain_or_n.n if isinstance(chain_or_n, ReversibleChain) else int(chain_or_n)
    values = np.asarray(f, dtype=float)
    if values.shape != (n,):
        raise StructuralError(f"function has shape {values.shape}, expected ({n},)")
    return values


def _require_positive(values: np.ndarray, what: str) -> None:
    if np.any(values <= 0):
        bad = int(np.flatnonzero(values <= 0)[0])
        raise DomainError(f"{what} requires f > 0, got f({bad}) = {values[bad]:.3g}")


def random_walk_chain(adjacency, states: Optional[Sequence[str]] = None) -> ReversibleChain:
    """
    Build the simple random walk on an undirected graph.

    Args:
        adjacency: Symmetric 0/1 matrix with zero diagonal
        states: Optional vertex names (default: "0", "1", ...)

    Returns:
        Chain with Q(x,y) = 1/d(x) for neighbours, Q(x,x) = -1, pi(x) = d(x)/D
    """
    A = np.asarray(adjacency, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructuralError(f"adjacency has shape {A.shape}, expected a square matrix")
    if np.any((A != 0) & (A != 1)):
        raise DomainError("adjacency entries must be 0 or 1")
    if np.any(np.diag(A) != 0):
        raise DomainError("adjacency must not contain self-loops")
    if not np.array_equal(A, A.T):
        x, y = (int(i) for i in np.argwhere(A != A.T)[0])
        raise DomainError(f"adjacency is not symmetric at ({x},{y})")
    degrees = A.sum(axis=1)
    if np.any(degrees == 0):
        raise DomainError(f"vertex {int(np.flatnonzero(degrees == 0)[0])} is isolated")
    Q = A / degrees[:, None] - np.eye(A.shape[0])
    pi = degrees / degrees.sum()
    names = states if states is not None else [str(i) for i in range(A.shape[0])]
    return ReversibleChain(tuple(names), pi, Q)


def dirichlet_form(chain: ReversibleChain, f, psi: PsiKind = PsiKind.POINCARE) -> float:
    """
    Evaluate 1/2 sum_{x,y} pi(x) Q(x,y) Psi(f(x), f(y)).

    The diagonal of Q does not contribute since Psi(u, u) = 0.
    """
    values = _as_function(chain, f)
    psi = PsiKind(psi)
    if psi.needs_positive:
        _require_positive(values, psi.value)
    flow = chain.flow()
    np.fill_diagonal(flow, 0.0)
    total = 0.5 * float(np.sum(flow * psi.psi(values[:, None], values[None, :])))
    return max(total, 0.0)


def dirichlet_pairing(chain: ReversibleChain, f, g) -> float:
    """Evaluate the bilinear form <-Qf, g>_pi."""
    fv = _as_function(chain, f)
    gv = _as_function(chain, g)
    return float(-np.sum(chain.pi * (chain.Q @ fv) * gv))


def expectation(pi, f) -> float:
    """Mean of f under pi."""
    weights = np.asarray(pi, dtype=float)
    return float(weights @ _as_function(weights.shape[0], f))


def variance(pi, f) -> float:
    """Var_pi(f) = E[f^2] - (E f)^2, evaluated as E[(f - E f)^2]."""
    weights = np.asarray(pi, dtype=float)
    values = _as_function(weights.shape[0], f)
    centred = values - weights @ values
    return float(weights @ centred ** 2)


def entropy(pi, f) -> float:
    """
    Ent_pi(f) = E[f log f] - E f log E f for f > 0.

    Evaluated as m E[r log r - (r - 1)] with m = E f and r = f / m, a sum of
    nonnegative terms that stays accurate for nearly constant f.
    """
    weights = np.asarray(pi, dtype=float)
    values = _as_function(weights.shape[0], f)
    _require_positive(values, "entropy")
    mean = float(weights @ values)
    return max(mean * float(weights @ relative_entropy_terms(values / mean)), 0.0)


def relative_entropy_terms(ratio: np.ndarray) -> np.ndarray:
    """Elementwise r log r - (r - 1), written with log1p."""
    deviation = ratio - 1.0
    return special.xlog1py(ratio, deviation) - deviation


def heat_kernel(chain: ReversibleChain, t: float,
                tolerances: Optional[Tolerances] = None) -> np.ndarray:
    """
    Transition matrix p_t = exp(tQ) by Pade scaling-and-squaring.

    Tiny negative round-off entries are clamped to zero. Rows that drift
    from 1 by more than the heat_row_sum tolerance are logged.
    """
    if t < 0:
        raise DomainError(f"heat kernel needs t >= 0, got {t}")
    if t == 0:
        return np.eye(chain.n)
    tol = tolerances or config.tolerances
    p = np.clip(linalg.expm(t * np.asarray(chain.Q)), 0.0, None)
    drift = float(np.max(np.abs(p.sum(axis=1) - 1.0)))
    if drift > tol.heat_row_sum:
        logger.warning("heat kernel rows at t = %.3g drift from 1 by %.3e", t, drift)
    return p


def tv_distance(mu, nu) -> float:
    """Total variation distance 1/2 sum |mu - nu|."""
    return 0.5 * float(np.sum(np.abs(np.asarray(mu, dtype=float) - np.asarray(nu, dtype=float))))


def mixing_curve(chain: ReversibleChain, t_max: float, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Worst-case TV distance to pi on the grid {0, step, ..., t_max}.

    Returns:
        Tuple of (times, max_x ||p_t(x, .) - pi||_TV)
    """
    if step <= 0:
        raise DomainError(f"step must be positive, got {step}")
    if t_max < 0:
        raise DomainError(f"t_max must be nonnegative, got {t_max}")
    count = int(math.floor(t_max / step + 1e-9)) + 1
    times = step * np.arange(count)
    one_step = heat_kernel(chain, step)
    p = np.eye(chain.n)
    distances = np.empty(count)
    for k in range(count):
        if k:
            p = p @ one_step
        distances[k] = 0.5 * float(np.max(np.sum(np.abs(p - chain.pi[None, :]), axis=1)))
    return times, distances


def tv_mixing_time(chain: ReversibleChain, eps: float, t_max: float, step: float) -> MixingResult:
    """
    First grid point t with max_x ||p_t(x, .) - pi||_TV <= eps.

    The result is an upper bracket of t_mix(eps); ``t_bracket`` is None when
    the threshold is not reached by ``t_max``.
    """
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    times, distances = mixing_curve(chain, t_max, step)
    passing = np.flatnonzero(distances <= eps)
    bracket = float(times[passing[0]]) if passing.size else None
    if bracket is None:
        logger.info("TV threshold %.3g not reached by t = %.3g", eps, times[-1])
    return MixingResult(eps, step, t_max, bracket, times, distances)


def mixing_diagnostics(chain: ReversibleChain, result: MixingResult, lam: float,
                       alpha: Optional[float] = None, rho: Optional[float] = None) -> dict:
    """
    Ratios of the measured bracket to the order-of-magnitude mixing bounds.

    These are diagnostics only; no constant is implied by the O(.) statements.
    """
    pi_min = float(np.min(chain.pi))
    out = {"pi_min": pi_min, "t_bracket": result.t_bracket, "lambda": lam}
    if result.t_bracket is None:
        return out
    poincare_scale = math.log(1.0 / (result.eps * pi_min))
    if poincare_scale > 0 and math.isfinite(lam):
        out["poincare_ratio"] = result.t_bracket * lam / poincare_scale
    if pi_min < math.exp(-1.0):
        loglog = math.log(math.log(1.0 / pi_min))
        if loglog > 0:
            if alpha is not None and math.isfinite(alpha):
                out["mlsi_ratio"] = result.t_bracket * alpha / loglog
            if rho is not None and math.isfinite(rho):
                out["lsi_ratio"] = result.t_bracket * rho / loglog
    return out


def communicating_classes(Q) -> List[np.ndarray]:
    """Strongly connected components of the support graph of Q."""
    support = (np.asarray(Q) > 0).astype(int)
    count, labels = connected_components(support, directed=True, connection="strong")
    return [np.flatnonzero(labels == c) for c in range(count)]


def is_irreducible(chain: ReversibleChain) -> bool:
    """True when every state reaches every other through positive rates."""
    return len(communicating_classes(chain.Q)) == 1
