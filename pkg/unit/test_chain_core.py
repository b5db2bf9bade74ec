"""Tests for reversible chains and their functionals."""

import logging
import math

import numpy as np
import pytest

from config import Tolerances
from modules import chain_core
from modules.chain_core import (PsiKind, ReversibleChain, dirichlet_form, dirichlet_pairing,
                                entropy, expectation, heat_kernel, is_irreducible,
                                mixing_curve, mixing_diagnostics, random_walk_chain,
                                tv_distance, tv_mixing_time, validate_chain, variance)
from modules.errors import DomainError, StructuralError
from modules.generators import random_reversible_chain


def two_state(q: float = 1.0, p: float = 1.0) -> ReversibleChain:
    pi = np.array([p, q]) / (p + q)
    return ReversibleChain(("0", "1"), pi, [[-q, q], [p, -p]])


def test_symmetric_two_state_chain_is_valid():
    assert validate_chain(two_state()).ok


def test_detailed_balance_violation_reports_worst_pair():
    chain = ReversibleChain(("0", "1"), [0.5, 0.5], [[-1.0, 1.0], [2.0, -2.0]])
    report = validate_chain(chain)
    assert report.invariants() == ["detailed_balance"]
    violation = report.violations[0]
    assert violation.indices == (0, 1)
    assert violation.magnitude == pytest.approx(0.5)


def test_row_sum_violation_names_the_row():
    chain = ReversibleChain(("0", "1"), [0.5, 0.5], [[-1.0, 1.1], [1.0, -1.0]])
    report = validate_chain(chain)
    row = next(v for v in report.violations if v.invariant == "row_sum")
    assert row.indices == (0,)
    assert row.magnitude == pytest.approx(0.1)


def test_nonpositive_measure_is_reported():
    chain = ReversibleChain(("0", "1"), [1.0, 0.0], [[-1.0, 1.0], [1.0, -1.0]])
    assert "pi_positive" in validate_chain(chain).invariants()


def test_dimension_mismatch_is_structural():
    with pytest.raises(StructuralError):
        ReversibleChain(("0", "1"), [1.0], [[-1.0, 1.0], [1.0, -1.0]])
    with pytest.raises(StructuralError):
        ReversibleChain(("0", "1"), [0.5, 0.5], [[0.0]])


def test_random_walk_on_single_edge():
    chain = random_walk_chain([[0, 1], [1, 0]])
    np.testing.assert_allclose(chain.Q, [[-1, 1], [1, -1]])
    np.testing.assert_allclose(chain.pi, [0.5, 0.5])


def test_random_walk_on_triangle():
    chain = random_walk_chain(np.ones((3, 3)) - np.eye(3))
    np.testing.assert_allclose(chain.pi, [1 / 3] * 3)
    assert chain.Q[0, 1] == pytest.approx(0.5)
    assert validate_chain(chain).ok


def test_random_walk_on_path():
    chain = random_walk_chain([[0, 1, 0], [1, 0, 1], [0, 1, 0]], states=["a", "b", "c"])
    np.testing.assert_allclose(chain.pi, [0.25, 0.5, 0.25])
    assert chain.Q[0, 1] == pytest.approx(1.0)
    assert chain.Q[1, 0] == pytest.approx(0.5)
    assert chain.Q[1, 2] == pytest.approx(0.5)
    assert chain.states == ("a", "b", "c")


@pytest.mark.parametrize("adjacency", [
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
    [[0, 1], [0, 0]],
    [[1, 1], [1, 0]],
])
def test_random_walk_rejects_bad_adjacency(adjacency):
    with pytest.raises(DomainError):
        random_walk_chain(adjacency)


@pytest.mark.parametrize("psi", list(PsiKind))
def test_dirichlet_form_of_constant_is_zero(psi):
    chain = random_reversible_chain(5, np.random.default_rng(0))
    assert dirichlet_form(chain, np.full(5, 2.5), psi) == 0.0


def test_dirichlet_form_two_state_examples():
    chain = two_state()
    assert dirichlet_form(chain, [0.0, 1.0], PsiKind.POINCARE) == pytest.approx(0.5)
    assert dirichlet_form(chain, [1.0, math.e], PsiKind.MLSI) == pytest.approx((math.e - 1) / 2)


@pytest.mark.parametrize("psi", [PsiKind.MLSI, PsiKind.LSI])
def test_dirichlet_form_requires_positive_f(psi):
    with pytest.raises(DomainError):
        dirichlet_form(two_state(), [0.0, 1.0], psi)


def test_poincare_form_equals_pairing():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        chain = random_reversible_chain(n, rng, density=rng.uniform(0.3, 1.0))
        f = rng.standard_normal(n)
        expected = dirichlet_pairing(chain, f, f)
        assert dirichlet_form(chain, f) == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_poincare_form_ignores_constant_shift():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(2, 8))
        chain = random_reversible_chain(n, rng)
        f = rng.standard_normal(n)
        shift = rng.uniform(-10, 10)
        assert dirichlet_form(chain, f + shift) == \
            pytest.approx(dirichlet_form(chain, f), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("psi,power", [(PsiKind.POINCARE, 2), (PsiKind.MLSI, 1), (PsiKind.LSI, 1)])
def test_dirichlet_form_scaling(psi, power):
    rng = np.random.default_rng(6)
    for _ in range(20):
        n = int(rng.integers(2, 8))
        chain = random_reversible_chain(n, rng)
        f = np.exp(rng.standard_normal(n))
        c = rng.uniform(0.1, 10.0)
        assert dirichlet_form(chain, c * f, psi) == \
            pytest.approx(c ** power * dirichlet_form(chain, f, psi), rel=1e-10)


def test_variance_examples():
    assert variance([0.5, 0.5], [3.0, 3.0]) == 0.0
    assert variance([0.5, 0.5], [0.0, 1.0]) == pytest.approx(0.25)
    assert variance([0.25, 0.5, 0.25], [0.0, 1.0, 2.0]) == pytest.approx(0.5)


def test_variance_equals_pairwise_form():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 8))
        pi = rng.uniform(0.1, 1.0, n)
        pi /= pi.sum()
        f = rng.standard_normal(n)
        pairwise = 0.5 * np.sum(pi[:, None] * pi[None, :] * (f[:, None] - f[None, :]) ** 2)
        assert variance(pi, f) == pytest.approx(pairwise, abs=1e-12)


def test_entropy_examples():
    e = math.e
    expected = 0.5 * e - (1 + e) / 2 * math.log((1 + e) / 2)
    assert entropy([0.5, 0.5], [1.0, e]) == pytest.approx(expected, rel=1e-12)
    assert entropy([0.3, 0.7], [4.0, 4.0]) == pytest.approx(0.0, abs=1e-15)
    assert entropy([1.0], [5.0]) == 0.0


def test_entropy_is_nonnegative_and_positive_off_constants():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pi = rng.uniform(0.1, 1.0, 5)
        pi /= pi.sum()
        f = np.exp(rng.standard_normal(5))
        assert entropy(pi, f) > 1e-10


def test_entropy_rejects_nonpositive_values():
    with pytest.raises(DomainError):
        entropy([0.5, 0.5], [1.0, -1.0])


def test_expectation():
    assert expectation([0.25, 0.75], [4.0, 8.0]) == pytest.approx(7.0)


def test_heat_kernel_at_zero_is_identity():
    np.testing.assert_array_equal(heat_kernel(two_state(), 0.0), np.eye(2))


def test_heat_kernel_two_state_closed_form():
    p = heat_kernel(two_state(), 1.0)
    assert p[0, 0] == pytest.approx((1 + math.exp(-2)) / 2, rel=1e-12)
    np.testing.assert_allclose(heat_kernel(two_state(), 50.0), 0.5, atol=1e-12)


def test_heat_kernel_semigroup_and_row_sums():
    rng = np.random.default_rng(4)
    for _ in range(10):
        chain = random_reversible_chain(int(rng.integers(2, 6)), rng)
        s, t = rng.uniform(0, 1, 2)
        np.testing.assert_allclose(heat_kernel(chain, s).sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(heat_kernel(chain, s) @ heat_kernel(chain, t),
                                   heat_kernel(chain, s + t), atol=1e-8)


def test_heat_kernel_rejects_negative_time():
    with pytest.raises(DomainError):
        heat_kernel(two_state(), -0.1)


def test_heat_kernel_row_sums_within_tolerance_are_silent(caplog):
    chain = random_reversible_chain(6, np.random.default_rng(7))
    with caplog.at_level(logging.WARNING, logger="modules.chain_core"):
        heat_kernel(chain, 0.7)
    assert not caplog.records


def test_heat_kernel_logs_row_sum_drift(caplog, monkeypatch):
    expm = chain_core.linalg.expm
    monkeypatch.setattr(chain_core.linalg, "expm", lambda a: 1.01 * expm(a))
    chain = random_reversible_chain(6, np.random.default_rng(7))
    with caplog.at_level(logging.WARNING, logger="modules.chain_core"):
        heat_kernel(chain, 0.7)
    assert "drift from 1" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="modules.chain_core"):
        heat_kernel(chain, 0.7, Tolerances(heat_row_sum=0.1))
    assert not caplog.records


def test_tv_distance():
    assert tv_distance([1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.5)


def test_mixing_curve_matches_two_state_closed_form():
    times, distances = mixing_curve(two_state(), 2.0, 0.01)
    assert len(times) == 201
    np.testing.assert_allclose(distances, 0.5 * np.exp(-2 * times), atol=1e-9)


def test_tv_mixing_time_brackets():
    chain = two_state()
    result = tv_mixing_time(chain, 0.25, 10.0, 0.01)
    assert result.reached
    # 0.5 exp(-2t) <= 0.25 first at t = log(2)/2 = 0.3466
    assert result.t_bracket == pytest.approx(0.35)
    assert tv_mixing_time(chain, 0.999, 1.0, 0.01).t_bracket == 0.0
    assert not tv_mixing_time(chain, 0.01, 0.5, 0.01).reached


@pytest.mark.parametrize("eps", [0.0, 1.0, 1.5])
def test_tv_mixing_time_rejects_eps(eps):
    with pytest.raises(DomainError):
        tv_mixing_time(two_state(), eps, 1.0, 0.1)


def test_mixing_diagnostics_reports_ratios():
    chain = random_walk_chain(np.ones((6, 6)) - np.eye(6))
    result = tv_mixing_time(chain, 0.25, 10.0, 0.01)
    diagnostics = mixing_diagnostics(chain, result, lam=1.2, alpha=2.0, rho=0.5)
    assert diagnostics["pi_min"] == pytest.approx(1 / 6)
    assert diagnostics["poincare_ratio"] > 0
    assert "mlsi_ratio" in diagnostics and "lsi_ratio" in diagnostics


def test_reducible_chain_detected():
    Q = np.zeros((4, 4))
    Q[:2, :2] = [[-1, 1], [1, -1]]
    Q[2:, 2:] = [[-1, 1], [1, -1]]
    chain = ReversibleChain(("a", "b", "c", "d"), [0.25] * 4, Q)
    assert validate_chain(chain).ok
    assert not is_irreducible(chain)
    assert is_irreducible(two_state())
