"""Tests for the glued double graph and its closed-form quantities."""

import numpy as np
import pytest

from modules.constants import poincare_constant
from modules.coupling import coupling_reports
from modules.decomposition import decompose
from modules.errors import DomainError
from modules.generators import random_base_graph
from modules.glued_graph import (BaseGraph, GluedGraph, build_glued_graph, canonical_coupling,
                                 canonical_partition, closed_form_quantities,
                                 definition_quantities, exact_partition_attempt)
from utils.validators import validate_chain


@pytest.fixture
def pentagon():
    edges = (("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("e", "b"), ("e", "a"))
    return BaseGraph(("a", "b", "c", "d", "e"), edges, ("a", "c"))


def test_pentagon_construction(pentagon):
    glued, chain = build_glued_graph(pentagon)
    assert len(glued.order) == 8
    assert glued.total_degree == 30
    assert glued.order[:3] == ("b#1", "d#1", "e#1")
    assert glued.order[3:5] == ("a", "c")
    assert validate_chain(chain).ok
    np.testing.assert_allclose(chain.pi, [glued.degrees[v] / 30 for v in glued.order])


def test_pentagon_quantities(pentagon):
    closed = closed_form_quantities(pentagon)
    assert closed.q_hat_12 == pytest.approx(7 / 15, abs=1e-12)
    assert closed.chi == pytest.approx(15 / 28, abs=1e-12)
    assert closed.projection_bound == pytest.approx(0.5, abs=1e-12)
    assert closed.total_degree == 30
    definition = definition_quantities(pentagon)
    for key, value in closed.to_dict().items():
        assert definition[key] == pytest.approx(value, abs=1e-12)


def test_pentagon_canonical_partition(pentagon):
    glued, chain = build_glued_graph(pentagon)
    partition = canonical_partition(glued)
    system = decompose(chain, partition)
    np.testing.assert_allclose(system.pi_hat, [0.5, 0.5], atol=1e-12)
    a = chain.index("a")
    pi_1 = system.lifted_measure("1", chain.n)
    assert pi_1[a] == pytest.approx(chain.pi[a])
    assert pi_1[chain.index("b#1")] == pytest.approx(2 * chain.pi[chain.index("b#1")])
    assert pi_1[chain.index("b#2")] == 0.0


def test_canonical_coupling_is_valid_and_symmetric(pentagon):
    glued, chain = build_glued_graph(pentagon)
    couplings = canonical_coupling(glued, chain)
    system = decompose(chain, canonical_partition(glued))
    assert all(r.ok for r in coupling_reports(system, chain.n, couplings.couplings.values()))
    forward, backward = couplings.couplings[("1", "2")], couplings.couplings[("2", "1")]
    np.testing.assert_array_equal(forward.x, backward.y)
    assert couplings.chi == pytest.approx(15 / 28, abs=1e-12)


@pytest.mark.parametrize("base,q_hat,chi,bound", [
    (BaseGraph(("u", "v"), (("u", "v"),), ("u",)), 2 / 3, 3 / 4, 1.0),
    (BaseGraph(("u", "v"), (("u", "v"),), ()), 1 / 2, 1.0, 1.0),
], ids=["single-edge", "prism"])
def test_small_instances(base, q_hat, chi, bound):
    closed = closed_form_quantities(base)
    definition = definition_quantities(base)
    for expected, key in ((q_hat, "Q_hat_12"), (chi, "chi"), (bound, "projection_bound")):
        assert closed.to_dict()[key] == pytest.approx(expected, abs=1e-12)
        assert definition[key] == pytest.approx(expected, abs=1e-12)


def test_single_edge_glues_into_triangle():
    glued, _ = build_glued_graph(BaseGraph(("u", "v"), (("u", "v"),), ("u",)))
    assert set(glued.degrees.values()) == {2}
    assert glued.graph.has_edge("v#1", "v#2")


def test_empty_h_gives_exact_partition():
    glued, _ = build_glued_graph(BaseGraph(("u", "v"), (("u", "v"),), ()))
    assert canonical_partition(glued).is_exact()


def test_degree_invariants():
    rng = np.random.default_rng(40)
    for _ in range(20):
        base = random_base_graph(rng)
        glued, _ = build_glued_graph(base)
        graph = base.graph()
        for v in base.vertices:
            if v in base.H:
                assert glued.degrees[v] == 2 * graph.degree[v]
            else:
                assert glued.degrees[f"{v}#1"] == graph.degree[v] + 1
                assert glued.degrees[f"{v}#2"] == graph.degree[v] + 1
        expected = 2 * sum(d for _, d in graph.degree) + 2 * len(base.unglued)
        assert glued.total_degree == expected


@pytest.mark.parametrize("base,message", [
    (BaseGraph(("u", "v"), (("u", "v"),), ("u", "v")), "H must not be all of G"),
    (BaseGraph(("u", "v", "w"), (("u", "v"), ("v", "w")), ("u", "v")), "neighbour condition at vertex u"),
    (BaseGraph(("u", "v", "w"), (("u", "v"),), ()), "not connected"),
    (BaseGraph(("u", "v#1"), (("u", "v#1"),), ()), "must not contain"),
    (BaseGraph(("u", "v"), (("u", "v"),), ("x",)), "unknown vertex x"),
    (BaseGraph(("u", "u"), (), ()), "distinct"),
])
def test_invalid_base_graphs(base, message):
    with pytest.raises(DomainError, match=message):
        build_glued_graph(base)


def test_definition_matches_closed_form_on_random_graphs():
    rng = np.random.default_rng(41)
    for _ in range(50):
        base = random_base_graph(rng)
        closed = closed_form_quantities(base).to_dict()
        definition = definition_quantities(base)
        for key in ("Q_hat_12", "chi", "projection_bound"):
            assert abs(closed[key] - definition[key]) <= 1e-12, (key, base)


def test_projection_gap_is_twice_the_rate():
    rng = np.random.default_rng(42)
    for _ in range(10):
        glued, chain = build_glued_graph(random_base_graph(rng))
        system = decompose(chain, canonical_partition(glued))
        assert poincare_constant(system.projection) == pytest.approx(2 * system.Q_hat[0, 1], rel=1e-12)


def test_exact_partition_attempt(pentagon):
    glued, _ = build_glued_graph(pentagon)
    result = exact_partition_attempt(glued, assignment={"a": "1", "c": "2"})
    assert result["assignment"] == {"a": "1", "c": "2"}
    assert result["chi"] == 0.0
    assert result["bound"] == 0.0
    assert any("not an edge" in w for w in result["warnings"])
    assert set(result["class_constants"]) == {"1", "2"}

    seeded = exact_partition_attempt(glued, rng=np.random.default_rng(43))
    assert set(seeded["assignment"].values()) <= {"1", "2"}
    with pytest.raises(DomainError):
        exact_partition_attempt(glued, assignment={"a": "3"})


def test_class_measures_are_mirror_images():
    rng = np.random.default_rng(44)
    for _ in range(20):
        base = random_base_graph(rng)
        glued, chain = build_glued_graph(base)
        system = decompose(chain, canonical_partition(glued))
        pi_1 = system.lifted_measure("1", chain.n)
        pi_2 = system.lifted_measure("2", chain.n)
        H = set(base.H)

        def swap(v):
            if v in H:
                return v
            name, copy = v.rsplit("#", 1)
            return GluedGraph.copy_name(name, 3 - int(copy))

        for x, v in enumerate(glued.order):
            assert pi_1[x] == pytest.approx(pi_2[chain.index(swap(v))], abs=1e-15)
