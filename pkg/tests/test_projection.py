import numpy as np
import pytest

from probalign.errors import PreconditionError
from probalign.fixtures import loop_net
from probalign.graph import TransitionGraph, tg_from_reachability
from probalign.net import TAU, is_tau, reachability_graph
from probalign.projection import WeightedTransitionGraph, ifte, project, weighted, weighted_linear
from probalign.graph import linear_tg


def test_ifte():
    assert ifte(1.0, 0.3) == 0.3
    assert ifte(0.0, 0.3) == 1.0
    with pytest.raises(PreconditionError):
        ifte(0.5, 0.3)


@pytest.mark.parametrize("trace,omega", [("a", 0.4), ("cb", 0.2), ("ca", 0.1)])
def test_omega(fixture_tg, trace, omega):
    assert project(fixture_tg, trace).omega == pytest.approx(omega, abs=1e-15)


def test_projection_drops_tau(fixture_tg):
    for trace in ["a", "aa", "ca", "cb", "caaa"]:
        g = project(fixture_tg, trace)
        assert not any(is_tau(x) for x in g.tg.labels)
        assert g.horizon == len(trace) and g.traces == (tuple(trace),)


def test_projection_of_a_has_no_edges(fixture_tg):
    g = project(fixture_tg, "a")
    assert g.tg.labels == ("a",) and not g.tg.R.any()


def test_rows_renormalised(fixture_tg):
    g = project(fixture_tg, "caa")
    sums = g.tg.R.sum(axis=1)
    assert np.allclose(sums[sums > 0], 1.0)
    # C keeps only its edge to A, A keeps its self-loop
    names = dict(zip(g.tg.names, range(len(g.tg))))
    assert g.tg.R[names["C"], names["A"]] == 1.0
    assert g.tg.R[names["A"], names["A"]] == 1.0


def test_projection_of_raw_net_graph():
    tg = tg_from_reachability(reachability_graph(loop_net()))
    assert project(tg, "a").omega == pytest.approx(0.4)
    assert project(tg, "cb").omega == pytest.approx(0.2)


def test_omega_one_without_tau_endpoints():
    assert project(linear_tg("abc"), "abc").omega == 1.0


def test_omega_noisy_or_over_runs():
    # two runs of "a": each enters with 0.5 from a tau start and exits with certainty
    labels = (TAU, "a", "a", TAU)
    R = np.zeros((4, 4))
    R[0, 1] = R[0, 2] = 0.5
    R[1, 3] = R[2, 3] = 1.0
    g = project(TransitionGraph(labels, R, 0, 3), "a")
    assert g.omega == pytest.approx(1 - 0.5 * 0.5)


def test_not_a_model_trace(fixture_tg):
    with pytest.raises(PreconditionError, match="not a model trace"):
        project(fixture_tg, "bb")


def test_omega_range_checked():
    with pytest.raises(PreconditionError):
        WeightedTransitionGraph(linear_tg("a"), 0.0, (("a",),), 1)


def test_weighted_helpers(fixture_tg):
    assert weighted_linear("ab").omega == 1.0
    w = weighted(fixture_tg, 0.5, 0.0, 2)
    assert set(w.traces) == {("a",), ("a", "a"), ("c", "a"), ("c", "b")}
    assert w.horizon == 2
