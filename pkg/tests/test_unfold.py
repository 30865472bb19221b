import numpy as np
import pytest

from conftest import EXAMPLE_TRACES
from oracles import trace_masses
from probalign.errors import ModelAssumptionError, PreconditionError
from probalign.graph import TransitionGraph, linear_tg, tau_closure, tg_from_reachability
from probalign.fixtures import loop_net
from probalign.net import TAU, reachability_graph
from probalign.unfold import ModelTrace, runs_of, trace_probability, unfold


def diamond():
    # two runs spell "a b": via A1 (0.3) and via A2 (0.2); a third spells "c"
    labels = (TAU, "a", "a", "b", "c", TAU)
    R = np.zeros((6, 6))
    R[0, 1], R[0, 2], R[0, 4] = 0.3, 0.2, 0.5
    R[1, 3] = R[2, 3] = R[3, 5] = R[4, 5] = 1.0
    return TransitionGraph(labels, R, 0, 5)


class TestUnfold:
    def test_example_traces(self, fixture_tg):
        got = {m.labels: m.probability for m in unfold(fixture_tg, 0, 4)}
        assert set(got) == set(EXAMPLE_TRACES)
        for t, p in EXAMPLE_TRACES.items():
            assert got[t] == pytest.approx(p, abs=1e-15)

    def test_listed_mass(self, fixture_tg):
        # .4 + .2 + .1 + .07 + .06 + .05 + .035 + .0175
        assert sum(m.probability for m in unfold(fixture_tg, 0, 4)) == pytest.approx(0.9325, abs=1e-12)

    def test_threshold(self, fixture_tg):
        got = [m.labels for m in unfold(fixture_tg, 0.06, 4)]
        assert sorted(got) == sorted([("a",), ("a", "a"), ("a", "a", "a"), ("c", "a"), ("c", "b")])

    def test_sorted_by_probability_then_labels(self, fixture_tg):
        out = unfold(fixture_tg, 0, 4)
        keys = [(-m.probability, m.labels) for m in out]
        assert keys == sorted(keys)

    def test_single_path(self):
        assert unfold(linear_tg("abc"), 0, None) == [ModelTrace(("a", "b", "c"), 1.0)]

    def test_infinite_unfolding_refused(self, fixture_tg):
        with pytest.raises(PreconditionError, match="infinite unfolding"):
            unfold(fixture_tg, 0, None)

    def test_threshold_only_terminates(self, fixture_tg):
        out = unfold(fixture_tg, 1e-3, None)
        assert all(m.probability >= 1e-3 for m in out)
        assert ("a",) * 9 in {m.labels for m in out}

    @pytest.mark.parametrize("rho", [0.0, 0.01, 0.03, 0.05, 0.2])
    def test_pruning_matches_filter(self, fixture_tg, rho):
        full = unfold(fixture_tg, 0, 6)
        assert unfold(fixture_tg, rho, 6) == [m for m in full if m.probability >= rho]

    def test_merges_runs(self):
        got = {m.labels: m.probability for m in unfold(diamond(), 0, None)}
        assert got == pytest.approx({("a", "b"): 0.5, ("c",): 0.5})

    def test_pruning_sound_with_split_runs(self):
        # each run of "a b" alone is below 0.4, their sum is not
        got = [m.labels for m in unfold(diamond(), 0.4, None)]
        assert ("a", "b") in got

    def test_raw_and_closed_agree(self):
        raw = tg_from_reachability(reachability_graph(loop_net()))
        closed = tau_closure(raw)
        a = {m.labels: m.probability for m in unfold(raw, 0, 5)}
        b = {m.labels: m.probability for m in unfold(closed, 0, 5)}
        assert a.keys() == b.keys()
        for t in a:
            assert a[t] == pytest.approx(b[t], abs=1e-12)

    def test_against_path_enumeration(self, fixture_tg):
        ref = trace_masses(fixture_tg, 5)
        got = {m.labels: m.probability for m in unfold(fixture_tg, 0, 5)}
        assert got.keys() == {t for t, p in ref.items() if p > 0}
        for t in got:
            assert got[t] == pytest.approx(ref[t], abs=1e-15)

    def test_mass_bound(self, fixture_tg):
        prev = 0.0
        for n in range(0, 33):
            total = sum(m.probability for m in unfold(fixture_tg, 0, n))
            assert prev <= total <= 1.0 + 1e-12
            prev = total
        assert prev >= 0.999


class TestTraceProbability:
    def test_caa(self, fixture_tg):
        assert trace_probability(fixture_tg, "caa") == pytest.approx(0.035)

    def test_not_a_model_trace(self, fixture_tg):
        assert trace_probability(fixture_tg, "caba") == 0.0

    def test_diamond_sums_runs(self):
        assert trace_probability(diamond(), "ab") == pytest.approx(0.5)

    def test_bit_identical_to_unfold(self, fixture_tg):
        for m in unfold(fixture_tg, 0, 8):
            assert trace_probability(fixture_tg, m.labels) == m.probability

    def test_tau_cycle_rejected(self):
        labels = (TAU, "a", TAU, TAU, TAU)
        R = np.zeros((5, 5))
        R[0, 1] = R[1, 2] = R[2, 3] = 1.0
        R[3, 2] = R[3, 4] = 0.5
        with pytest.raises(ModelAssumptionError, match="tau-only cycle"):
            trace_probability(TransitionGraph(labels, R, 0, 4), "a")


class TestRuns:
    def test_a(self, fixture_tg):
        runs = runs_of(fixture_tg, "a")
        assert [r.nodes for r in runs] == [(0, 1, 4)]
        assert runs[0].probability == pytest.approx(0.4)

    def test_aa_uses_the_loop(self, fixture_tg):
        runs = runs_of(fixture_tg, "aa")
        assert [r.nodes for r in runs] == [(0, 1, 1, 4)]
        assert runs[0].probability == pytest.approx(0.2)

    def test_non_trace(self, fixture_tg):
        assert runs_of(fixture_tg, "bb") == []

    def test_diamond_lists_each_run_once(self):
        runs = runs_of(diamond(), "ab")
        assert sorted(r.nodes for r in runs) == [(0, 1, 3, 5), (0, 2, 3, 5)]
        assert sum(r.probability for r in runs) == pytest.approx(0.5)

    def test_silence_bound(self):
        labels = (TAU, "a", TAU, TAU, TAU, "b", TAU)
        R = np.zeros((7, 7))
        for i in range(6):
            R[i, i + 1] = 1.0
        tg = TransitionGraph(labels, R, 0, 6)
        assert len(runs_of(tg, "ab", b=3)) == 1
        with pytest.raises(ModelAssumptionError, match="consecutive tau nodes: n2 -> n3 -> n4"):
            runs_of(tg, "ab", b=2)
