import itertools

import pytest

from probalign.errors import ModelAssumptionError, PreconditionError, StructuralError
from probalign.fixtures import loop_net, order_net, parallel_net
from probalign.net import (
    ESTIMATORS,
    TAU,
    Marking,
    build_net,
    check_bounded_silence,
    check_safe,
    enabled,
    estimate_weights_constant,
    fire,
    is_tau,
    longest_silent_chain,
    reachability_graph,
    register_estimator,
    transition_probability,
)


def conflict_net(weights):
    ts = [(f"t{i}", f"x{i}", w) for i, w in enumerate(weights)]
    arcs = [("i", t[0]) for t in ts] + [(t[0], "f") for t in ts]
    return build_net(["i", "f"], ts, arcs, "i", "f")


def chain_net(labels):
    places = [f"p{i}" for i in range(len(labels) + 1)]
    ts = [(f"t{i}", lab) for i, lab in enumerate(labels)]
    arcs = []
    for i in range(len(labels)):
        arcs += [(places[i], f"t{i}"), (f"t{i}", places[i + 1])]
    return build_net(places, ts, arcs, places[0], places[-1])


class TestStructure:
    def test_tau_is_not_a_task(self):
        assert is_tau(TAU) and not is_tau("tau") and not is_tau("a")

    def test_rejects_arc_into_initial_place(self):
        with pytest.raises(StructuralError, match="initial place"):
            build_net(["i", "f"], [("t", "a")], [("i", "t"), ("t", "i"), ("t", "f")], "i", "f")

    def test_rejects_arc_out_of_final_place(self):
        with pytest.raises(StructuralError, match="final place"):
            build_net(["i", "f"], [("t", "a"), ("u", "b")], [("i", "t"), ("t", "f"), ("f", "u")], "i", "f")

    @pytest.mark.parametrize("w", [0.0, -1.0])
    def test_rejects_non_positive_weight(self, w):
        with pytest.raises(StructuralError, match="weight"):
            conflict_net([1.0, w])

    def test_rejects_place_to_place_arc(self):
        with pytest.raises(StructuralError, match="does not join"):
            build_net(["i", "f"], [("t", "a")], [("i", "f"), ("i", "t"), ("t", "f")], "i", "f")

    def test_marking_identity_is_canonical(self):
        assert Marking.of({"b": 1, "a": 1}) == Marking.of({"a": 1, "b": 1, "c": 0})
        assert hash(Marking.of({"b": 1, "a": 1})) == hash(Marking.of({"a": 1, "b": 1}))


class TestSemantics:
    def test_initial_marking_enables_only_the_first_silent_step(self):
        net = loop_net()
        assert enabled(net, net.initial_marking) == ("t_start",)

    def test_empty_marking_enables_nothing(self):
        assert enabled(loop_net(), Marking()) == ()

    def test_conflict_enables_both(self):
        net = conflict_net([1, 1])
        assert set(enabled(net, net.initial_marking)) == {"t0", "t1"}

    def test_unknown_place_is_structural_error(self):
        with pytest.raises(StructuralError):
            enabled(loop_net(), Marking.of({"nowhere": 1}))

    def test_fire_moves_token(self):
        net = loop_net()
        assert fire(net, net.initial_marking, "t_start") == Marking.of({"p2": 1})

    def test_fire_split_adds_two_tokens(self):
        net = parallel_net()
        m = fire(net, net.initial_marking, "split")
        assert sum(n for _, n in m.counts) == 2

    def test_fire_disabled_raises(self):
        net = loop_net()
        with pytest.raises(PreconditionError):
            fire(net, net.initial_marking, "t_a1")

    def test_fire_returns_unsafe_marking(self):
        # two producers feeding the same place
        net = build_net(
            ["i", "p", "f"],
            [("split", TAU), ("x", "x")],
            [("i", "split"), ("split", "p"), ("p", "x"), ("x", "f")],
            "i",
            "f",
        )
        m = fire(net, Marking.of({"i": 1, "p": 1}), "split")
        assert m["p"] == 2

    def test_order_net_probabilities(self):
        net = order_net()
        m = fire(net, net.initial_marking, "close")
        assert transition_probability(net, m, "accept") == pytest.approx(0.9)
        assert transition_probability(net, m, "refuse") == pytest.approx(0.1)

    def test_single_enabled_has_probability_one(self):
        net = loop_net()
        assert transition_probability(net, net.initial_marking, "t_start") == 1.0

    def test_weights_two_and_six(self):
        net = conflict_net([2, 6])
        m = net.initial_marking
        assert transition_probability(net, m, "t0") == 0.25
        assert transition_probability(net, m, "t1") == 0.75

    def test_probability_of_disabled_raises(self):
        net = loop_net()
        with pytest.raises(PreconditionError):
            transition_probability(net, net.initial_marking, "t_b")


class TestReachability:
    def test_loop_net_has_seven_markings(self):
        rg = reachability_graph(loop_net())
        assert len(rg.markings) == 7
        assert rg.final is not None

    def test_chain_of_one_is_two_nodes(self):
        rg = reachability_graph(chain_net(["a"]))
        assert len(rg.markings) == 2 and len(rg.edges) == 1

    def test_parallel_net_by_hand(self):
        rg = reachability_graph(parallel_net())
        expected = {
            Marking.of({"i": 1}),
            Marking.of({"p1": 1, "p2": 1}),
            Marking.of({"p3": 1, "p2": 1}),
            Marking.of({"p1": 1, "p4": 1}),
            Marking.of({"p3": 1, "p4": 1}),
            Marking.of({"f": 1}),
        }
        assert set(rg.markings) == expected

    @pytest.mark.parametrize("make", [loop_net, parallel_net, order_net])
    def test_outgoing_probabilities_sum_to_one(self, make):
        rg = reachability_graph(make())
        for node, out in enumerate(rg.out_edges):
            if out:
                assert sum(rg.probabilities[k] for k in out) == pytest.approx(1.0, abs=1e-9)

    def test_edge_probability_is_weight_share(self):
        net = loop_net()
        rg = reachability_graph(net)
        w = {t.id: t.weight for t in net.transitions}
        for k, e in enumerate(rg.edges):
            total = sum(w[rg.edges[j].transition] for j in rg.out_edges[e.source])
            assert rg.probabilities[k] == w[e.transition] / total

    def test_deterministic(self):
        a, b = reachability_graph(loop_net()), reachability_graph(loop_net())
        assert a.markings == b.markings and a.edges == b.edges
        assert a.probabilities == b.probabilities

    def test_scaling_a_conflict_is_invisible(self):
        net = loop_net()
        scaled = net.with_weights({"t_a1": 8.0, "t_c": 2.0})
        assert reachability_graph(net).probabilities == pytest.approx(reachability_graph(scaled).probabilities)

    def test_unsafe_net_rejected(self):
        net = build_net(
            ["i", "p", "f"],
            [("split", TAU), ("x", "x"), ("y", "y")],
            [("i", "split"), ("split", "p"), ("p", "x"), ("x", "p"), ("p", "y"), ("y", "f")],
            "i",
            "f",
        )
        # net loops a single token; net2 puts a second token on p
        net2 = build_net(
            ["i", "p", "q", "f"],
            [("split", TAU), ("dup", "d"), ("y", "y")],
            [("i", "split"), ("split", "p"), ("split", "q"), ("q", "dup"), ("dup", "p"), ("p", "y"), ("y", "f")],
            "i",
            "f",
        )
        assert check_safe(reachability_graph(net))
        with pytest.raises(ModelAssumptionError, match="not safe"):
            reachability_graph(net2)
        assert not check_safe(reachability_graph(net2, require_safe=False))

    def test_node_budget(self):
        # a generator that keeps adding tokens is unbounded
        net = build_net(
            ["i", "p", "f"],
            [("go", TAU), ("gen", "g"), ("stop", "s")],
            [("i", "go"), ("go", "p"), ("p", "gen"), ("gen", "p"), ("gen", "f"), ("p", "stop"), ("stop", "f")],
            "i",
            "f",
        )
        with pytest.raises(ModelAssumptionError, match="unbounded or too large"):
            reachability_graph(net, max_nodes=50, require_safe=False)

    def test_empty_net_is_safe(self):
        net = build_net(["i", "f"], [], [], "i", "f")
        assert check_safe(reachability_graph(net))


class TestSilence:
    def test_loop_net_bound_one(self):
        rg = reachability_graph(loop_net())
        assert longest_silent_chain(rg) == 1
        assert check_bounded_silence(rg, 1)

    def test_three_tau_chain(self):
        rg = reachability_graph(chain_net([TAU, TAU, TAU, "a"]))
        assert not check_bounded_silence(rg, 2)
        assert check_bounded_silence(rg, 3)

    def test_tau_cycle_fails_every_bound(self):
        net = build_net(
            ["i", "p", "q", "f"],
            [("in", "a"), ("t1", TAU), ("t2", TAU), ("out", "b")],
            [("i", "in"), ("in", "p"), ("p", "t1"), ("t1", "q"), ("q", "t2"), ("t2", "p"), ("p", "out"), ("out", "f")],
            "i",
            "f",
        )
        rg = reachability_graph(net)
        assert longest_silent_chain(rg) is None
        assert not any(check_bounded_silence(rg, b) for b in (1, 5, 100))

    def test_bound_must_be_positive(self):
        with pytest.raises(PreconditionError):
            check_bounded_silence(reachability_graph(loop_net()), 0)


class TestEstimators:
    @pytest.mark.parametrize("n", [2, 3])
    def test_constant_makes_conflicts_uniform(self, n):
        net = estimate_weights_constant(conflict_net([0.3 + i for i in range(n)]))
        rg = reachability_graph(net)
        assert rg.probabilities == pytest.approx([1 / n] * n)

    def test_constant_on_chain_gives_ones(self):
        rg = reachability_graph(estimate_weights_constant(chain_net(["a", "b", "c"])))
        assert all(p == 1.0 for p in rg.probabilities)

    def test_registry_is_pluggable(self):
        register_estimator("double", lambda net: net.with_weights({t.id: 2 * t.weight for t in net.transitions}))
        try:
            net = ESTIMATORS["double"](conflict_net([1, 3]))
            assert [t.weight for t in net.transitions] == [2, 6]
        finally:
            del ESTIMATORS["double"]

    def test_all_pairs_of_weights_scale_free(self):
        for a, b in itertools.product([0.5, 1, 7], repeat=2):
            rg = reachability_graph(conflict_net([a, b]))
            assert rg.probabilities == pytest.approx([a / (a + b), b / (a + b)])
