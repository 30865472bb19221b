"""Small reference nets used by the tests, the README and the shipped files."""

from __future__ import annotations

from .net import TAU, StochasticWorkflowNet, build_net


def loop_net() -> StochasticWorkflowNet:
    """Net behind the five-node example graph: an optional ``c`` detour,
    a self-looping ``a`` and a ``c b`` shortcut."""
    return build_net(
        [f"p{i}" for i in range(1, 8)],
        [
            ("t_start", TAU),
            ("t_a1", "a", 0.8),
            ("t_c", "c", 0.2),
            ("t_ca", TAU, 0.7),
            ("t_b", "b", 0.3),
            ("t_a2", "a"),
            ("t_loop", "a", 0.5),
            ("t_end", TAU, 0.5),
            ("t_bend", TAU),
        ],
        [
            ("p1", "t_start"), ("t_start", "p2"),
            ("p2", "t_a1"), ("t_a1", "p3"),
            ("p2", "t_c"), ("t_c", "p4"),
            ("p4", "t_ca"), ("t_ca", "p5"),
            ("p4", "t_b"), ("t_b", "p6"),
            ("p5", "t_a2"), ("t_a2", "p3"),
            ("p3", "t_loop"), ("t_loop", "p3"),
            ("p3", "t_end"), ("t_end", "p7"),
            ("p6", "t_bend"), ("t_bend", "p7"),
        ],
        "p1",
        "p7",
    )


def parallel_net() -> StochasticWorkflowNet:
    """``a`` and ``b`` in parallel between a silent split and a silent join."""
    return build_net(
        ["i", "p1", "p2", "p3", "p4", "f"],
        [("split", TAU), ("a", "a"), ("b", "b"), ("join", TAU)],
        [
            ("i", "split"), ("split", "p1"), ("split", "p2"),
            ("p1", "a"), ("a", "p3"),
            ("p2", "b"), ("b", "p4"),
            ("p3", "join"), ("p4", "join"), ("join", "f"),
        ],
        "i",
        "f",
    )


def order_net() -> StochasticWorkflowNet:
    """Order handling: after closing, an order is accepted (0.9) and paid,
    or refused (0.1); both end archived."""
    return build_net(
        ["i", "closed", "accepted", "settled", "f"],
        [
            ("close", "close_order"),
            ("accept", "accept_order", 0.9),
            ("refuse", "refuse_order", 0.1),
            ("pay", "pay_order"),
            ("archive", "archive_order"),
        ],
        [
            ("i", "close"), ("close", "closed"),
            ("closed", "accept"), ("accept", "accepted"),
            ("closed", "refuse"), ("refuse", "settled"),
            ("accepted", "pay"), ("pay", "settled"),
            ("settled", "archive"), ("archive", "f"),
        ],
        "i",
        "f",
    )
