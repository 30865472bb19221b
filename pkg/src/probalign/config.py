"""Session settings and the model-loading pipeline shared by every command."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .embedding import DEFAULT_DECAY, DEFAULT_TF, EmbeddingConfig
from .errors import ModelAssumptionError, UsageError
from .formats import parse_pnml, parse_tg
from .graph import TransitionGraph, tau_closure, tg_from_reachability
from .net import (
    DEFAULT_NODE_BUDGET,
    DEFAULT_SILENCE_BOUND,
    ESTIMATORS,
    check_bounded_silence,
    longest_silent_chain,
    reachability_graph,
)
from .ranking import DEFAULT_C, DEFAULT_K
from .unfold import DEFAULT_RHO

FORMATS = ("pnml", "tg")


@dataclass(frozen=True)
class SessionConfig:
    model: Path | None = None
    format: str | None = None
    rho: float = DEFAULT_RHO
    n_max: int | None = None
    c: int = DEFAULT_C
    k: int = DEFAULT_K
    decay: float = DEFAULT_DECAY
    tf: float = DEFAULT_TF
    eps: int = 1
    nu: int = 1
    horizon: int | None = None
    tf_exponent: str = "paths"
    index: str = "kd"
    b: int = DEFAULT_SILENCE_BOUND
    estimator: str = "asgiven"
    max_nodes: int = DEFAULT_NODE_BUDGET

    def embedding(self) -> EmbeddingConfig:
        return EmbeddingConfig(self.decay, self.tf, self.eps, self.nu, self.horizon, self.tf_exponent)

    def model_format(self) -> str:
        if self.format is not None:
            return self.format
        if self.model is not None and self.model.suffix.lower() in (".pnml", ".xml"):
            return "pnml"
        return "tg"


def load_model(cfg: SessionConfig) -> TransitionGraph:
    """Read the model file and return its tau-closed transition graph.

    Nets go through the weight estimator, the reachability graph (safe nets
    only) and the bounded-silence check before conversion.
    """
    if cfg.model is None:
        raise UsageError("no model given")
    try:
        data = cfg.model.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read model: {exc}") from None
    if cfg.model_format() == "tg":
        tg = parse_tg(data.decode("utf-8"))
    else:
        if cfg.estimator not in ESTIMATORS:
            raise UsageError(f"unknown estimator {cfg.estimator!r}; choose from {sorted(ESTIMATORS)}")
        net = ESTIMATORS[cfg.estimator](parse_pnml(data))
        rg = reachability_graph(net, max_nodes=cfg.max_nodes)
        if not check_bounded_silence(rg, cfg.b):
            chain = longest_silent_chain(rg)
            detail = "a cycle of silent transitions" if chain is None else f"{chain} silent steps in a row"
            raise ModelAssumptionError(f"silence bound {cfg.b} exceeded: {detail}")
        tg = tg_from_reachability(rg)
    return tau_closure(tg) if tg.interior_tau() else tg
