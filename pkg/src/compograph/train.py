"""Adam and the fixed-iteration training loop."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CompographError, KTooSmall, NumericFailure, ShapeMismatch
from .graphio import Graph
from .model import BASIS_MODES, FIXED_HELMERT, ModelState, NegativeSampler, grad, init_state


@dataclass
class AdamState:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, opt: AdamState) -> None:
    """One in-place Adam update of every array in ``params``."""
    if set(params) != set(grads):
        raise ShapeMismatch(f"parameter names {sorted(params)} != gradient names {sorted(grads)}")
    for k in params:
        if np.shape(params[k]) != np.shape(grads[k]):
            raise ShapeMismatch(f"{k}: parameter {np.shape(params[k])} vs gradient {np.shape(grads[k])}")
    opt.step_count += 1
    t = opt.step_count
    bc1 = 1.0 - opt.beta1**t
    bc2 = 1.0 - opt.beta2**t
    for k, p in params.items():
        g = grads[k]
        if k not in opt.first_moment:
            opt.first_moment[k] = np.zeros_like(p)
            opt.second_moment[k] = np.zeros_like(p)
        m, v = opt.first_moment[k], opt.second_moment[k]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        p -= opt.lr * (m / bc1) / (np.sqrt(v / bc2) + opt.eps)


@dataclass
class TrainConfig:
    K: int = 9
    iterations: int = 5000
    lr: float = 1e-2
    neg_ratio: float = 5.0
    seed: int = 0
    basis_mode: str = FIXED_HELMERT
    log_every: int = 0

    def validate(self) -> "TrainConfig":
        if self.K < 2:
            raise KTooSmall(f"K must be >= 2, got {self.K}")
        if self.iterations <= 0:
            raise CompographError("iterations must be positive")
        if self.lr <= 0 or self.neg_ratio <= 0:
            raise CompographError("lr and neg_ratio must be positive")
        if self.basis_mode not in BASIS_MODES:
            raise CompographError(f"basis_mode must be one of {BASIS_MODES}")
        if self.log_every < 0:
            raise CompographError("log_every must be >= 0")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def fit(graph: Graph, config: TrainConfig, state: ModelState | None = None, log=None) -> ModelState:
    """Train a model on ``graph``; a pure function of ``(graph, config)``.

    Every iteration draws ``neg_ratio * |E|`` fresh non-edge samples, takes
    the analytic gradient of the sampled objective and applies Adam.
    Progress lines ``iter=<n> nll_est=<value>`` go to ``log`` (stderr by
    default) every ``log_every`` iterations.
    """
    config.validate()
    if graph.num_edges == 0:
        raise CompographError("cannot train on a graph without edges")
    if log is None:
        log = sys.stderr
    if state is None:
        state = init_state(graph.num_nodes, config.K, config.basis_mode, config.seed)
    # separate stream so initialisation and sampling do not interleave
    rng = np.random.default_rng([config.seed, 1])
    sampler = NegativeSampler(graph)
    n_neg = int(round(config.neg_ratio * graph.num_edges))
    opt = AdamState(lr=config.lr)
    params = state.params()
    for it in range(1, config.iterations + 1):
        batch = sampler.batch(n_neg, rng)
        g = grad(state, batch)
        if not np.isfinite(g.loss):
            raise NumericFailure(f"objective became non-finite at iteration {it}")
        adam_step(params, g.as_dict(), opt)
        if config.log_every and (it % config.log_every == 0 or it == config.iterations):
            print(f"iter={it} nll_est={g.loss:.6f}", file=log)
    state.iterations += config.iterations
    state.check_finite()
    return state
