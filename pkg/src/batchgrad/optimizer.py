"""The batch-updating iteration ``theta <- theta + alpha_t phi`` and momentum baselines.

Momentum methods receive the sampled direction ``phi`` where they would
normally use ``-grad J``.  By default they run at the constant learning
rate ``alpha0`` (``momentum_step="constant"``); ``"schedule"`` feeds them
``alpha_t`` instead.  NAG samples its direction at the look-ahead point and
takes its momentum from Nesterov's ``lambda`` recursion.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .directions import DirectionSpec, sample_direction
from .noise import NoiseModel, rng_stream
from .objectives import Objective, make_objective
from .schedules import Schedule, alpha, increment_c, verify_conditions

__all__ = [
    "ALGORITHMS",
    "RunConfig",
    "RunTrace",
    "MomentumState",
    "ConditionRefused",
    "run",
    "check_run_conditions",
    "initial_point",
    "step_heavy_ball",
    "step_nag",
    "nag_lookahead",
    "step_adam",
    "step_nadam",
    "step_rmsprop",
    "TRACE_HEADER",
]

ALGORITHMS = ("batch_update", "heavy_ball", "nag", "adam", "nadam", "rmsprop")
TRACE_HEADER = ("t", "J", "grad_norm", "dist", "updated", "fn_evals", "grad_evals")

DEFAULT_HYPER = {
    "heavy_ball": {"beta": 0.9},
    "nag": {},
    "adam": {"beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
    "nadam": {"beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
    "rmsprop": {"decay": 0.9, "eps": 1e-8},
    "batch_update": {},
}

DIVERGENCE_FACTOR = 1e12


class ConditionRefused(ValueError):
    """The schedule violates the step-size conditions of the chosen options."""

    def __init__(self, violated, report):
        super().__init__("schedule refused: " + ", ".join(violated))
        self.violated = violated
        self.report = report


@dataclass
class RunConfig:
    objective: dict
    direction: DirectionSpec
    schedule: Schedule = field(default_factory=Schedule)
    algorithm: str = "batch_update"
    horizon: int = 1000
    seed: int = 0
    theta0: Union[str, list, None] = "ones"
    record_every: int = 100
    momentum_step: str = "constant"
    hyper: dict = field(default_factory=dict)
    override_conditions: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.momentum_step not in ("constant", "schedule"):
            raise ValueError(f"momentum_step must be 'constant' or 'schedule'")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be positive")

    def hyperparameters(self) -> dict:
        return {**DEFAULT_HYPER[self.algorithm], **self.hyper}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["direction"] = self.direction.to_dict()
        out["schedule"] = self.schedule.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        dspec = dict(data.pop("direction"))
        noise = dspec.pop("noise", None) or {}
        dspec["noise"] = NoiseModel.from_snr(noise.get("snr_db")) \
            if noise.get("kind", "none") != "none" else NoiseModel()
        data["direction"] = DirectionSpec(**dspec)
        data["schedule"] = Schedule(**data.get("schedule", {}))
        return cls(**data)


@dataclass
class RunTrace:
    """Recorded rows of one run; columns follow :data:`TRACE_HEADER`."""

    t: np.ndarray
    J: np.ndarray
    grad_norm: np.ndarray
    dist: np.ndarray
    updated: np.ndarray
    fn_evals: np.ndarray
    grad_evals: np.ndarray
    status: str = "completed"
    theta_final: Optional[np.ndarray] = None
    config: Optional[RunConfig] = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def rows(self):
        return list(zip(*(getattr(self, c).tolist() for c in TRACE_HEADER)))

    def to_csv(self, path) -> None:
        path = Path(path)
        lines = [",".join(TRACE_HEADER)]
        for t, J, g, d, u, fe, ge in self.rows:
            lines.append(f"{t},{J!r},{g!r},{d!r},{u},{fe},{ge}")
        path.write_text("\n".join(lines) + "\n")

    def sidecar(self) -> dict:
        return {
            "config": None if self.config is None else self.config.to_dict(),
            "status": self.status,
            "rows": len(self),
            **self.meta,
        }

    def write(self, csv_path, json_path=None) -> None:
        self.to_csv(csv_path)
        json_path = Path(csv_path).with_suffix(".json") if json_path is None else json_path
        Path(json_path).write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True))

    @classmethod
    def from_csv(cls, path) -> "RunTrace":
        data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
        data = np.atleast_1d(data)
        cols = {name: data[name] for name in TRACE_HEADER}
        for name in ("t", "updated", "fn_evals", "grad_evals"):
            cols[name] = cols[name].astype(np.int64)
        meta = {}
        side = Path(path).with_suffix(".json")
        status = "completed"
        if side.exists():
            meta = json.loads(side.read_text())
            status = meta.get("status", status)
        return cls(**cols, status=status, meta=meta)


@dataclass
class MomentumState:
    theta: np.ndarray
    t: int = 0
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    prev: Optional[np.ndarray] = None
    lam: float = 1.0

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros_like(self.theta)
        if self.v is None:
            self.v = np.zeros_like(self.theta)
        if self.prev is None:
            self.prev = self.theta.copy()


def step_heavy_ball(state: MomentumState, direction, lr: float, hyper: dict) -> MomentumState:
    # velocity form of theta_{t+1} = theta_t + lr d + beta (theta_t - theta_{t-1})
    state.m = hyper.get("beta", 0.9) * state.m + lr * direction
    state.theta = state.theta + state.m
    state.t += 1
    return state


def _nag_next_lambda(lam: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * lam * lam))


def nag_lookahead(state: MomentumState) -> np.ndarray:
    """Point at which NAG samples its next direction."""
    mu = (state.lam - 1.0) / _nag_next_lambda(state.lam)
    return state.theta + mu * (state.theta - state.prev)


def step_nag(state: MomentumState, direction, lr: float, hyper: dict) -> MomentumState:
    """``direction`` must have been sampled at :func:`nag_lookahead`."""
    y = nag_lookahead(state)
    state.prev = state.theta
    state.theta = y + lr * direction
    state.lam = _nag_next_lambda(state.lam)
    state.t += 1
    return state


def _adam_moments(state, direction, hyper):
    g = -direction
    b1, b2 = hyper.get("beta1", 0.9), hyper.get("beta2", 0.999)
    state.t += 1
    state.m = b1 * state.m + (1.0 - b1) * g
    state.v = b2 * state.v + (1.0 - b2) * g * g
    m_hat = state.m / (1.0 - b1 ** state.t)
    v_hat = state.v / (1.0 - b2 ** state.t)
    return g, m_hat, v_hat


def step_adam(state: MomentumState, direction, lr: float, hyper: dict) -> MomentumState:
    _, m_hat, v_hat = _adam_moments(state, direction, hyper)
    state.theta = state.theta - lr * m_hat / (np.sqrt(v_hat) + hyper.get("eps", 1e-8))
    return state


def step_nadam(state: MomentumState, direction, lr: float, hyper: dict) -> MomentumState:
    g, m_hat, v_hat = _adam_moments(state, direction, hyper)
    b1 = hyper.get("beta1", 0.9)
    lookahead = b1 * m_hat + (1.0 - b1) * g / (1.0 - b1 ** state.t)
    state.theta = state.theta - lr * lookahead / (np.sqrt(v_hat) + hyper.get("eps", 1e-8))
    return state


def step_rmsprop(state: MomentumState, direction, lr: float, hyper: dict) -> MomentumState:
    g = -direction
    rho = hyper.get("decay", 0.9)
    state.v = rho * state.v + (1.0 - rho) * g * g
    state.theta = state.theta - lr * g / (np.sqrt(state.v) + hyper.get("eps", 1e-8))
    state.t += 1
    return state


_STEPS = {
    "heavy_ball": step_heavy_ball,
    "nag": step_nag,
    "adam": step_adam,
    "nadam": step_nadam,
    "rmsprop": step_rmsprop,
}


def initial_point(spec, d: int) -> np.ndarray:
    """``"ones"`` gives the all-ones vector (norm sqrt(d)); ``"zeros"`` the origin;
    a sequence is used as is."""
    if spec is None or spec == "ones":
        return np.ones(d)
    if spec == "zeros":
        return np.zeros(d)
    theta = np.array(spec, dtype=float).reshape(-1)
    if theta.size != d:
        raise ValueError(f"theta0 has {theta.size} entries, expected {d}")
    return theta


def check_run_conditions(config: RunConfig):
    """Return ``(violated, report)`` for the config's schedule and options."""
    m = math.sqrt(config.direction.noise.m_sq)
    report = verify_conditions(config.schedule, m_constant=m, horizon=1000)
    if config.direction.approximate:
        verdict, name = report.blum, "Blum"
    else:
        verdict, name = report.robbins_monro, "Robbins-Monro"
    violated = [] if verdict == "holds" else [f"{name} conditions {verdict}"]
    return violated, report


def run(config: RunConfig, obj: Optional[Objective] = None) -> RunTrace:
    """Execute one run and return its trace.

    Divergence is not an exception: the trace stops early with status
    ``"diverged"`` (J above ``1e12 (1 + |J(theta0)|)`` at a recorded step) or
    ``"nan"`` (a non-finite iterate).
    """
    if obj is None:
        obj = make_objective(config.objective)
    theta = initial_point(config.theta0, obj.dim)
    if not np.all(np.isfinite(theta)):
        raise ValueError("invalid start: theta0 has non-finite entries")
    spec = config.direction
    spec.check_dim(obj.dim)
    if not config.override_conditions:
        violated, report = check_run_conditions(config)
        if violated:
            raise ConditionRefused(violated, report)

    rng = rng_stream(config.seed, 0)
    sched = config.schedule
    hyper = config.hyperparameters()
    algo = config.algorithm
    step = _STEPS.get(algo)
    approx = spec.approximate
    T = int(config.horizon)
    every = int(config.record_every)

    cols = {name: [] for name in TRACE_HEADER}
    fn_evals = grad_evals = 0
    J0 = obj.evaluate(theta)
    threshold = DIVERGENCE_FACTOR * (1.0 + abs(J0))

    def record(t, th, updated):
        J = obj.evaluate(th)
        g = obj.gradient(th)
        dist = obj.distance_to_minimizers(th)
        cols["t"].append(t)
        cols["J"].append(J)
        cols["grad_norm"].append(float(np.linalg.norm(g)))
        cols["dist"].append(math.nan if dist is None else dist)
        cols["updated"].append(updated)
        cols["fn_evals"].append(fn_evals)
        cols["grad_evals"].append(grad_evals)
        return J

    record(0, theta, 0)
    status = "completed"
    state = MomentumState(theta.copy()) if step is not None else None
    lr_const = sched.alpha0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            a_t = alpha(sched, t)
            c_t = increment_c(sched, t) if approx else None
            if state is None:
                sample = sample_direction(spec, obj, theta, c_t, rng)
                theta = theta + a_t * sample.phi
            else:
                lr = lr_const if config.momentum_step == "constant" else a_t
                at = nag_lookahead(state) if algo == "nag" else state.theta
                sample = sample_direction(spec, obj, at, c_t, rng)
                state = step(state, sample.phi, lr, hyper)
                theta = state.theta
            fn_evals += sample.fn_evals
            grad_evals += sample.grad_evals
            if not np.isfinite(theta).all():
                record(t + 1, theta, sample.updated_coords.size)
                status = "nan"
                break
            if (t + 1) % every == 0 or t + 1 == T:
                J = record(t + 1, theta, sample.updated_coords.size)
                if not math.isfinite(J):
                    status = "nan"
                    break
                if J > threshold:
                    status = "diverged"
                    break

    trace = RunTrace(
        t=np.asarray(cols["t"], dtype=np.int64),
        J=np.asarray(cols["J"], dtype=float),
        grad_norm=np.asarray(cols["grad_norm"], dtype=float),
        dist=np.asarray(cols["dist"], dtype=float),
        updated=np.asarray(cols["updated"], dtype=np.int64),
        fn_evals=np.asarray(cols["fn_evals"], dtype=np.int64),
        grad_evals=np.asarray(cols["grad_evals"], dtype=np.int64),
        status=status,
        theta_final=theta,
        config=config,
        meta={"J0": J0, "theta0": config.theta0 if isinstance(config.theta0, str)
              else "explicit", "theta0_norm": float(np.linalg.norm(initial_point(config.theta0, obj.dim)))},
    )
    return trace
