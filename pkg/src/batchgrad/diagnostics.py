"""Empirical checks of the search-direction and convergence machinery.

Conditional moments of ``phi`` are estimated by freezing ``theta`` and
resampling the direction, since all randomness in ``phi`` is drawn after
``theta`` is fixed.

Variance normalization
----------------------
``E||zeta||^2`` splits into a mask part ``a ||g||^2`` and a noise part
``k M^2 (1 + ||g||^2)``.  :class:`MomentEstimate` reports

* ``d2_ratio = E||zeta||^2 / (1 + ||g||^2)``, the ratio the variance
  condition bounds;
* ``sigma_sq_hat = E||zeta||^2 / (||g||^2 + [noisy])``, which removes the
  gradient scale.  Without noise the ``1`` is dropped, so the estimate equals
  the mask coefficient ``a`` at every ``theta``; with noise it is the variance-condition
  ratio.  Either way ``sigma_sq_hat <= predicted_sigma_sq``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .directions import (
    DirectionSpec,
    option2,
    option3,
    option4,
    predicted_bias,
    predicted_sigma_sq,
    sample_directions,
)
from .noise import NO_NOISE

__all__ = [
    "MomentEstimate",
    "MomentAccumulator",
    "estimate_moments",
    "check_d1_d2",
    "exact_moments_by_enumeration",
    "RSProcess",
    "make_rs_process",
    "simulate_rs",
    "rs_guard",
    "check_rs_conclusions",
    "convergence_metrics",
]


class MomentAccumulator:
    """Streaming first/second moments of vector draws.

    Sums are taken about a fixed shift vector, so partial accumulators
    combine by plain addition (order does not matter).
    """

    def __init__(self, shift: np.ndarray):
        self.shift = np.asarray(shift, dtype=float)
        self.n = 0
        self.s1 = np.zeros_like(self.shift)
        self.s2 = np.zeros_like(self.shift)
        self.q2 = 0.0  # sum of ||x - shift||^4

    def add(self, rows: np.ndarray) -> "MomentAccumulator":
        x = np.asarray(rows, dtype=float) - self.shift
        self.n += x.shape[0]
        self.s1 += x.sum(axis=0)
        sq = x * x
        self.s2 += sq.sum(axis=0)
        self.q2 += float(np.sum(sq.sum(axis=1) ** 2))
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if not np.array_equal(self.shift, other.shift):
            raise ValueError("accumulators must share a shift")
        out = MomentAccumulator(self.shift)
        out.n = self.n + other.n
        out.s1 = self.s1 + other.s1
        out.s2 = self.s2 + other.s2
        out.q2 = self.q2 + other.q2
        return out

    @property
    def mean(self) -> np.ndarray:
        return self.shift + self.s1 / self.n

    @property
    def variance(self) -> float:
        """Unbiased estimate of ``E||x - E x||^2``."""
        if self.n < 2:
            return 0.0
        m = self.s1 / self.n
        return max(float(np.sum(self.s2 - self.n * m * m)) / (self.n - 1), 0.0)

    @property
    def variance_se(self) -> float:
        m2 = float(np.sum(self.s2)) / self.n
        m4 = self.q2 / self.n
        return math.sqrt(max(m4 - m2 * m2, 0.0) / self.n)


@dataclass
class MomentEstimate:
    bias_norm: float
    sigma_sq_hat: float
    n_samples: int
    bias_se: float
    sigma_se: float
    variance: float
    variance_se: float
    d2_ratio: float
    grad_norm_sq: float
    mean: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "mean"}
        return out


def estimate_moments(spec: DirectionSpec, obj, theta, c_t: Optional[float], n_samples: int,
                     rng, chunk: int = 20_000) -> MomentEstimate:
    """Monte-Carlo bias and variance of ``phi`` at a fixed ``theta``."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    theta = np.asarray(theta, dtype=float)
    g = obj.gradient(theta)
    gn = float(g @ g)
    acc = MomentAccumulator(-g)
    left = int(n_samples)
    while left > 0:
        k = min(chunk, left)
        acc.add(sample_directions(spec, obj, theta, c_t, k, rng))
        left -= k
    var, var_se = acc.variance, acc.variance_se
    mean = acc.mean
    bias = float(np.linalg.norm(mean + g))
    bias_se = math.sqrt(var / acc.n)
    norm = gn + (0.0 if spec.noise.kind == "none" else 1.0)
    if norm > 0:
        sigma, sigma_se = var / norm, var_se / norm
    else:
        sigma, sigma_se = (0.0, 0.0) if var == 0 else (math.inf, math.inf)
    return MomentEstimate(
        bias_norm=bias, sigma_sq_hat=sigma, n_samples=acc.n, bias_se=bias_se,
        sigma_se=sigma_se, variance=var, variance_se=var_se,
        d2_ratio=var / (1.0 + gn), grad_norm_sq=gn, mean=mean,
    )


def check_d1_d2(spec: DirectionSpec, obj, thetas: Iterable, c_t: Optional[float],
                tol: float = 0.05, n_samples: int = 20_000, rng=None) -> dict:
    """Compare estimated bias and variance with their predicted bounds at each theta."""
    rng = np.random.default_rng(0) if rng is None else rng
    d = obj.dim
    L = 0.5 * obj.lipschitz_2L
    b_bound = predicted_bias(spec.option, d, L, c_t or 0.0)
    s_bound = predicted_sigma_sq(spec.option, d, spec.n_coords, spec.rate_rho,
                                 spec.noise.m_sq, c_t)
    entries = []
    for theta in thetas:
        est = estimate_moments(spec, obj, theta, c_t, n_samples, rng)
        d1 = est.bias_norm <= b_bound * (1 + tol) + 4 * est.bias_se
        d2 = est.sigma_sq_hat <= s_bound * (1 + tol) + 4 * est.sigma_se
        entries.append({
            "bias": est.bias_norm, "bias_se": est.bias_se, "bias_bound": b_bound,
            "sigma_sq_hat": est.sigma_sq_hat, "sigma_se": est.sigma_se,
            "sigma_bound": s_bound, "d1": bool(d1), "d2": bool(d2),
        })
    if not entries:
        raise ValueError("theta list must be non-empty")
    return {
        "option": spec.option,
        "passed": all(e["d1"] and e["d2"] for e in entries),
        "entries": entries,
    }


def exact_moments_by_enumeration(spec: DirectionSpec, obj, theta):
    """Exact noiseless mean and ``E||phi - E phi||^2`` over every mask outcome.

    Supports O1-O4 (O3 enumerates all ``d^N`` ordered draws, O4 all ``2^d``
    masks).  Outcomes are produced by the option functions themselves with
    the random choice pinned.
    """
    d = obj.dim
    theta = np.asarray(theta, dtype=float)
    outcomes, weights = [], []
    if spec.option == "O1":
        g = obj.gradient(theta)
        return -g, 0.0
    if spec.option == "O2":
        for k in range(d):
            outcomes.append(option2(obj, theta, NO_NOISE, None, kappa=k).phi)
            weights.append(1.0 / d)
    elif spec.option == "O3":
        N = spec.n_coords
        for draw in itertools.product(range(d), repeat=N):
            outcomes.append(option3(obj, theta, N, NO_NOISE, None, indices=np.array(draw)).phi)
            weights.append(d ** -N)
    elif spec.option == "O4":
        rho = spec.rate_rho
        for bits in itertools.product((False, True), repeat=d):
            mask = np.array(bits)
            k = int(mask.sum())
            outcomes.append(option4(obj, theta, rho, NO_NOISE, None, mask=mask).phi)
            weights.append(rho ** k * (1.0 - rho) ** (d - k))
    else:
        raise ValueError(f"enumeration not available for {spec.option}")
    X = np.array(outcomes)
    w = np.array(weights)
    mean = w @ X
    var = float(w @ np.sum((X - mean) ** 2, axis=1))
    return mean, var


# --- almost-supermartingale processes -------------------------------------


@dataclass
class RSProcess:
    """Ensemble of non-negative processes with
    ``E(z_{t+1} | F_t) = (1 + delta_t) z_t + gamma_t - psi_t``.

    Each step draws ``z_{t+1} = ((1 + delta_t) z_t - psi_t) U_t + gamma_t W_t``
    with independent ``U_t ~ Uniform[1 - spread, 1 + spread]`` and
    ``W_t ~ Exponential(1)``, both of mean one.  ``z`` has shape
    ``(n_paths, length + 1)``; ``psi`` has shape ``(n_paths, length)``.
    """

    z: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    psi: np.ndarray
    kind: str = "custom"
    spread: float = 0.5

    @property
    def length(self) -> int:
        return self.delta.size

    @property
    def n_paths(self) -> int:
        return self.z.shape[0]

    def conditional_mean(self, path: int, t: int) -> float:
        return (1.0 + self.delta[t]) * self.z[path, t] + self.gamma[t] - self.psi[path, t]

    def draw_next(self, path: int, t: int, n: int, rng) -> np.ndarray:
        """``n`` fresh draws of ``z_{t+1}`` given ``z_t`` on one path."""
        base = (1.0 + self.delta[t]) * self.z[path, t] - self.psi[path, t]
        u = rng.uniform(1.0 - self.spread, 1.0 + self.spread, n)
        return base * u + self.gamma[t] * rng.exponential(1.0, n)


def simulate_rs(delta, gamma, psi=0.0, n_paths: int = 1, seed: int = 0, z0: float = 1.0,
                spread: float = 0.5, kind: str = "custom") -> RSProcess:
    """Generate paths satisfying the almost-supermartingale recursion.

    ``psi`` is either a float (the adapted choice ``psi_t = psi * z_t`` with
    ``0 <= psi <= 1``) or a deterministic array of length ``len(delta)``.  A
    deterministic ``psi`` larger than ``(1 + delta_t) z_t`` on some path
    cannot be removed from a non-negative process, so such input (typically
    a divergent ``sum psi``) is rejected.
    """
    delta = np.asarray(delta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    T = delta.size
    if gamma.size != T:
        raise ValueError("delta and gamma must have equal length")
    if np.any(delta < 0) or np.any(gamma < 0):
        raise ValueError("delta and gamma must be non-negative")
    if not 0.0 <= spread < 1.0:
        raise ValueError("spread must lie in [0, 1)")
    adaptive = np.isscalar(psi)
    if adaptive:
        if not 0.0 <= psi <= 1.0:
            raise ValueError("adaptive psi fraction must lie in [0, 1]")
    else:
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (T,) or np.any(psi < 0):
            raise ValueError("deterministic psi must be a non-negative array like delta")
    rng = np.random.default_rng(seed)
    z = np.empty((n_paths, T + 1))
    P = np.empty((n_paths, T))
    z[:, 0] = z0
    for t in range(T):
        zt = z[:, t]
        p = psi * zt if adaptive else np.full(n_paths, psi[t])
        base = (1.0 + delta[t]) * zt - p
        if np.any(base < 0):
            raise ValueError(
                f"psi exceeds (1 + delta) z at t={t}: the process would turn negative "
                "(is sum psi divergent?)")
        P[:, t] = p
        u = rng.uniform(1.0 - spread, 1.0 + spread, n_paths) if spread > 0 else 1.0
        z[:, t + 1] = base * u + gamma[t] * rng.exponential(1.0, n_paths)
    return RSProcess(z, delta, gamma, P, kind=kind, spread=spread)


def make_rs_process(kind: str, length: int, seed: int, n_paths: int = 1) -> RSProcess:
    """Synthetic process of a given summability regime.

    * ``contracting``: ``delta_t = gamma_t = (t+1)^-2`` and ``psi_t = 0.1 z_t``
    * ``marginal``: ``delta_t = gamma_t = 1 / ((t+2) log(t+2)^2)``, summable
      but only barely, ``psi = 0``
    * ``violating``: ``gamma_t = 1/(t+1)`` (not summable), ``delta = psi = 0``.
      No multiplicative spread here: a mean-one random factor compounds
      towards zero (``E log U < 0``) and would mask the drift of ``sum gamma``.
    """
    if length < 1000:
        raise ValueError("length must be at least 1000")
    t = np.arange(length, dtype=float)
    spread = 0.5
    if kind == "contracting":
        delta = gamma = (t + 1.0) ** -2
        psi = 0.1
    elif kind == "marginal":
        delta = gamma = 1.0 / ((t + 2.0) * np.log(t + 2.0) ** 2)
        psi = 0.0
    elif kind == "violating":
        delta = np.zeros(length)
        gamma = 1.0 / (t + 1.0)
        psi = 0.0
        spread = 0.0
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return simulate_rs(delta, gamma, psi, n_paths=n_paths, seed=seed, kind=kind, spread=spread)


def rs_guard(proc: RSProcess, n_times: int = 10, n_resamples: int = 1000, seed: int = 0,
             n_se: float = 4.0) -> dict:
    """Re-check the conditional-mean inequality by resampling single steps."""
    rng = np.random.default_rng(seed)
    checks = []
    for _ in range(n_times):
        path = int(rng.integers(proc.n_paths))
        t = int(rng.integers(proc.length))
        draws = proc.draw_next(path, t, n_resamples, rng)
        mean = float(draws.mean())
        se = float(draws.std(ddof=1) / math.sqrt(n_resamples))
        bound = (1.0 + proc.delta[t]) * proc.z[path, t] + proc.gamma[t] - proc.psi[path, t]
        checks.append({"path": path, "t": t, "mean": mean, "se": se, "bound": bound,
                       "ok": bool(mean <= bound + n_se * se + 1e-300)})
    return {"passed": all(c["ok"] for c in checks), "checks": checks}


def check_rs_conclusions(proc: RSProcess, eps: float = 1e-3, bound_factor: float = 100.0,
                         plateau_tol: float = 0.01, tolerance: float = 0.01) -> dict:
    """Fractions of paths that look bounded, Cauchy, and with a finite psi-sum.

    * bounded: ``sup_t z_t <= bound_factor * (z_0 prod(1 + delta) + sum gamma)``
    * Cauchy tail: ``|z_T - z_{T/2}| < eps``
    * psi plateau: the second half of the horizon adds at most
      ``plateau_tol`` of the total ``sum psi``
    ``passed`` is only meaningful for the contracting regime: every fraction
    must be at least ``1 - tolerance``.
    """
    if proc.n_paths < 1000:
        raise ValueError("need an ensemble of at least 1000 paths")
    T = proc.length
    half = T // 2
    scale = proc.z[:, 0] * np.prod(1.0 + proc.delta) + proc.gamma.sum()
    bounded = proc.z.max(axis=1) <= bound_factor * scale
    cauchy = np.abs(proc.z[:, -1] - proc.z[:, half]) < eps
    cum = proc.psi.sum(axis=1)
    tail = proc.psi[:, half:].sum(axis=1)
    plateau = tail <= plateau_tol * np.where(cum > 0, cum, 1.0)
    out = {
        "kind": proc.kind,
        "n_paths": proc.n_paths,
        "length": T,
        "frac_bounded": float(bounded.mean()),
        "frac_cauchy": float(cauchy.mean()),
        "frac_psi_plateau": float(plateau.mean()),
        "mean_z_final": float(proc.z[:, -1].mean()),
        "max_z": float(proc.z.max()),
    }
    out["passed"] = all(out[k] >= 1.0 - tolerance
                        for k in ("frac_bounded", "frac_cauchy", "frac_psi_plateau"))
    return out


def convergence_metrics(trace, obj) -> dict:
    """Final gap, running-minimum gradient norm and final distance to the minimizers."""
    out = {
        "status": trace.status,
        "final_t": int(trace.t[-1]),
        "final_J": float(trace.J[-1]),
        "liminf_grad_norm": float(np.min(trace.grad_norm)),
        "running_min_grad_norm": np.minimum.accumulate(trace.grad_norm),
    }
    if obj.j_star is not None:
        gap0 = float(trace.J[0] - obj.j_star)
        out["final_gap"] = float(trace.J[-1] - obj.j_star)
        out["gap_ratio"] = out["final_gap"] / gap0 if gap0 > 0 else math.nan
    if obj.minimizer_set:
        out["final_dist"] = float(trace.dist[-1])
    return out
