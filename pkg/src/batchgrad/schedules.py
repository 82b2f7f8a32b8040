"""Power-law step sizes and finite-difference increments.

``alpha_t = alpha0 / (1 + t/tau)^p`` and ``c_t = c0 / (1 + t/tau)^q``.

Summability of every series built from these reduces to a single exponent:
``sum (1 + t/tau)^(-s)`` converges iff ``s > 1``.  Verdicts are therefore
decided from ``(p, q)`` alone; truncated partial sums are reported for
reference only.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["Schedule", "ConditionReport", "alpha", "increment_c", "verify_conditions"]

HOLDS, FAILS, BOUNDARY = "holds", "fails", "boundary"


@dataclass(frozen=True)
class Schedule:
    alpha0: float = 0.01
    c0: float = 0.01
    tau: float = 200.0
    p: float = 1.0
    q: float = 0.02

    def __post_init__(self):
        if not 0.0 < self.alpha0 < 1.0:
            raise ValueError(f"alpha0 must lie in (0, 1), got {self.alpha0!r}")
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0!r}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if self.p < 0 or self.q < 0:
            raise ValueError("exponents p, q must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def _decay(scale: float, s: Schedule, exponent: float, t):
    if isinstance(t, (int, float)):
        return scale / (1.0 + t / s.tau) ** exponent
    return scale / (1.0 + np.asarray(t, dtype=float) / s.tau) ** exponent


def alpha(s: Schedule, t):
    """Step size at time ``t`` (scalar or array)."""
    return _decay(s.alpha0, s, s.p, t)


def increment_c(s: Schedule, t):
    """Finite-difference increment at time ``t`` (scalar or array)."""
    return _decay(s.c0, s, s.q, t)


def _summable(exponent: float) -> str:
    if exponent > 1.0:
        return HOLDS
    return BOUNDARY if exponent == 1.0 else FAILS


def _divergent(exponent: float) -> str:
    return HOLDS if exponent <= 1.0 else FAILS


def _combine(*verdicts: str) -> str:
    if FAILS in verdicts:
        return FAILS
    if BOUNDARY in verdicts:
        return BOUNDARY
    return HOLDS


@dataclass
class ConditionReport:
    """Analytic verdicts plus advisory partial sums.

    ``series`` holds the verdict of each individual series condition:
    ``sum_alpha_diverges``, ``sum_alpha_sq``, ``sum_alpha_c`` and
    ``sum_alpha_m_over_c_sq``.  A summability condition sitting exactly at
    its threshold (a harmonic series) is reported as ``"boundary"``.
    """

    robbins_monro: str
    blum: str
    square_summable: str
    increment_series: str
    series: dict
    partial_sums: list = field(default_factory=list)

    # interface names for square_summable and increment_series
    @property
    def eq29(self) -> str:
        return self.square_summable

    @property
    def eq3212(self) -> str:
        return self.increment_series

    def summary(self) -> str:
        return f"RM: {self.robbins_monro}, Blum: {self.blum}"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["eq29"], out["eq3212"] = self.eq29, self.eq3212
        return out


def verify_conditions(s: Schedule, m_constant: float = 1e-5, horizon: int = 1_000_000
                      ) -> ConditionReport:
    """Check Robbins-Monro and Blum conditions for a power-law schedule.

    ``m_constant`` is the (constant) noise bound ``M``; with ``M = 0`` the
    ``sum (alpha M / c)^2`` condition holds trivially.
    """
    if horizon < 1000:
        raise ValueError("horizon must be at least 1000")
    p, q = s.p, s.q
    series = {
        "sum_alpha_diverges": _divergent(p),
        "sum_alpha_sq": _summable(2 * p),
        "sum_alpha_c": _summable(p + q),
        "sum_alpha_m_over_c_sq": HOLDS if m_constant == 0 else _summable(2 * (p - q)),
    }
    square = series["sum_alpha_sq"]
    rm = _combine(series["sum_alpha_diverges"], square)
    increments = _combine(series["sum_alpha_sq"], series["sum_alpha_c"],
                      series["sum_alpha_m_over_c_sq"])
    blum = _combine(series["sum_alpha_diverges"], increments)

    t = np.arange(horizon, dtype=float)
    a = alpha(s, t)
    c = increment_c(s, t)
    terms = {
        "sum_alpha_diverges": a,
        "sum_alpha_sq": a * a,
        "sum_alpha_c": a * c,
        "sum_alpha_m_over_c_sq": (a * m_constant / c) ** 2,
    }
    partial = []
    tenth = max(horizon // 10, 1)
    for name, x in terms.items():
        cs = np.cumsum(x)
        total, early = float(cs[-1]), float(cs[tenth - 1])
        partial.append({
            "condition": name,
            "horizon": horizon,
            "sum_at_horizon": total,
            "sum_at_tenth": early,
            # relative growth over the last 90% of the horizon
            "divergence_proxy": (total - early) / total if total > 0 else 0.0,
        })
    return ConditionReport(rm, blum, square, increments, series, partial)
