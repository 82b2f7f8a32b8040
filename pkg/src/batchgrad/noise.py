"""Additive measurement noise and seeded random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseModel", "rng_stream", "derive_seed", "sample_noise", "sample_noise_pair"]


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian noise whose energy scales with ``1 + ||grad J||^2``.

    For ``kind="gaussian_snr"`` the bound is ``M^2 = 10^(-snr_db / 10)``, and
    a draw ``xi`` in R^d has i.i.d. components of variance
    ``M^2 (1 + ||grad J||^2) / d``, so ``E||xi||^2`` meets the bound with
    equality.
    """

    kind: str = "none"
    snr_db: float = math.inf

    def __post_init__(self):
        if self.kind not in ("none", "gaussian_snr"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian_snr" and (
                not isinstance(self.snr_db, (int, float)) or not math.isfinite(self.snr_db)):
            raise ValueError("gaussian_snr noise needs a finite snr_db")

    @classmethod
    def from_snr(cls, snr_db: float | None) -> "NoiseModel":
        if snr_db is None or math.isinf(snr_db):
            return cls()
        return cls("gaussian_snr", float(snr_db))

    @property
    def m_sq(self) -> float:
        if self.kind == "none":
            return 0.0
        return 10.0 ** (-self.snr_db / 10.0)

    def component_std(self, grad_norm_sq: float, d: int) -> float:
        return math.sqrt(self.m_sq * (1.0 + grad_norm_sq) / d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "snr_db": None if self.kind == "none" else self.snr_db}


NO_NOISE = NoiseModel()


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent PCG64 stream keyed by ``(seed, stream_id)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic 63-bit seed from a master seed and integer keys."""
    ss = np.random.SeedSequence([int(master_seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def sample_noise(model: NoiseModel, grad_norm_sq: float, d: int,
                 rng: np.random.Generator) -> np.ndarray:
    if model.kind == "none":
        return np.zeros(d)
    return rng.standard_normal(d) * model.component_std(grad_norm_sq, d)


def sample_noise_pair(model: NoiseModel, grad_norm_sq: float, d: int,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two independent draws ``(xi_minus, xi_plus)`` of :func:`sample_noise`."""
    if model.kind == "none":
        return np.zeros(d), np.zeros(d)
    z = rng.standard_normal((2, d)) * model.component_std(grad_norm_sq, d)
    return z[0], z[1]
