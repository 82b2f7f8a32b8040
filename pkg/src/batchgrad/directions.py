"""Search directions for batch updating.

Options 1-4 mask a noisy gradient; options 1A-4A apply the same masks to a
central-difference gradient estimate::

    O1   phi = -g + xi
    O2   phi = d e_k o (-g + xi),                k ~ U[d]
    O3   phi = (d/N) sum_n e_{k_n} o (-g + xi_n), k_n ~ U[d] with replacement
    O4   phi = (1/rho) v o (-g + xi),            v_i ~ Bernoulli(rho)

For the A-options the mask is drawn first and the finite differences are
evaluated only on masked coordinates, so ``fn_evals`` is twice the number
of distinct masked coordinates.  Measurement noise then enters only
through the two function values of each difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .noise import NO_NOISE, NoiseModel, sample_noise, sample_noise_pair

__all__ = [
    "OPTIONS",
    "EXACT_OPTIONS",
    "APPROX_OPTIONS",
    "DirectionSpec",
    "DirectionSample",
    "option1",
    "option2",
    "option3",
    "option4",
    "approx_gradient",
    "sample_direction",
    "sample_directions",
    "predicted_bias",
    "predicted_sigma_sq",
    "mask_variance_factor",
    "noise_inflation",
]

EXACT_OPTIONS = ("O1", "O2", "O3", "O4")
APPROX_OPTIONS = ("O1A", "O2A", "O3A", "O4A")
OPTIONS = EXACT_OPTIONS + APPROX_OPTIONS


@dataclass(frozen=True)
class DirectionSpec:
    option: str
    n_coords: int = 1
    rate_rho: float = 1.0
    noise: NoiseModel = NO_NOISE

    def __post_init__(self):
        if self.option not in OPTIONS:
            raise ValueError(f"unknown option {self.option!r}; expected one of {OPTIONS}")
        if self.option in ("O3", "O3A") and int(self.n_coords) < 1:
            raise ValueError("n_coords must be >= 1")
        if self.option in ("O4", "O4A") and not 0.0 < self.rate_rho <= 1.0:
            raise ValueError(f"rate_rho must lie in (0, 1], got {self.rate_rho!r}")

    @property
    def base(self) -> str:
        return self.option.rstrip("A")

    @property
    def approximate(self) -> bool:
        return self.option.endswith("A")

    def check_dim(self, d: int) -> None:
        if self.option in ("O3", "O3A") and self.n_coords > d:
            raise ValueError(f"n_coords={self.n_coords} exceeds d={d}")

    def to_dict(self) -> dict:
        return {"option": self.option, "n_coords": self.n_coords,
                "rate_rho": self.rate_rho, "noise": self.noise.to_dict()}


@dataclass
class DirectionSample:
    phi: np.ndarray
    updated_coords: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    fn_evals: int = 0
    grad_evals: int = 0


def _all_coords(d: int) -> np.ndarray:
    return np.arange(d, dtype=np.intp)


def option1(obj, theta, noise: NoiseModel, rng) -> DirectionSample:
    g = obj.gradient(theta)
    xi = sample_noise(noise, float(g @ g), obj.dim, rng)
    return DirectionSample(-g + xi, _all_coords(obj.dim), 0, 1)


def option2(obj, theta, noise: NoiseModel, rng, kappa: Optional[int] = None) -> DirectionSample:
    d = obj.dim
    g = obj.gradient(theta)
    if kappa is None:
        kappa = int(rng.integers(d))
    xi = sample_noise(noise, float(g @ g), d, rng)
    phi = np.zeros(d)
    phi[kappa] = d * (-g[kappa] + xi[kappa])
    return DirectionSample(phi, np.array([kappa], dtype=np.intp), 0, 1)


def option3(obj, theta, n_coords: int, noise: NoiseModel, rng,
            indices: Optional[np.ndarray] = None) -> DirectionSample:
    d = obj.dim
    g = obj.gradient(theta)
    if indices is None:
        indices = rng.integers(d, size=int(n_coords))
    indices = np.asarray(indices, dtype=np.intp)
    n = indices.size
    # fresh noise vector per draw; only its drawn component survives the mask
    if noise.kind == "none":
        xi = np.zeros(n)
    else:
        xi = rng.standard_normal(n) * noise.component_std(float(g @ g), d)
    phi = np.zeros(d)
    np.add.at(phi, indices, (d / n) * (-g[indices] + xi))
    return DirectionSample(phi, np.unique(indices), 0, 1)


def option4(obj, theta, rate_rho: float, noise: NoiseModel, rng,
            mask: Optional[np.ndarray] = None) -> DirectionSample:
    d = obj.dim
    g = obj.gradient(theta)
    if mask is None:
        mask = rng.random(d) < rate_rho
    mask = np.asarray(mask, dtype=bool)
    xi = sample_noise(noise, float(g @ g), d, rng)
    phi = np.zeros(d)
    phi[mask] = (-g[mask] + xi[mask]) / rate_rho
    return DirectionSample(phi, np.flatnonzero(mask), 0, 1)


def approx_gradient(obj, theta, c_t: float, noise: NoiseModel, rng,
                    coords: Optional[np.ndarray] = None) -> np.ndarray:
    """Noisy central-difference estimate of ``-grad J`` on ``coords``.

    ``y_i = [J(theta - c e_i) + xi_i^- - J(theta + c e_i) - xi_i^+] / (2c)``
    for ``i`` in coords, zero elsewhere.  Uses ``2 len(coords)`` function
    evaluations.
    """
    if not c_t > 0:
        raise ValueError(f"invalid increment: c_t must be positive, got {c_t!r}")
    d = obj.dim
    coords = _all_coords(d) if coords is None else np.asarray(coords, dtype=np.intp)
    if coords.size == 0:
        raise ValueError("coords must be non-empty")
    f_minus, f_plus = obj.perturbed_values(theta, coords, c_t)
    diff = f_minus - f_plus
    if noise.kind != "none":
        g = obj.gradient(theta)  # noise level only; not an oracle call of the method
        std = noise.component_std(float(g @ g), d)
        pair = rng.standard_normal((2, coords.size)) * std
        diff = diff + pair[0] - pair[1]
    y = np.zeros(d)
    y[coords] = diff / (2.0 * c_t)
    return y


def _approx_direction(spec: DirectionSpec, obj, theta, c_t, rng) -> DirectionSample:
    d = obj.dim
    base = spec.base
    if base == "O1":
        coords, weights = _all_coords(d), 1.0
    elif base == "O2":
        coords, weights = np.array([int(rng.integers(d))], dtype=np.intp), float(d)
    elif base == "O3":
        draws = rng.integers(d, size=spec.n_coords)
        coords, counts = np.unique(draws, return_counts=True)
        weights = (d / spec.n_coords) * counts
    else:
        coords = np.flatnonzero(rng.random(d) < spec.rate_rho)
        weights = 1.0 / spec.rate_rho
    phi = np.zeros(d)
    if coords.size == 0:
        return DirectionSample(phi, coords, 0, 0)
    y = approx_gradient(obj, theta, c_t, spec.noise, rng, coords)
    phi[coords] = weights * y[coords]
    return DirectionSample(phi, coords, 2 * coords.size, 0)


def sample_direction(spec: DirectionSpec, obj, theta, c_t: Optional[float], rng
                     ) -> DirectionSample:
    if spec.approximate:
        if c_t is None:
            raise ValueError(f"{spec.option} needs an increment c_t")
        return _approx_direction(spec, obj, theta, c_t, rng)
    if spec.option == "O1":
        return option1(obj, theta, spec.noise, rng)
    if spec.option == "O2":
        return option2(obj, theta, spec.noise, rng)
    if spec.option == "O3":
        return option3(obj, theta, spec.n_coords, spec.noise, rng)
    return option4(obj, theta, spec.rate_rho, spec.noise, rng)


def sample_directions(spec: DirectionSpec, obj, theta, c_t: Optional[float], n: int,
                      rng) -> np.ndarray:
    """``n`` independent direction draws at a fixed ``theta``, as an (n, d) array.

    Vectorized twin of :func:`sample_direction` for Monte-Carlo work; the
    rows have the same distribution as ``sample_direction(...).phi``.
    """
    d = obj.dim
    theta = np.asarray(theta, dtype=float)
    g = obj.gradient(theta)
    gn = float(g @ g)
    if spec.approximate:
        if not (c_t is not None and c_t > 0):
            raise ValueError("invalid increment c_t")
        f_minus, f_plus = obj.perturbed_values(theta, _all_coords(d), c_t)
        target = (f_minus - f_plus) / (2.0 * c_t)
        # difference of two independent draws, divided by 2c
        std = math.sqrt(2.0) * spec.noise.component_std(gn, d) / (2.0 * c_t)
    else:
        target = -g
        std = spec.noise.component_std(gn, d)

    def noise(shape):
        if std == 0.0:
            return np.zeros(shape)
        return rng.standard_normal(shape) * std

    base = spec.base
    if base == "O1":
        return target + noise((n, d))
    rows = np.arange(n)
    phi = np.zeros((n, d))
    if base == "O2":
        k = rng.integers(d, size=n)
        phi[rows, k] = d * (target[k] + noise(n))
        return phi
    if base == "O3":
        N = spec.n_coords
        idx = rng.integers(d, size=(n, N))
        if spec.approximate:
            counts = np.zeros((n, d))
            np.add.at(counts, (rows[:, None], idx), 1.0)
            return (d / N) * counts * (target + noise((n, d)))
        vals = (d / N) * (target[idx] + noise((n, N)))
        np.add.at(phi, (rows[:, None], idx), vals)
        return phi
    mask = rng.random((n, d)) < spec.rate_rho
    return np.where(mask, (target + noise((n, d))) / spec.rate_rho, 0.0)


def mask_variance_factor(option: str, d: int, n_coords: int = 1, rate_rho: float = 1.0) -> float:
    """Exact ``E||phi - E phi||^2 / ||g||^2`` of the noiseless mask."""
    base = option.rstrip("A")
    if base == "O1":
        return 0.0
    if base == "O2":
        return float(d - 1)
    if base == "O3":
        return (d - 1) / n_coords
    if base == "O4":
        return (1.0 - rate_rho) / rate_rho
    raise ValueError(f"unknown option {option!r}")


def noise_inflation(option: str, d: int, n_coords: int = 1, rate_rho: float = 1.0) -> float:
    """Factor by which masking and rescaling multiplies the noise energy."""
    base = option.rstrip("A")
    return {"O1": 1.0, "O2": float(d), "O3": d / n_coords, "O4": 1.0 / rate_rho}[base]


def predicted_bias(option: str, d: int, L: float, c_t: float = 0.0) -> float:
    """Bound on ``||E phi + grad J||``: zero for exact options, ``sqrt(d) L c``
    for finite differences (gradient Lipschitz constant ``2L``)."""
    if option not in OPTIONS:
        raise ValueError(f"unknown option {option!r}")
    if option in EXACT_OPTIONS:
        return 0.0
    return math.sqrt(d) * L * c_t


def predicted_sigma_sq(option: str, d: int, n_coords: int = 1, rate_rho: float = 1.0,
                       m_sq: float = 0.0, c_t: Optional[float] = None) -> float:
    """Variance constant ``sigma^2`` with ``E||zeta||^2 <= sigma^2 (1 + ||g||^2)``.

    The value is the sum of the exact mask coefficient
    (``0, d-1, (d-1)/N, (1-rho)/rho``) and the noise energy after masking:
    ``m_sq`` times the inflation ``(1, d, d/N, 1/rho)``, with ``m_sq``
    replaced by ``m_sq / (2 c^2)`` for the finite-difference options.
    Both terms are attained, so the constant is tight.
    """
    if option not in OPTIONS:
        raise ValueError(f"unknown option {option!r}")
    a = mask_variance_factor(option, d, n_coords, rate_rho)
    noise_energy = m_sq
    if option in APPROX_OPTIONS:
        if not (c_t is not None and c_t > 0):
            raise ValueError(f"{option} needs c_t > 0")
        noise_energy = m_sq / (2.0 * c_t * c_t)
    return a + noise_inflation(option, d, n_coords, rate_rho) * noise_energy
