"""Test objectives with analytic gradients and sample-based assumption audits.

Every objective exposes the same small surface used by the rest of the
package:

* ``evaluate(theta)`` and ``gradient(theta)``
* ``perturbed_values(theta, coords, c)`` returning ``J(theta - c e_i)`` and
  ``J(theta + c e_i)`` for each requested coordinate (used by the
  finite-difference directions; subclasses may override it with an exact
  vectorized form)
* ``lipschitz_2L``: a global Lipschitz constant of the gradient
* ``j_star`` and ``minimizer_set`` when known

Strongly convex quadratic
-------------------------
For ``J(x) = 0.5 (x - x*)^T H (x - x*)`` with ``c_lo I <= H <= c_hi I`` we
have ``||grad J||^2 <= c_hi^2 ||x - x*||^2`` and
``J - J* >= 0.5 c_lo ||x - x*||^2``, so the quadratic-growth constant
``C1 = 2 c_hi^2 / c_lo`` works.  (The sharper ``2 c_hi`` follows from
``r^T H^2 r <= c_hi r^T H r``.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Objective",
    "QuadraticLogSumExp",
    "StronglyConvexQuadratic",
    "Example21",
    "AssumptionAudit",
    "NonConvergenceError",
    "make_quadratic_logsumexp",
    "make_example21",
    "make_strongly_convex_quadratic",
    "make_objective",
    "compute_jstar_oracle",
    "audit_assumptions",
    "logsumexp",
]


class NonConvergenceError(RuntimeError):
    """Raised when the reference descent hits its iteration cap."""

    def __init__(self, message: str, best_value: float, best_point: np.ndarray):
        super().__init__(message)
        self.best_value = best_value
        self.best_point = best_point


def logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / e.sum()


class Objective:
    """Base class.  Subclasses set ``dim``, ``lipschitz_2L`` and implement
    ``evaluate`` and ``gradient``."""

    name = "objective"

    def __init__(self, dim: int, lipschitz_2L: float, j_star: Optional[float] = None,
                 minimizer_set: Optional[Sequence[np.ndarray]] = None,
                 c1: Optional[float] = None):
        self.dim = int(dim)
        self.lipschitz_2L = float(lipschitz_2L)
        self.j_star = j_star
        self.minimizer_set = (None if minimizer_set is None
                              else [np.asarray(m, dtype=float) for m in minimizer_set])
        # declared quadratic-growth constant, if the construction gives one
        self.c1 = c1
        self.params: dict = {}

    def evaluate(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def perturbed_values(self, theta: np.ndarray, coords: np.ndarray, c: float):
        """Return ``(J(theta - c e_i), J(theta + c e_i))`` for ``i`` in coords."""
        coords = np.asarray(coords, dtype=np.intp)
        minus = np.empty(coords.size)
        plus = np.empty(coords.size)
        work = np.array(theta, dtype=float)
        for k, i in enumerate(coords):
            old = work[i]
            work[i] = old - c
            minus[k] = self.evaluate(work)
            work[i] = old + c
            plus[k] = self.evaluate(work)
            work[i] = old
        return minus, plus

    def distance_to_minimizers(self, theta: np.ndarray) -> Optional[float]:
        if not self.minimizer_set:
            return None
        theta = np.asarray(theta, dtype=float)
        return min(float(np.linalg.norm(theta - m)) for m in self.minimizer_set)

    @property
    def minimizer_estimate(self) -> Optional[np.ndarray]:
        return self.minimizer_set[0] if self.minimizer_set else None

    def spec(self) -> dict:
        """Name + parameters, enough to rebuild the objective."""
        return {"name": self.name, **self.params}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class QuadraticLogSumExp(Objective):
    """``J(x) = x^T A x + log(sum_i exp(x_i))``."""

    name = "quadratic_logsumexp"

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        eig = np.linalg.eigvalsh(A)
        # Hessian is 2A + (softmax Jacobian), the latter has spectral norm <= 1
        super().__init__(A.shape[0], 2.0 * eig[-1] + 1.0)
        self.A = A
        self.A_diag = np.ascontiguousarray(np.diag(A))
        self.eigenvalues = eig

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        return float(theta @ self.A @ theta) + logsumexp(theta)

    def gradient(self, theta):
        theta = np.asarray(theta, dtype=float)
        return 2.0 * (self.A @ theta) + _softmax(theta)

    def perturbed_values(self, theta, coords, c):
        theta = np.asarray(theta, dtype=float)
        coords = np.asarray(coords, dtype=np.intp)
        At = self.A @ theta
        quad = float(theta @ At)
        lin = 2.0 * c * At[coords]
        curv = c * c * self.A_diag[coords]
        m = float(np.max(theta))
        e = np.exp(theta - m)
        s = e.sum()
        ei = e[coords]
        lse_minus = m + np.log(s + ei * math.expm1(-c))
        lse_plus = m + np.log(s + ei * math.expm1(c))
        return quad - lin + curv + lse_minus, quad + lin + curv + lse_plus


class StronglyConvexQuadratic(Objective):
    """``J(x) = 0.5 (x - x*)^T H (x - x*)`` with ``J* = 0``."""

    name = "strongly_convex_quadratic"

    def __init__(self, H: np.ndarray, theta_star: np.ndarray):
        H = np.asarray(H, dtype=float)
        theta_star = np.asarray(theta_star, dtype=float)
        eig = np.linalg.eigvalsh(H)
        c_lo, c_hi = float(eig[0]), float(eig[-1])
        super().__init__(H.shape[0], c_hi, j_star=0.0, minimizer_set=[theta_star],
                         c1=2.0 * c_hi ** 2 / c_lo)
        self.H = H
        self.H_diag = np.ascontiguousarray(np.diag(H))
        self.theta_star = theta_star
        self.eigenvalues = eig

    def evaluate(self, theta):
        r = np.asarray(theta, dtype=float) - self.theta_star
        return 0.5 * float(r @ self.H @ r)

    def gradient(self, theta):
        r = np.asarray(theta, dtype=float) - self.theta_star
        return self.H @ r

    def perturbed_values(self, theta, coords, c):
        r = np.asarray(theta, dtype=float) - self.theta_star
        coords = np.asarray(coords, dtype=np.intp)
        Hr = self.H @ r
        base = 0.5 * float(r @ Hr)
        lin = c * Hr[coords]
        curv = 0.5 * c * c * self.H_diag[coords]
        return base - lin + curv, base + lin + curv


class Example21(Objective):
    """Scalar objective with three global minima on [-5, 5].

    ``sin((pi/2)(x - 1)) + 1`` on ``[-5, 5]``, a square-root tail
    ``0.5 + sqrt((pi/2)(x - 5) + 0.25)`` for ``x >= 5`` and the mirror image
    for ``x <= -5``.  The pieces join in a C^1 way at both seams.  Zeros of
    the sine branch are ``x = 4k``, i.e. ``{-4, 0, 4}``.
    """

    name = "example21"

    def __init__(self):
        # |J''| peaks at the seams: (pi/2)^2 / (4 * 0.25^1.5) = pi^2 / 2
        super().__init__(1, math.pi ** 2 / 2.0, j_star=0.0,
                         minimizer_set=[np.array([-4.0]), np.array([0.0]), np.array([4.0])])

    @staticmethod
    def sine_branch(x: float) -> float:
        return math.sin(0.5 * math.pi * (x - 1.0)) + 1.0

    @staticmethod
    def sqrt_branch(x: float) -> float:
        return 0.5 + math.sqrt(0.5 * math.pi * (x - 5.0) + 0.25)

    def _scalar(self, x: float) -> float:
        if x > 5.0:
            return self.sqrt_branch(x)
        if x < -5.0:
            return self.sqrt_branch(-x)
        return self.sine_branch(x)

    def _dscalar(self, x: float) -> float:
        if x > 5.0:
            return 0.25 * math.pi / math.sqrt(0.5 * math.pi * (x - 5.0) + 0.25)
        if x < -5.0:
            return -0.25 * math.pi / math.sqrt(0.5 * math.pi * (-x - 5.0) + 0.25)
        return 0.5 * math.pi * math.cos(0.5 * math.pi * (x - 1.0))

    def evaluate(self, theta):
        return self._scalar(float(np.asarray(theta, dtype=float).reshape(-1)[0]))

    def gradient(self, theta):
        return np.array([self._dscalar(float(np.asarray(theta, dtype=float).reshape(-1)[0]))])


def _random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    # sign fix so Q is Haar distributed
    return q * np.sign(np.diag(r))


def make_quadratic_logsumexp(d: int, cond_number: float, seed: int,
                             lambda_min: float = 0.1) -> QuadraticLogSumExp:
    """Quadratic + log-sum-exp test function with a dense, ill-conditioned A.

    The eigenvalues of ``A`` are log-spaced on
    ``[lambda_min, lambda_min * cond_number]`` and rotated by a seeded random
    orthogonal matrix, so ``A`` is far from diagonal.

    Parameters
    ----------
    d : int
        Dimension, at least 2.
    cond_number : float
        Ratio ``lambda_max / lambda_min`` of ``A`` (> 1).
    seed : int
        Seed for the rotation.
    lambda_min : float
        Smallest eigenvalue of ``A``.  The default keeps ``alpha0 / rho``
        times the diagonal curvature below the stability limit for the
        benchmark schedule down to ``rho = 0.05``.
    """
    if int(d) != d or d < 2:
        raise ValueError(f"invalid dimension: d must be an integer >= 2, got {d!r}")
    if not cond_number > 1:
        raise ValueError(f"cond_number must exceed 1, got {cond_number!r}")
    if not lambda_min > 0:
        raise ValueError(f"lambda_min must be positive, got {lambda_min!r}")
    d = int(d)
    rng = np.random.default_rng(seed)
    q = _random_orthogonal(d, rng)
    lam = lambda_min * np.logspace(0.0, math.log10(cond_number), d)
    lam[0], lam[-1] = lambda_min, lambda_min * cond_number
    A = (q * lam) @ q.T
    A = 0.5 * (A + A.T)
    obj = QuadraticLogSumExp(A)
    obj.params = {"d": d, "cond_number": float(cond_number), "seed": int(seed),
                  "lambda_min": float(lambda_min)}
    obj.requested_eigenvalues = lam
    return obj


def make_example21() -> Example21:
    return Example21()


def make_strongly_convex_quadratic(d: int, c_lo: float, c_hi: float, seed: int,
                                   theta_star: Optional[np.ndarray] = None
                                   ) -> StronglyConvexQuadratic:
    """Quadratic with Hessian spectrum spread linearly over ``[c_lo, c_hi]``.

    ``theta_star`` defaults to a seeded standard normal vector.
    """
    if not c_lo > 0:
        raise ValueError(f"invalid spectrum: c_lo must be positive, got {c_lo!r}")
    if c_hi < c_lo:
        raise ValueError(f"invalid spectrum: c_hi={c_hi!r} < c_lo={c_lo!r}")
    d = int(d)
    if d < 1:
        raise ValueError(f"invalid dimension: {d!r}")
    rng = np.random.default_rng(seed)
    q = _random_orthogonal(d, rng)
    lam = np.linspace(c_lo, c_hi, d)
    H = (q * lam) @ q.T
    H = 0.5 * (H + H.T)
    if theta_star is None:
        theta_star = rng.standard_normal(d)
    obj = StronglyConvexQuadratic(H, np.asarray(theta_star, dtype=float).reshape(d))
    obj.params = {"d": d, "c_lo": float(c_lo), "c_hi": float(c_hi), "seed": int(seed)}
    return obj


_FACTORIES = {
    "quadratic_logsumexp": make_quadratic_logsumexp,
    "strongly_convex_quadratic": make_strongly_convex_quadratic,
    "example21": make_example21,
}


def make_objective(spec: dict) -> Objective:
    """Build an objective from ``{"name": ..., **params}``."""
    spec = dict(spec)
    try:
        factory = _FACTORIES[spec.pop("name")]
    except KeyError as exc:
        raise ValueError(f"unknown objective {exc.args[0]!r}; "
                         f"choose from {sorted(_FACTORIES)}") from None
    return factory(**spec)


def compute_jstar_oracle(obj: Objective, tol: float = 1e-10,
                         theta0: Optional[np.ndarray] = None,
                         max_iter: int = 10_000_000) -> float:
    """Reference minimum by full-gradient descent with backtracking.

    Runs until ``||grad J|| < tol``.  When the objective has no recorded
    minimum yet, the terminal point and value are stored on ``obj`` as
    ``minimizer_set`` and ``j_star``.  The returned value is always the
    terminal objective value.

    Raises
    ------
    NonConvergenceError
        If ``max_iter`` iterations pass before the tolerance is met.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    theta = (np.zeros(obj.dim) if theta0 is None
             else np.array(theta0, dtype=float).reshape(obj.dim))
    safe = 1.0 / max(obj.lipschitz_2L, 1e-12)
    step = safe
    f = obj.evaluate(theta)
    g = obj.gradient(theta)
    for _ in range(max_iter):
        gg = float(g @ g)
        if math.sqrt(gg) < tol:
            break
        # Armijo backtracking, floored at the step 1/L which always descends
        # for an L-smooth function; near the optimum, decreases fall below
        # float resolution and only the floor keeps the iteration moving
        t = 2.0 * step
        while True:
            cand = theta - t * g
            fc = obj.evaluate(cand)
            if fc <= f - 0.5 * t * gg or t <= safe:
                break
            t = max(0.5 * t, safe)
        step = t
        theta, f, g = cand, fc, obj.gradient(cand)
    else:
        raise NonConvergenceError(
            f"gradient norm {math.sqrt(float(g @ g)):.3e} above tol after {max_iter} iterations",
            f, theta)
    if obj.j_star is None:
        obj.j_star = f
        obj.minimizer_set = [theta.copy()]
    return f


@dataclass
class AssumptionAudit:
    """Sample-based evidence for the objective-side assumptions.

    ``verdicts`` maps ``"J1"``..``"J5"`` to ``"fail"`` (falsified by a
    sample) or ``"unknown"`` (consistent with every sample; a finite sample
    cannot prove a global claim).
    """

    estimated_L: float
    estimated_C1: float
    j4_witness: np.ndarray  # columns: Jbar, ||grad J||
    j5_witness: np.ndarray  # columns: Jbar, distance to minimizers
    verdicts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def audit_assumptions(obj: Objective, sample_count: int, region_radius: float,
                      seed: int, tol: float = 0.05, c1_floor: float = 1e-12
                      ) -> AssumptionAudit:
    """Draw point pairs in a ball around the minimizer and audit the objective assumptions.

    ``estimated_L`` is half the largest gradient difference quotient (the
    gradient is ``2L``-Lipschitz).  ``estimated_C1`` is the largest
    ``||grad J||^2 / Jbar`` over samples with ``Jbar > c1_floor``.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    center = obj.minimizer_estimate
    if center is None:
        if obj.j_star is None:
            raise ValueError("audit unavailable: objective has neither a minimizer "
                             "estimate nor a known j_star; run compute_jstar_oracle first")
        center = np.zeros(obj.dim)
    j_star = obj.j_star
    if j_star is None:
        j_star = obj.evaluate(center)
    rng = np.random.default_rng(seed)
    d = obj.dim

    def ball(n):
        u = rng.standard_normal((n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = region_radius * rng.random(n) ** (1.0 / d)
        return center + u * r[:, None]

    xs, ys = ball(sample_count), ball(sample_count)
    gx = np.array([obj.gradient(x) for x in xs])
    gy = np.array([obj.gradient(y) for y in ys])
    fx = np.array([obj.evaluate(x) for x in xs])

    dist = np.linalg.norm(xs - ys, axis=1)
    ok = dist > 0
    quot = np.linalg.norm(gx - gy, axis=1)[ok] / dist[ok]
    est_L = 0.5 * float(quot.max()) if quot.size else 0.0

    jbar = fx - j_star
    gnorm = np.linalg.norm(gx, axis=1)
    pos = jbar > c1_floor
    est_C1 = float(np.max(gnorm[pos] ** 2 / jbar[pos])) if pos.any() else 0.0

    dmin = (np.array([obj.distance_to_minimizers(x) for x in xs])
            if obj.minimizer_set else np.full(sample_count, np.nan))

    verdicts = {}
    notes = []
    verdicts["J1"] = "fail" if est_L > 0.5 * obj.lipschitz_2L * (1 + tol) else "unknown"
    verdicts["J2"] = "fail" if np.any(jbar < -1e-9 * (1 + abs(j_star))) else "unknown"
    if obj.c1 is not None and est_C1 > obj.c1 * (1 + tol):
        verdicts["J3"] = "fail"
    else:
        verdicts["J3"] = "unknown"
    # The gradient-domination assumption is falsified by a near-stationary sample well above the minimum.
    scale_j = max(1.0, float(np.max(np.abs(jbar))))
    bad4 = (gnorm < 1e-8) & (jbar > 1e-3 * scale_j)
    verdicts["J4"] = "fail" if bad4.any() else "unknown"
    if bad4.any():
        notes.append(f"J4: {int(bad4.sum())} stationary samples above J*")
    if obj.minimizer_set:
        # The distance assumption is falsified by a sample at the minimum value but far from S(J).
        bad5 = (np.abs(jbar) < 1e-10) & (dmin > 1e-3)
        verdicts["J5"] = "fail" if bad5.any() else "unknown"
    else:
        verdicts["J5"] = "unknown"
        notes.append("J5: minimizer set unknown, distances not tabulated")
    return AssumptionAudit(
        estimated_L=est_L,
        estimated_C1=est_C1,
        j4_witness=np.column_stack([jbar, gnorm]),
        j5_witness=np.column_stack([jbar, dmin]),
        verdicts=verdicts,
        notes=notes,
    )
