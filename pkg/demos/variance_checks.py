"""
Variance of the masked search directions
========================================

Checks the mask variance constants against exhaustive enumeration and a
Monte-Carlo estimate, then shows how noise inflates them.
"""
# %%
import numpy as np

from batchgrad import DirectionSpec, NoiseModel
from batchgrad.diagnostics import estimate_moments, exact_moments_by_enumeration
from batchgrad.directions import predicted_sigma_sq
from batchgrad.objectives import StronglyConvexQuadratic

d = 8
obj = StronglyConvexQuadratic(np.eye(d), np.zeros(d))
theta = np.random.default_rng(0).standard_normal(d)
theta /= np.linalg.norm(theta)  # unit gradient

# %%
for spec in (DirectionSpec("O2"), DirectionSpec("O4", rate_rho=0.25)):
    _, var = exact_moments_by_enumeration(spec, obj, theta)
    print(f"{spec.option}: enumerated {var:.6f}, closed form "
          f"{predicted_sigma_sq(spec.option, d, rate_rho=spec.rate_rho):.6f}")

# %%
rng = np.random.default_rng(1)
rows = []
for snr in (None, 30.0, 10.0):
    noise = NoiseModel("none") if snr is None else NoiseModel.from_snr(snr)
    for spec in (DirectionSpec("O1", noise=noise), DirectionSpec("O3", n_coords=2, noise=noise),
                 DirectionSpec("O4", rate_rho=0.5, noise=noise)):
        est = estimate_moments(spec, obj, theta, None, 200_000, rng)
        pred = predicted_sigma_sq(spec.option, d, spec.n_coords, spec.rate_rho,
                                  m_sq=noise.m_sq if snr is not None else 0.0)
        rows.append((snr, spec.option, est.sigma_sq_hat, pred))
for snr, opt, hat, pred in rows:
    print(f"snr={snr!s:>5}  {opt}  estimated {hat:8.4f}  bound {pred:8.4f}")
