"""
Almost-supermartingale ensembles
================================

Simulates the three regimes of the almost-supermartingale harness and prints
the fractions of bounded and settled paths.
"""
# %%
from batchgrad.diagnostics import check_rs_conclusions, make_rs_process, rs_guard

for kind in ("contracting", "marginal", "violating"):
    proc = make_rs_process(kind, 10_000, seed=0, n_paths=1000)
    rep = check_rs_conclusions(proc)
    guard = rs_guard(proc, seed=0)
    print(f"{kind:>11}: bounded {rep['frac_bounded']:.3f}  Cauchy {rep['frac_cauchy']:.3f}  "
          f"psi plateau {rep['frac_psi_plateau']:.3f}  mean z_T {rep['mean_z_final']:.3g}  "
          f"guard {'ok' if guard['passed'] else 'FAILED'}")
