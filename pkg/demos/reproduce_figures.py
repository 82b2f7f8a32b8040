"""
Desk-scale figure reproductions
===============================

Runs the fig3 preset (Bernoulli masks at several rates), writes the merged
gap table and, if matplotlib is available, a log-log plot.

Pass ``--full`` to use the preset horizon (about two minutes per repetition);
the default shortens it for a quick look.
"""
# %%
import sys

from batchgrad.bench import emit_figure_data, preset, run_experiment

cfg = preset("fig3", "desk", repetitions=1)
if "--full" not in sys.argv:
    cfg.horizon = 20_000
    cfg.record_every = 200
manifest = run_experiment(cfg, out_dir="demo_out")
table = emit_figure_data(manifest)
print("wrote", table)

# %%
for r in manifest["runs"]:
    print(f"{r['label']:>10}  gap ratio {r['final_gap'] / (r['J0'] - manifest['j_star']):.2e}")

# %%
try:
    import runpy

    runpy.run_path(str(table.parent / "plot_fig3.py"))
except ImportError:
    print("matplotlib not installed; skipping plot")
