"""Execute experiment grids, persist traces and a manifest, merge figure data.

Output layout under ``<out>/<experiment name>/``::

    <run_id>.csv        trace rows (t,J,grad_norm,dist,updated,fn_evals,grad_evals)
    <run_id>.json       sidecar: full run config echo + terminal status
    manifest.json       written once, after every run has finished

Run ids are ``c<cell:03d>-r<rep:02d>``.  The seed of each run is
``derive_seed(master_seed, cell, rep)``: a numpy ``SeedSequence`` built
from ``[master_seed, cell, rep]``, first 64-bit state word shifted right
by one bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..directions import DirectionSpec
from ..noise import NoiseModel, derive_seed
from ..objectives import compute_jstar_oracle, make_objective
from ..optimizer import ConditionRefused, RunConfig, RunTrace, check_run_conditions, run
from .config import ExperimentConfig, cell_label

__all__ = ["run_experiment", "emit_figure_data", "run_configs", "config_hash",
           "MissingTracesError", "MANIFEST_NAME", "SEED_DERIVATION"]

MANIFEST_NAME = "manifest.json"
SEED_DERIVATION = ("seed = derive_seed(master_seed, cell_index, repetition_index): "
                   "numpy SeedSequence([master_seed, cell_index, repetition_index]), "
                   "first uint64 state word >> 1")


class MissingTracesError(FileNotFoundError):
    def __init__(self, run_ids):
        super().__init__("missing traces for run ids: " + ", ".join(run_ids))
        self.run_ids = list(run_ids)


def config_hash(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_configs(cfg: ExperimentConfig):
    """Yield ``(run_id, cell_index, rep, RunConfig)`` for every run of the grid."""
    for ci, cell in enumerate(cfg.cells):
        noise = NoiseModel.from_snr(cell.get("snr_db"))
        spec = DirectionSpec(cell["option"], n_coords=int(cell.get("n_coords", 1)),
                             rate_rho=float(cell.get("rho", 1.0)), noise=noise)
        for rep in range(cfg.repetitions):
            rc = RunConfig(
                objective=dict(cfg.objective),
                direction=spec,
                schedule=cfg.schedule,
                algorithm=cell.get("algorithm", "batch_update"),
                horizon=cfg.horizon,
                seed=derive_seed(cfg.master_seed, ci, rep),
                theta0=cfg.theta0,
                record_every=cfg.record_every,
                momentum_step=cfg.momentum_step,
                override_conditions=cfg.override_conditions,
            )
            yield f"c{ci:03d}-r{rep:02d}", ci, rep, rc


def _check_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out, prefix=".probe-"):
            pass
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def _execute(job):
    run_id, rc, obj, out = job
    trace = run(rc, obj)
    trace.write(out / f"{run_id}.csv", out / f"{run_id}.json")
    final_gap = float(trace.J[-1] - obj.j_star) if obj.j_star is not None else None
    return run_id, trace.status, len(trace), final_gap, trace.meta.get("J0")


def run_experiment(cfg: ExperimentConfig, out_dir=None,
                   progress: Optional[Callable[[str, str], None]] = None) -> dict:
    """Run every cell and repetition of ``cfg``; return the manifest dict.

    Raises
    ------
    OSError
        The output directory cannot be written (checked before any run).
    ConditionRefused
        Some cell's schedule fails its step-size conditions and
        ``cfg.override_conditions`` is off.  Nothing is run.
    """
    out = Path(out_dir or cfg.out_dir or default_out_root()) / cfg.name
    _check_writable(out)
    jobs = list(run_configs(cfg))

    violated = []
    for run_id, ci, rep, rc in jobs:
        if rep == 0 and not cfg.override_conditions:
            bad, report = check_run_conditions(rc)
            violated += [f"cell {ci} ({rc.direction.option}): {v}" for v in bad]
    if violated:
        raise ConditionRefused(violated, None)

    obj = make_objective(cfg.objective)
    j_star = obj.j_star if obj.j_star is not None else compute_jstar_oracle(obj)
    work = [(run_id, rc, obj, out) for run_id, _, _, rc in jobs]
    if cfg.workers > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_execute, work))
    else:
        results = []
        for job in work:
            results.append(_execute(job))
            if progress is not None:
                progress(job[0], results[-1][1])
    by_id = {r[0]: r for r in results}

    figure = cfg.extra.get("figure")
    runs = []
    for run_id, ci, rep, rc in jobs:
        _, status, rows, gap, J0 = by_id[run_id]
        runs.append({
            "run_id": run_id,
            "cell": ci,
            "repetition": rep,
            "label": cell_label(cfg.cells[ci], figure),
            "seed": rc.seed,
            "config_hash": config_hash(rc.to_dict()),
            "status": status,
            "rows": rows,
            "csv": f"{run_id}.csv",
            "sidecar": f"{run_id}.json",
            "J0": J0,
            "final_gap": gap,
        })
    manifest = {
        "name": cfg.name,
        "figure": figure,
        "scale": cfg.scale,
        "master_seed": cfg.master_seed,
        "seed_derivation": SEED_DERIVATION,
        "objective": obj.spec(),
        "j_star": j_star,
        "experiment": cfg.to_dict(),
        "experiment_hash": config_hash(cfg.to_dict()),
        "runs": runs,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    manifest["directory"] = str(out)
    return manifest


def default_out_root() -> str:
    return os.environ.get("BATCHGRAD_OUT", "batchgrad_out")


def load_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    manifest = json.loads(path.read_text())
    manifest["directory"] = str(path.parent)
    return manifest


_PLOT_SCRIPT = '''"""Plot {name}: J(theta_t) - J* against t, one line per series."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

here = Path(__file__).resolve().parent
series = defaultdict(lambda: defaultdict(list))
with open(here / "{csv}") as fh:
    for row in csv.DictReader(fh):
        series[row["label"]][row["run_id"]].append((int(row["t"]), float(row["J_gap"])))
fig, ax = plt.subplots()
for i, (label, runs) in enumerate(sorted(series.items())):
    for j, pts in enumerate(runs.values()):
        t, gap = zip(*pts)
        ax.loglog([max(x, 1) for x in t], gap, color=f"C{{i}}", alpha=0.8,
                  label=label if j == 0 else None)
ax.set_xlabel("iteration t")
ax.set_ylabel("J(theta_t) - J*")
ax.set_title("{name}: reproduction at {scale} scale")
ax.legend()
fig.savefig(here / "{stem}.png", dpi=150)
'''


def emit_figure_data(manifest, figure: Optional[str] = None, out_path=None,
                     plot_script: bool = True) -> Path:
    """Merge the traces of ``manifest`` into ``run_id,label,t,J_gap`` rows.

    ``manifest`` is a manifest dict or a path to one (or to its
    directory).  Returns the path of the merged CSV.

    Raises
    ------
    MissingTracesError
        Listing every run id whose CSV is absent.
    """
    if not isinstance(manifest, dict):
        manifest = load_manifest(manifest)
    directory = Path(manifest["directory"])
    figure = figure or manifest.get("figure") or manifest["name"]
    missing = [r["run_id"] for r in manifest["runs"] if not (directory / r["csv"]).exists()]
    if missing:
        raise MissingTracesError(missing)
    j_star = float(manifest["j_star"])
    out_path = Path(out_path) if out_path else directory / f"{figure}_data.csv"
    lines = ["run_id,label,t,J_gap"]
    for r in manifest["runs"]:
        trace = RunTrace.from_csv(directory / r["csv"])
        gap = trace.J - j_star
        for t, g in zip(trace.t.tolist(), gap.tolist()):
            lines.append(f"{r['run_id']},{r['label']},{t},{g!r}")
    out_path.write_text("\n".join(lines) + "\n")
    if plot_script:
        script = _PLOT_SCRIPT.format(name=figure, csv=out_path.name, stem=out_path.stem,
                                     scale=manifest.get("scale") or "custom")
        (out_path.parent / f"plot_{figure}.py").write_text(script)
    return out_path


def series_count(path) -> int:
    """Number of distinct labels in a merged figure CSV."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    return len(set(np.atleast_1d(data["label"]).tolist()))
