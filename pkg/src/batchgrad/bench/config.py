"""Experiment configuration: flat JSON keys, grid expansion and figure presets.

Config files are JSON objects with dotted keys (nested objects are
flattened, so ``{"schedule": {"p": 1}}`` equals ``{"schedule.p": 1}``)::

    name                  experiment name (used for the output directory)
    objective.name        quadratic_logsumexp | strongly_convex_quadratic | example21
    objective.<param>     factory parameters, e.g. objective.d, objective.cond_number
    schedule.alpha0, schedule.c0, schedule.tau, schedule.p, schedule.q
    algorithm             batch_update | heavy_ball | nag | adam | nadam | rmsprop
    direction.option      O1 .. O4, O1A .. O4A
    direction.rho         Bernoulli rate for O4/O4A
    direction.n_coords    draws per step for O3/O3A
    noise.kind            none | gaussian_snr
    noise.snr_db          SNR in dB for gaussian_snr
    horizon               iterations per run
    repetitions           runs per grid cell
    master_seed           root of every run seed
    record_every          trace row spacing
    momentum_step         constant | schedule
    theta0                "ones" | "zeros" | explicit list
    override_conditions   run even if the schedule conditions fail
    workers               parallel processes

Any of ``algorithm``, ``direction.option``, ``direction.rho``,
``direction.n_coords`` and ``noise.snr_db`` may be a list; the grid is
their Cartesian product.  An explicit ``cells`` list of objects with the
same keys replaces the product.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..schedules import Schedule

__all__ = ["ExperimentConfig", "load_config", "config_from_dict", "preset", "flatten",
           "PAPER_SCHEDULE", "FIGURES"]

PAPER_SCHEDULE = Schedule(alpha0=0.01, c0=0.01, tau=200.0, p=1.0, q=0.02)
GRID_KEYS = ("algorithm", "direction.option", "direction.rho", "direction.n_coords",
             "noise.snr_db")
FIGURES = ("fig1", "fig2", "fig3")
ALGO_LABELS = {"batch_update": "BU", "heavy_ball": "HB", "nag": "NAG", "adam": "ADAM",
               "nadam": "NADAM", "rmsprop": "RMSPROP"}


@dataclass
class ExperimentConfig:
    name: str
    objective: dict
    cells: list
    schedule: Schedule = PAPER_SCHEDULE
    horizon: int = 200_000
    repetitions: int = 3
    master_seed: int = 0
    record_every: int = 100
    momentum_step: str = "constant"
    theta0: object = "ones"
    override_conditions: bool = False
    workers: int = 1
    scale: Optional[str] = None
    out_dir: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for cell in self.cells:
            cell.setdefault("algorithm", "batch_update")
            cell.setdefault("rho", 1.0)
            cell.setdefault("n_coords", 1)
            cell.setdefault("snr_db", None)
            if "option" not in cell:
                raise ValueError(f"cell {cell!r} has no direction option")

    def to_dict(self) -> dict:
        return {
            "name": self.name, "objective": self.objective, "cells": self.cells,
            "schedule": self.schedule.to_dict(), "horizon": self.horizon,
            "repetitions": self.repetitions, "master_seed": self.master_seed,
            "record_every": self.record_every, "momentum_step": self.momentum_step,
            "theta0": self.theta0, "override_conditions": self.override_conditions,
            "scale": self.scale,
        }


def cell_label(cell: dict, figure: Optional[str] = None) -> str:
    opt = cell["option"]
    rate = f" rho={cell['rho']:g}" if opt in ("O4", "O4A") else ""
    if figure == "fig3":
        return f"rho={cell['rho']:g}"
    return f"{ALGO_LABELS.get(cell['algorithm'], cell['algorithm'])} {opt}{rate}"


def flatten(data: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict) and key != "cells":
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _cell_from_flat(flat: dict) -> dict:
    cell = {
        "algorithm": flat.get("algorithm", "batch_update"),
        "option": flat.get("direction.option", flat.get("option")),
        "rho": float(flat.get("direction.rho", flat.get("rho", 1.0))),
        "n_coords": int(flat.get("direction.n_coords", flat.get("n_coords", 1))),
        "snr_db": flat.get("noise.snr_db", flat.get("snr_db")),
    }
    if flat.get("noise.kind", "gaussian_snr") == "none":
        cell["snr_db"] = None
    return cell


def config_from_dict(data: dict) -> ExperimentConfig:
    flat = flatten(data)
    known = {"name", "cells", "horizon", "repetitions", "master_seed", "record_every",
             "momentum_step", "theta0", "override_conditions", "workers", "scale",
             "out_dir", "noise.kind", *GRID_KEYS}
    objective = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("objective.")}
    if "name" not in objective:
        raise ValueError("config needs objective.name")
    sched = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("schedule.")}
    unknown = [k for k in flat if k not in known
               and not k.startswith(("objective.", "schedule."))]
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "cells" in flat:
        cells = [_cell_from_flat({**{k: flat[k] for k in ("noise.kind",) if k in flat},
                                  **flatten(c)}) for c in flat["cells"]]
    else:
        axes = [_as_list(flat[k]) if k in flat else [None] for k in GRID_KEYS]
        cells = []
        for combo in itertools.product(*axes):
            sub = {k: v for k, v in zip(GRID_KEYS, combo) if v is not None}
            if "direction.option" not in sub:
                continue
            if "noise.kind" in flat:
                sub["noise.kind"] = flat["noise.kind"]
            cells.append(_cell_from_flat(sub))
    return ExperimentConfig(
        name=flat.get("name", "experiment"),
        objective=objective,
        cells=cells,
        schedule=Schedule(**{**PAPER_SCHEDULE.to_dict(), **sched}),
        horizon=int(flat.get("horizon", 200_000)),
        repetitions=int(flat.get("repetitions", 3)),
        master_seed=int(flat.get("master_seed", 0)),
        record_every=int(flat.get("record_every", 100)),
        momentum_step=flat.get("momentum_step", "constant"),
        theta0=flat.get("theta0", "ones"),
        override_conditions=bool(flat.get("override_conditions", False)),
        workers=int(flat.get("workers", 1)),
        scale=flat.get("scale"),
        out_dir=flat.get("out_dir"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with path.open() as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return config_from_dict(data)


_SCALES = {
    # d, horizon for exact-gradient figures, horizon for finite-difference figures
    "desk": (100, 200_000, 500_000),
    "paper": (1000, 1_000_000, 2_500_000),
}


def preset(figure: str, scale: str = "desk", master_seed: int = 0,
           repetitions: int = 3) -> ExperimentConfig:
    """Desk- or paper-scale reproduction presets for the three figures.

    All presets use cond 100, SNR 50 dB and the schedule
    ``alpha0 = c0 = 0.01, tau = 200, p = 1, q = 0.02``.
    """
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {FIGURES}")
    if scale not in _SCALES:
        raise ValueError(f"unknown scale {scale!r}")
    d, t_exact, t_approx = _SCALES[scale]
    algos = list(ALGO_LABELS)
    if figure == "fig3":
        cells = [{"algorithm": "batch_update", "option": "O4", "rho": r, "snr_db": 50.0}
                 for r in (0.05, 0.1, 0.2, 0.5, 1.0)]
        horizon = t_exact
    else:
        opts = ("O1", "O4") if figure == "fig1" else ("O1A", "O4A")
        cells = [{"algorithm": a, "option": o, "rho": 0.2 if o.startswith("O4") else 1.0,
                  "snr_db": 50.0} for o in opts for a in algos]
        horizon = t_exact if figure == "fig1" else t_approx
    return ExperimentConfig(
        name=f"{figure}-{scale}",
        objective={"name": "quadratic_logsumexp", "d": d, "cond_number": 100.0, "seed": 7},
        cells=cells,
        horizon=horizon,
        repetitions=repetitions,
        master_seed=master_seed,
        record_every=max(horizon // 2000, 1),
        scale=scale,
        extra={"figure": figure},
    )
