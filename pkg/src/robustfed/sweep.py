"""Grid sweeps over defenses, attacks, seeds, and client counts.

One training run per grid point, parallelizable across points only, so each
run keeps its per-config determinism. Summary cells are recomputed purely
from the per-run rows and mirror the defenses-by-attacks tables with a
worst-case-across-attacks column per defense.
"""

from __future__ import annotations

import csv
import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, _Section, config_from_dict, config_to_dict
from .runner import execute_run

RUNS_COLUMNS = (
    "defense",
    "attack",
    "n_clients",
    "n_byzantine",
    "seed",
    "final_accuracy",
    "worst_round_accuracy",
    "status",
    "error",
    "output_dir",
)

DEFAULT_MAX_RUNS = 500


@dataclass
class SweepSpec:
    """Base config plus named axes; the grid is their Cartesian product."""

    base: dict
    defenses: list[dict] = field(default_factory=list)
    attacks: list[dict] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    f_values: list[int] = field(default_factory=list)
    n_values: list[int] = field(default_factory=list)
    max_runs: int = DEFAULT_MAX_RUNS


def parse_sweep(text: str) -> SweepSpec:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err}") from None
    if not isinstance(document, dict):
        raise ConfigError("top level: expected an object")
    root = _Section(document, "")
    base = root.take("base")
    if not isinstance(base, dict):
        raise ConfigError("base: expected an object")
    axes_section = root.child("axes")
    spec = SweepSpec(base=base, max_runs=root.take_int("max_runs", DEFAULT_MAX_RUNS))
    if axes_section is not None:
        spec.defenses = axes_section.take("defenses", [])
        spec.attacks = axes_section.take("attacks", [])
        spec.seeds = axes_section.take("seeds", [])
        spec.f_values = axes_section.take("f_values", [])
        spec.n_values = axes_section.take("n_values", [])
        axes_section.finish()
    root.finish()
    for name in ("defenses", "attacks", "seeds", "f_values", "n_values"):
        if not isinstance(getattr(spec, name), list):
            raise ConfigError(f"axes.{name}: expected a list")
    return spec


def expand_grid(spec: SweepSpec, sweep_dir: Path) -> list[ExperimentConfig]:
    """Materialize one validated config per grid point, each with its own
    output directory under the sweep root."""
    defenses = spec.defenses or [None]
    attacks = spec.attacks or [None]
    seeds = spec.seeds or [None]
    f_values = spec.f_values or [None]
    n_values = spec.n_values or [None]

    total = len(defenses) * len(attacks) * len(seeds) * len(f_values) * len(n_values)
    if total > spec.max_runs:
        raise ConfigError(f"grid of {total} runs exceeds max_runs={spec.max_runs}")

    configs = []
    index = 0
    for n in n_values:
        for f in f_values:
            for defense in defenses:
                for attack in attacks:
                    for seed in seeds:
                        document = json.loads(json.dumps(spec.base))  # deep copy
                        if n is not None:
                            document["n_clients"] = n
                        if f is not None:
                            document["n_byzantine"] = f
                        if defense is not None:
                            document["defense"] = defense
                        if attack is not None:
                            document["attack"] = attack
                        if seed is not None:
                            document["seed"] = seed
                        document["output_path"] = str(sweep_dir / "points" / f"point{index:04d}")
                        configs.append(config_from_dict(document))
                        index += 1
    return configs


def _run_point(payload: dict) -> dict:
    """Worker body; failures are reported as rows, never raised."""
    cfg = config_from_dict(payload)
    row = {
        "defense": cfg.defense.label(),
        "attack": cfg.attack.label(),
        "n_clients": cfg.n_clients,
        "n_byzantine": cfg.n_byzantine,
        "seed": cfg.seed,
        "final_accuracy": "",
        "worst_round_accuracy": "",
        "status": "ok",
        "error": "",
        "output_dir": cfg.output_path,
    }
    try:
        artifacts = execute_run(cfg)
        row["final_accuracy"] = repr(artifacts.final_accuracy)
        row["worst_round_accuracy"] = repr(artifacts.worst_round_accuracy)
    except Exception as err:  # noqa: BLE001 - the sweep must survive bad cells
        row["status"] = "error"
        row["error"] = f"{type(err).__name__}: {err}"
        traceback.print_exc()
    return row


def run_sweep(spec: SweepSpec, sweep_dir: Path, jobs: int = 1) -> list[dict]:
    """Execute the grid, write runs.csv and summary.csv, return the run rows."""
    sweep_dir = Path(sweep_dir)
    sweep_dir.mkdir(parents=True, exist_ok=True)
    configs = expand_grid(spec, sweep_dir)
    payloads = [config_to_dict(cfg) for cfg in configs]

    if jobs <= 1:
        rows = [_run_point(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, payloads))

    with open(sweep_dir / "runs.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RUNS_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    header, summary_rows = build_summary(rows)
    with open(sweep_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(summary_rows)
    return rows


def build_summary(rows: list[dict]) -> tuple[list[str], list[list]]:
    """Aggregate run rows into defense-by-attack cells.

    Cells hold mean and population std of final accuracy over seeds; the last
    column is each defense row's minimum cell mean across attacks. Pure
    function of the rows so the table can be recomputed offline from runs.csv.
    """
    attacks = sorted({row["attack"] for row in rows})
    groups: dict[tuple, dict[str, list[float]]] = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        key = (row["defense"], int(row["n_clients"]), int(row["n_byzantine"]))
        cell = groups.setdefault(key, {})
        cell.setdefault(row["attack"], []).append(float(row["final_accuracy"]))

    header = ["defense", "n_clients", "n_byzantine"]
    for attack in attacks:
        header += [f"{attack}_mean", f"{attack}_std"]
    header.append("worst_case")

    out = []
    for key in sorted(groups):
        defense, n, f = key
        row: list = [defense, n, f]
        means = []
        for attack in attacks:
            values = groups[key].get(attack, [])
            if values:
                mean = float(np.mean(values))
                std = float(np.std(values))
                row += [repr(mean), repr(std)]
                means.append(mean)
            else:
                row += ["", ""]
        row.append(repr(min(means)) if means else "")
        out.append(row)
    return header, out
