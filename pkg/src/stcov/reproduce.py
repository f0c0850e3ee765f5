"""Simulation-study harness reproducing the rejection-rate tables.

Each table cell pins a generating covariance model; every run simulates a
fresh 4x4-grid dataset (p=2000 at paper scale, block length 100), runs the
rank test with b=100 bootstrap replicates, and records the p-value.  The
harness emits a wide CSV (one column per cell, rows for the 5% and 1%
levels) plus binomial standard errors, keeps an append-only progress file
so interrupted studies resume by seed bookkeeping, and is deterministic in
(seed, table, scale) regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import multiprocessing
import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigError
from .models import spec_from_json
from .ranktest import RankTestConfig, rank_test
from .simulate import BlockSampler

__all__ = ["TABLES", "TableSpec", "run_table", "grid_sites"]

ALPHAS = (0.05, 0.01)
OBS_DATA_LABEL = 9999


@dataclass(frozen=True)
class TableSpec:
    name: str
    kind: str
    cells: tuple          # (label, model_json_dict) pairs
    desk_cells: tuple     # subset used at desk scale


def _gneiting(beta):
    return {"family": "gneiting_sep", "params": {"beta": beta}}


def _asym(lam):
    return {"family": "gneiting_asym", "params": {"lambda": lam}}


TABLES = {
    "table2": TableSpec(
        name="table2",
        kind="separability",
        cells=tuple((f"beta={b:g}", _gneiting(b)) for b in (0.0, 0.25, 0.5, 0.75, 1.0)),
        desk_cells=tuple((f"beta={b:g}", _gneiting(b)) for b in (0.0, 1.0)),
    ),
    "table3": TableSpec(
        name="table3",
        kind="separability",
        cells=(
            ("CH_sep", {"family": "cressie_huang_sep", "params": {}}),
            ("CH_nsep", {"family": "cressie_huang_nonsep", "params": {}}),
        ),
        desk_cells=(
            ("CH_sep", {"family": "cressie_huang_sep", "params": {}}),
            ("CH_nsep", {"family": "cressie_huang_nonsep", "params": {}}),
        ),
    ),
    "table4": TableSpec(
        name="table4",
        kind="symmetry",
        cells=tuple(
            (f"lambda={v:g}", _asym(v)) for v in (0.0, 0.025, 0.05, 0.075, 0.1)
        ),
        desk_cells=tuple((f"lambda={v:g}", _asym(v)) for v in (0.0, 0.1)),
    ),
}

SCALES = {
    "paper": {"p": 2000, "runs": 100},
    "desk": {"p": 500, "runs": 50},
}


def grid_sites(nx: int = 4, ny: int = 4) -> np.ndarray:
    """Regular nx x ny grid of sites in the unit square."""
    xs = np.linspace(0.0, 1.0, nx)
    ys = np.linspace(0.0, 1.0, ny)
    return np.array([(x, y) for x in xs for y in ys])


_CELL_CTX: dict = {}


def _cell_worker_init():
    threadpool_limits(limits=1)


def _cell_run(run: int) -> dict:
    ctx = _CELL_CTX
    seed_tuple = (int(ctx["seed"]), ctx["table_idx"], ctx["cell_idx"], run)
    ds = ctx["sampler"].dataset(ctx["p"], seed_tuple, OBS_DATA_LABEL)
    cfg = RankTestConfig(
        kind=ctx["kind"],
        seed=seed_tuple,
        max_lag=ctx["max_lag"],
        b=ctx["b"],
        threads=1,
    )
    report = rank_test(ds, cfg)
    return {
        "table": ctx["table"],
        "cell": ctx["cell_label"],
        "cell_idx": ctx["cell_idx"],
        "run": run,
        "p_value": report.p_value,
        "W": report.W,
        "seed": list(seed_tuple),
    }


def _load_progress(path: Path) -> dict:
    done = {}
    if path.exists():
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                done[(rec["cell"], rec["run"])] = rec
    return done


def run_table(
    table: str,
    out_dir,
    seed: int,
    scale: str = "paper",
    runs: int | None = None,
    b: int = 100,
    p: int | None = None,
    threads: int = 1,
    max_lag: int = 10,
    block_len: int = 100,
    resume: bool = True,
    progress: bool = True,
) -> dict:
    """Run one table's simulation study; returns {cell: {alpha: rate}}.

    Outputs under ``out_dir``: ``<table>.csv`` (rates plus binomial SEs),
    ``<table>_runs.jsonl`` (sorted per-run records), ``<table>.meta.json``
    (resolved configuration), and ``<table>.progress.jsonl`` (append-only
    scratch enabling resume; completion order is scheduling-dependent).
    """
    if table not in TABLES:
        raise ConfigError(f"unknown table {table!r}; known: {sorted(TABLES)}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; known: {sorted(SCALES)}")
    spec = TABLES[table]
    p = SCALES[scale]["p"] if p is None else int(p)
    runs = SCALES[scale]["runs"] if runs is None else int(runs)
    if p % block_len != 0:
        raise ConfigError(f"p={p} must be divisible by the block length {block_len}")
    cells = spec.cells if scale == "paper" else spec.desk_cells
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    progress_path = out_dir / f"{table}.progress.jsonl"
    if not resume and progress_path.exists():
        progress_path.unlink()
    done = _load_progress(progress_path) if resume else {}
    table_idx = sorted(TABLES).index(table)
    sites = grid_sites()

    t0 = time.time()
    records = list(done.values())
    with threadpool_limits(limits=1):
        for cell_idx, (label, model_json) in enumerate(cells):
            todo = [r for r in range(runs) if (label, r) not in done]
            if not todo:
                continue
            model = spec_from_json(model_json)
            sampler = BlockSampler(model, sites, block_len=block_len)
            _CELL_CTX.clear()
            _CELL_CTX.update(
                {
                    "table": table,
                    "table_idx": table_idx,
                    "cell_idx": cell_idx,
                    "cell_label": label,
                    "kind": spec.kind,
                    "sampler": sampler,
                    "p": p,
                    "b": b,
                    "max_lag": max_lag,
                    "seed": seed,
                }
            )
            with open(progress_path, "a") as prog:
                if threads > 1:
                    ctx = multiprocessing.get_context("fork")
                    with ProcessPoolExecutor(
                        max_workers=threads, mp_context=ctx, initializer=_cell_worker_init
                    ) as ex:
                        futures = {ex.submit(_cell_run, r): r for r in todo}
                        for k, fut in enumerate(as_completed(futures), start=1):
                            rec = fut.result()
                            records.append(rec)
                            prog.write(json.dumps(rec, sort_keys=True) + "\n")
                            prog.flush()
                            _say(progress, table, label, k, len(todo), t0)
                else:
                    for k, r in enumerate(todo, start=1):
                        rec = _cell_run(r)
                        records.append(rec)
                        prog.write(json.dumps(rec, sort_keys=True) + "\n")
                        prog.flush()
                        _say(progress, table, label, k, len(todo), t0)
            _CELL_CTX.clear()

    records.sort(key=lambda rec: (rec["cell_idx"], rec["run"]))
    with open(out_dir / f"{table}_runs.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    labels = [label for label, _ in cells]
    rates: dict[str, dict[float, float]] = {}
    ses: dict[str, dict[float, float]] = {}
    for label in labels:
        pvals = np.array([rec["p_value"] for rec in records if rec["cell"] == label])
        rates[label] = {}
        ses[label] = {}
        for alpha in ALPHAS:
            rate = float(np.mean(pvals <= alpha)) if pvals.size else float("nan")
            rates[label][alpha] = rate
            ses[label][alpha] = (
                float(np.sqrt(rate * (1.0 - rate) / pvals.size)) if pvals.size else float("nan")
            )

    with open(out_dir / f"{table}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha"] + labels + [f"se({c})" for c in labels])
        for alpha in ALPHAS:
            w.writerow(
                [alpha]
                + [f"{rates[c][alpha]:.4f}" for c in labels]
                + [f"{ses[c][alpha]:.4f}" for c in labels]
            )

    meta = {
        "table": table,
        "kind": spec.kind,
        "scale": scale,
        "p": p,
        "runs": runs,
        "b": b,
        "max_lag": max_lag,
        "block_len": block_len,
        "seed": seed,
        "alphas": list(ALPHAS),
        "cells": [{"label": label, "model": mj} for label, mj in cells],
        "sites": "4x4 regular grid on the unit square",
    }
    with open(out_dir / f"{table}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rates


def _say(enabled: bool, table: str, label: str, k: int, total: int, t0: float):
    if enabled:
        print(
            f"[reproduce] {table} {label}: {k}/{total} runs ({time.time() - t0:.0f}s elapsed)",
            file=sys.stderr,
            flush=True,
        )
