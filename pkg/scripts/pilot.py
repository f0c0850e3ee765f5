"""Design-calibration pilot: rejection rates for candidate (m, r) defaults.

Writes one JSON line per completed cell to the log; safe to re-run.
"""

import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import multiprocessing
import numpy as np
from threadpoolctl import threadpool_limits

import stcov
from stcov.reproduce import grid_sites
from stcov.simulate import BlockSampler

SITES = grid_sites(4, 4)

CELLS = [
    # label, spec json, kind, n runs, m, r, p
    ("b0_m2r3", {"family": "gneiting_sep", "params": {"beta": 0.0}}, "separability", 16, 2, 3, 2000),
    ("b1_m2r3", {"family": "gneiting_sep", "params": {"beta": 1.0}}, "separability", 16, 2, 3, 2000),
    ("b05_m2r3", {"family": "gneiting_sep", "params": {"beta": 0.5}}, "separability", 12, 2, 3, 2000),
    ("chs_m2r3", {"family": "cressie_huang_sep", "params": {}}, "separability", 12, 2, 3, 2000),
    ("chn_m2r3", {"family": "cressie_huang_nonsep", "params": {}}, "separability", 12, 2, 3, 2000),
    ("l0_m2r3", {"family": "gneiting_asym", "params": {"lambda": 0.0}}, "symmetry", 12, 2, 3, 2000),
    ("l01_m2r3", {"family": "gneiting_asym", "params": {"lambda": 0.1}}, "symmetry", 16, 2, 3, 2000),
    ("l005_m2r3", {"family": "gneiting_asym", "params": {"lambda": 0.05}}, "symmetry", 10, 2, 3, 2000),
    ("b1_desk_m2r3", {"family": "gneiting_sep", "params": {"beta": 1.0}}, "separability", 10, 2, 3, 500),
    ("b0_desk_m2r3", {"family": "gneiting_sep", "params": {"beta": 0.0}}, "separability", 10, 2, 3, 500),
    ("l01_m1r1", {"family": "gneiting_asym", "params": {"lambda": 0.1}}, "symmetry", 12, 1, 1, 2000),
]

_CTX = {}


def _init():
    threadpool_limits(limits=1)


def _one(args):
    label, model, kind, run, m, r, p = args
    spec = stcov.spec_from_json(model)
    sampler = BlockSampler(spec, SITES, block_len=100)
    ds = sampler.dataset(p, (4001, hash(label) % 10_000, run), 0)
    cfg = stcov.RankTestConfig(kind=kind, seed=(4002, hash(label) % 10_000, run), b=100, m=m, r=r)
    t0 = time.time()
    rep = stcov.rank_test(ds, cfg)
    return label, run, rep.p_value, time.time() - t0


def main():
    jobs = []
    for label, model, kind, runs, m, r, p in CELLS:
        for run in range(runs):
            jobs.append((label, model, kind, run, m, r, p))
    results = {}
    ctx = multiprocessing.get_context("fork")
    t0 = time.time()
    with ProcessPoolExecutor(max_workers=2, mp_context=ctx, initializer=_init) as ex:
        for label, run, p, dt in ex.map(_one, jobs):
            results.setdefault(label, []).append(p)
            print(
                json.dumps({"label": label, "run": run, "p": p, "sec": round(dt, 1)}),
                flush=True,
            )
    print("\n=== SUMMARY ===", flush=True)
    for label, _, _, runs, m, r, p in CELLS:
        ps = np.array(results.get(label, []))
        if ps.size:
            print(
                f"{label:16s} n={ps.size:3d} rej@.05={np.mean(ps <= .05):.2f} "
                f"rej@.01={np.mean(ps <= .01):.2f}",
                flush=True,
            )
    print(f"total {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
