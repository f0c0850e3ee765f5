"""Space-time dataset container and file formats.

The on-disk format is a "wide" CSV with one row per site: columns
``x,y,t1,...,tp``.  Floats are written with ``repr`` so a read back is
bit-exact.  A sidecar ``<stem>.meta.json`` carries seed/model metadata for
simulated datasets.  A long-format reader (``site,x,y,t,value[,class]``)
covers station exports.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = [
    "SpaceTimeDataset",
    "write_dataset_csv",
    "read_dataset_csv",
    "read_dataset_long_csv",
    "meta_path_for",
    "deseason_monthly",
]


@dataclass
class SpaceTimeDataset:
    """n sites with planar coordinates by p equally spaced scalar observations.

    ``values[i]`` is the series observed at ``sites[i]``; time spacing is a
    fixed ``dt`` (1 by default).  ``meta`` records provenance (seed and
    generating model) for simulated data.
    """

    sites: np.ndarray
    values: np.ndarray
    dt: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sites = np.asarray(self.sites, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.sites.ndim != 2 or self.sites.shape[1] != 2:
            raise ConfigError(f"sites must be (n, 2), got shape {self.sites.shape}")
        if self.values.ndim != 2:
            raise ConfigError(f"values must be (n, p), got shape {self.values.shape}")
        if self.sites.shape[0] != self.values.shape[0]:
            raise ConfigError(
                f"{self.sites.shape[0]} sites but {self.values.shape[0]} series rows"
            )
        if self.n_sites < 1 or self.n_times < 1:
            raise ConfigError("dataset needs at least one site and one time point")
        if not np.all(np.isfinite(self.sites)) or not np.all(np.isfinite(self.values)):
            raise ConfigError("dataset contains non-finite values")
        if np.unique(self.sites, axis=0).shape[0] != self.n_sites:
            raise ConfigError("site coordinates must be pairwise distinct")

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    def times(self) -> np.ndarray:
        return np.arange(self.n_times, dtype=float) * self.dt

    def equal_values(self, other: "SpaceTimeDataset") -> bool:
        return np.array_equal(self.sites, other.sites) and np.array_equal(
            self.values, other.values
        )


def meta_path_for(csv_path) -> Path:
    return Path(csv_path).with_suffix(".meta.json")


def write_dataset_csv(ds: SpaceTimeDataset, path, write_meta: bool = True) -> Path:
    """Write the wide CSV (and the sidecar metadata JSON unless disabled)."""
    path = Path(path)
    p = ds.n_times
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"] + [f"t{k}" for k in range(1, p + 1)])
        for i in range(ds.n_sites):
            row = [repr(float(ds.sites[i, 0])), repr(float(ds.sites[i, 1]))]
            row += [repr(float(v)) for v in ds.values[i]]
            w.writerow(row)
    if write_meta:
        meta = dict(ds.meta)
        meta.setdefault("dt", ds.dt)
        with open(meta_path_for(path), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def read_dataset_csv(path) -> SpaceTimeDataset:
    """Read a wide CSV written by :func:`write_dataset_csv`."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty dataset file")
    header = rows[0]
    if len(header) < 3 or header[:2] != ["x", "y"]:
        raise ConfigError(f"{path}: expected header x,y,t1,...,tp, got {header[:3]}...")
    p = len(header) - 2
    sites, values = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != p + 2:
            raise ConfigError(f"{path}: row {ln} has {len(row)} fields, expected {p + 2}")
        try:
            nums = [float(v) for v in row]
        except ValueError as exc:
            raise ConfigError(f"{path}: row {ln}: {exc}") from exc
        sites.append(nums[:2])
        values.append(nums[2:])
    meta = {}
    mp = meta_path_for(path)
    if mp.exists():
        with open(mp) as fh:
            meta = json.load(fh)
    dt = float(meta.get("dt", 1.0))
    return SpaceTimeDataset(np.array(sites), np.array(values), dt=dt, meta=meta)


def read_dataset_long_csv(path, class_filter: str | None = None) -> SpaceTimeDataset:
    """Read a long-format CSV: columns site,x,y,t,value and optionally class.

    Observations are pivoted to the wide layout; every site must cover the
    same time grid.  ``class_filter`` keeps only rows whose class column
    matches (for hand-grouped station sets).
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        required = ["site", "x", "y", "t", "value"]
        missing = [c for c in required if c not in cols]
        if missing:
            raise ConfigError(f"{path}: long format missing columns {missing}")
        if class_filter is not None and "class" not in cols:
            raise ConfigError(f"{path}: --class-filter given but no 'class' column")
        per_site: dict[str, dict] = {}
        for ln, row in enumerate(reader, start=2):
            if class_filter is not None and row["class"].strip() != class_filter:
                continue
            sid = row["site"].strip()
            try:
                x, y, t, v = (float(row[c]) for c in ("x", "y", "t", "value"))
            except ValueError as exc:
                raise ConfigError(f"{path}: row {ln}: {exc}") from exc
            entry = per_site.setdefault(sid, {"xy": (x, y), "obs": {}})
            if entry["xy"] != (x, y):
                raise ConfigError(f"{path}: site {sid} has inconsistent coordinates")
            entry["obs"][t] = v
    if not per_site:
        raise ConfigError(f"{path}: no rows matched")
    t_grids = [tuple(sorted(e["obs"])) for e in per_site.values()]
    if len(set(t_grids)) != 1:
        raise ConfigError(f"{path}: sites do not share a common time grid")
    tgrid = t_grids[0]
    order = sorted(per_site)
    sites = np.array([per_site[s]["xy"] for s in order])
    values = np.array([[per_site[s]["obs"][t] for t in tgrid] for s in order])
    dt = float(tgrid[1] - tgrid[0]) if len(tgrid) > 1 else 1.0
    return SpaceTimeDataset(sites, values, dt=dt, meta={"site_ids": order})


def deseason_monthly(ds: SpaceTimeDataset, months) -> SpaceTimeDataset:
    """Subtract per-site means over equal month labels (seasonality removal).

    ``months`` assigns a calendar-month label to each time index (length p);
    for each site, the mean over each label group is removed.
    """
    months = np.asarray(months)
    if months.shape != (ds.n_times,):
        raise ConfigError(
            f"month labels must have length {ds.n_times}, got {months.shape}"
        )
    values = ds.values.copy()
    for label in np.unique(months):
        sel = months == label
        values[:, sel] -= values[:, sel].mean(axis=1, keepdims=True)
    meta = dict(ds.meta)
    meta["deseason"] = "monthly-mean removed"
    return SpaceTimeDataset(ds.sites.copy(), values, dt=ds.dt, meta=meta)
