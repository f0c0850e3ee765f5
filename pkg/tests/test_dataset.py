import numpy as np
import pytest

from stcov import SpaceTimeDataset, read_dataset_csv, write_dataset_csv
from stcov.dataset import deseason_monthly, meta_path_for, read_dataset_long_csv
from stcov.errors import ConfigError
from stcov.rng import substream


def test_dataset_validation():
    with pytest.raises(ConfigError):
        SpaceTimeDataset(np.zeros((2, 3)), np.zeros((2, 5)))
    with pytest.raises(ConfigError):
        SpaceTimeDataset(np.array([[0.0, 0.0], [0.0, 0.0]]), np.zeros((2, 5)))
    with pytest.raises(ConfigError):
        SpaceTimeDataset(np.array([[0.0, 0.0], [1.0, 0.0]]), np.full((2, 5), np.nan))
    with pytest.raises(ConfigError):
        SpaceTimeDataset(np.array([[0.0, 0.0], [1.0, 0.0]]), np.zeros((3, 5)))


def test_csv_round_trip_exact(tmp_path):
    rng = substream(1)
    ds = SpaceTimeDataset(
        np.array([[0.0, 0.0], [1.0 / 3.0, 0.0], [0.0, 2.0 / 3.0]]),
        rng.standard_normal((3, 17)) * 1e-7,
        meta={"seed": 1},
    )
    path = tmp_path / "data.csv"
    write_dataset_csv(ds, path)
    back = read_dataset_csv(path)
    assert np.array_equal(back.sites, ds.sites)
    assert np.array_equal(back.values, ds.values)
    assert back.meta["seed"] == 1
    assert meta_path_for(path).exists()


def test_csv_rejects_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,t1\n1,2,3\n")
    with pytest.raises(ConfigError):
        read_dataset_csv(p)
    p.write_text("x,y,t1\n1,2\n")
    with pytest.raises(ConfigError):
        read_dataset_csv(p)
    p.write_text("x,y,t1\n1,2,zap\n")
    with pytest.raises(ConfigError):
        read_dataset_csv(p)


def test_long_format_pivot_and_class_filter(tmp_path):
    p = tmp_path / "long.csv"
    rows = ["site,x,y,t,value,class"]
    layout = {"a": (0.0, 0.0, "coastal"), "b": (1.0, 0.0, "coastal"), "c": (2.0, 0.0, "inland")}
    for k, (sid, (x, y, cls)) in enumerate(layout.items()):
        for t in (1.0, 2.0, 3.0):
            rows.append(f"{sid},{x},{y},{t},{k * 10 + t},{cls}")
    p.write_text("\n".join(rows) + "\n")
    ds = read_dataset_long_csv(p)
    assert ds.n_sites == 3 and ds.n_times == 3
    assert ds.values[1, 2] == 13.0  # site b at t=3
    coastal = read_dataset_long_csv(p, class_filter="coastal")
    assert coastal.n_sites == 2
    assert coastal.meta["site_ids"] == ["a", "b"]
    bad = tmp_path / "ragged.csv"
    bad.write_text("site,x,y,t,value\na,0,0,1,5\na,0,0,2,6\nb,1,0,1,7\n")
    with pytest.raises(ConfigError):
        read_dataset_long_csv(bad)


def test_deseason_monthly_removes_label_means():
    rng = substream(2)
    vals = rng.standard_normal((2, 12))
    months = np.array([1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4])
    ds = SpaceTimeDataset(np.array([[0.0, 0.0], [1.0, 0.0]]), vals)
    out = deseason_monthly(ds, months)
    for label in (1, 2, 3, 4):
        sel = months == label
        assert np.allclose(out.values[:, sel].mean(axis=1), 0.0, atol=1e-14)
    with pytest.raises(ConfigError):
        deseason_monthly(ds, months[:5])
