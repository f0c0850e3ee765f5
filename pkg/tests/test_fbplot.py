import xml.etree.ElementTree as ET

import numpy as np
import pytest

import stcov
from stcov import functional_boxplot, render_svg
from stcov.estimate import all_pairs_test_fns
from stcov.fbplot import summary_to_json_dict, write_fbplot
from stcov.rng import substream
from stcov.simulate import KronSampler
from stcov.dataset import SpaceTimeDataset


def test_constant_curves_summary():
    Y = np.array([[0.0] * 5, [1.0] * 5, [2.0] * 5])
    s = functional_boxplot(Y, factor=1.5)
    assert s.median_index == 1
    # deepest 2 of 3: the median and, by the index tie rule, curve 0
    assert sorted(s.central_indices) == [0, 1]
    assert np.all(s.central_lower == 0.0) and np.all(s.central_upper == 1.0)
    assert np.all(s.fence_lower == -1.5) and np.all(s.fence_upper == 2.5)
    assert s.outlier_indices == ()  # curve 2 sits inside the fences
    assert np.all(s.whisker_upper == 2.0)


def test_identical_curves_zero_width():
    Y = np.tile(np.sin(np.arange(6.0)), (5, 1))
    s = functional_boxplot(Y)
    assert np.array_equal(s.central_lower, s.central_upper)
    assert s.outlier_indices == ()


def test_displaced_curve_flagged_outlier():
    rng = substream(1)
    Y = rng.standard_normal((9, 7))
    Y[4] = Y[4] + 100.0 * np.abs(Y).max()
    s = functional_boxplot(Y)
    assert 4 in s.outlier_indices
    assert s.median_index != 4


def test_outliers_shrink_as_factor_grows():
    rng = substream(2)
    Y = rng.standard_normal((12, 6))
    Y[0] *= 8.0
    Y[5] *= 20.0
    sizes = [
        len(functional_boxplot(Y, factor=f).outlier_indices) for f in (0.5, 1.0, 1.5, 3.0, 50.0)
    ]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))
    assert sizes[-1] == 0


def test_median_never_outlier():
    for seed in range(5):
        Y = substream(seed).standard_normal((8, 5))
        s = functional_boxplot(Y)
        assert s.median_index not in s.outlier_indices


def test_fence_invariant():
    Y = substream(3).standard_normal((7, 6))
    s = functional_boxplot(Y, factor=2.0)
    h = s.central_upper - s.central_lower
    assert np.allclose(s.fence_upper, s.central_upper + 2.0 * h)
    assert np.allclose(s.fence_lower, s.central_lower - 2.0 * h)
    assert np.all(s.central_lower <= Y[s.median_index])
    assert np.all(Y[s.median_index] <= s.central_upper)


def test_median_sign_and_max():
    Y = np.vstack([np.zeros(4), -np.array([0.0, 1.0, 3.0, 2.0]), -np.array([0.0, 1.0, 3.0, 2.0])])
    s = functional_boxplot(Y)
    assert s.median_index == 1
    assert s.median_max_abs == 3.0
    assert s.median_sign == -1


# ------------------------------------------------------------------- SVG

def _sample_summary(t=6, outliers=2):
    # graded bundle k*v for k=0..7 plus far-displaced curves: only those escape
    v = 1.0 + 0.5 * np.sin(np.arange(t))
    Y = np.array([k * v for k in range(8)] + [(100.0 + 10 * k) * v for k in range(outliers)])
    s = functional_boxplot(Y)
    assert set(s.outlier_indices) == set(range(8, 8 + outliers))
    return s, Y


def test_svg_default_viewport():
    s, Y = _sample_summary()
    svg = render_svg(s, Y, {})
    root = ET.fromstring(svg)
    assert root.attrib["width"] == "800" and root.attrib["height"] == "500"


def test_svg_byte_deterministic():
    s, Y = _sample_summary()
    a = render_svg(s, Y, {"title": "demo"})
    b = render_svg(s, Y, {"title": "demo"})
    assert a == b


def test_svg_red_path_per_outlier():
    s, Y = _sample_summary(outliers=2)
    svg = render_svg(s, Y)
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    red = [el for el in root.iter(f"{ns}path") if el.attrib.get("stroke") == "red"]
    assert len(red) == 2
    assert all(el.attrib.get("class") == "outlier" for el in red)


def test_svg_zero_line_toggle():
    s, Y = _sample_summary()
    with_zero = render_svg(s, Y, {"zero_line": True})
    without = render_svg(s, Y, {"zero_line": False})
    assert 'class="zero"' in with_zero and 'class="zero"' not in without


def test_svg_rejects_unknown_option():
    s, Y = _sample_summary()
    with pytest.raises(ValueError):
        render_svg(s, Y, {"colour": "mauve"})


def test_write_fbplot_outputs(tmp_path):
    s, Y = _sample_summary()
    out = write_fbplot(s, Y, tmp_path / "plot.svg", {"title": "t"})
    assert out.exists()
    sidecar = out.with_suffix(".json")
    assert sidecar.exists()
    d = summary_to_json_dict(s)
    assert d["median_index"] == s.median_index
    assert "conveniences" in d["notes"]


# --------------------------------------------------- separable-sim behavior

@pytest.mark.slow
def test_zero_line_inside_central_region_for_separable_sim():
    # data from an exactly separable model: the zero line should typically lie
    # inside the 50% central region of the separability test functions
    spec = stcov.CressieHuangSep()
    xs = np.linspace(0, 1, 4)
    sites = np.array([(x, y) for x in xs for y in xs])
    spatial = np.array(
        [[stcov.evaluate(spec, sites[j] - sites[i], 0) for j in range(16)] for i in range(16)]
    )
    temporal = np.array([stcov.evaluate(spec, (0, 0), u) for u in range(2000)])
    sampler = KronSampler(spatial, temporal, sites=sites)
    hits = 0
    n_rep = 100
    for k in range(n_rep):
        ds = sampler.dataset((55, k))
        cs = all_pairs_test_fns(ds, "separability", 10)
        s = functional_boxplot(cs)
        if np.all((s.central_lower <= 0.0) & (0.0 <= s.central_upper)):
            hits += 1
    assert hits >= 90
