"""Parametric and empirical space-time covariance models.

Each model evaluates a stationary covariance C(h, u) at a planar spatial lag
h and a signed temporal lag u, and carries enough structure to build joint
covariance matrices for simulation.  The analytic separability and symmetry
test functions derived from a model are also provided here:

* separability test function: f_h(u) = C(h,u)/C(h,0) - C(0,u)/C(0,0),
  identically zero iff the model is separable;
* symmetry test function: g_h(u) = C(h,u) - C(h,-u), identically zero iff
  the model is fully symmetric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelDomainError, SingularModelError

__all__ = [
    "CovarianceSpec",
    "GneitingSep",
    "CressieHuangSep",
    "CressieHuangNonsep",
    "Cesare",
    "GneitingAsym",
    "Cov1D",
    "SeparableProduct",
    "EmpiricalSeparable",
    "EmpiricalSymmetrized",
    "evaluate",
    "analytic_sep_test_fn",
    "analytic_sym_test_fn",
    "build_covariance_matrix",
    "spec_to_json",
    "spec_from_json",
]


def _check_lag_inputs(h, u):
    h = np.asarray(h, dtype=float)
    if h.shape != (2,):
        raise ModelDomainError(f"spatial lag must be a 2-vector, got shape {h.shape}")
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(h)) or not np.all(np.isfinite(u)):
        raise ModelDomainError("non-finite spatial or temporal lag")
    return h, u


class CovarianceSpec:
    """Base class for all covariance model specifications."""

    family: str = ""

    def value(self, h, u):
        """Covariance at 2-vector spatial lag ``h`` and signed temporal lag ``u``.

        ``u`` may be a scalar or an array; the result matches its shape.
        Inputs are assumed validated; use :func:`evaluate` for the checked
        public entry point.
        """
        raise NotImplementedError

    def params_dict(self) -> dict:
        return {}

    def to_json_dict(self) -> dict:
        return {"family": self.family, "params": self.params_dict()}


@dataclass(frozen=True)
class GneitingSep(CovarianceSpec):
    """Gneiting-class model with spatio-temporal interaction parameter beta.

    C(h,u) = exp(-||h|| / (0.5|u|+1)^(beta/2)) / (0.5|u|+1); separable at
    beta=0, increasingly non-separable as beta grows to 1.
    """

    beta: float
    family = "gneiting_sep"

    def __post_init__(self):
        if not (np.isfinite(self.beta) and 0.0 <= self.beta <= 1.0):
            raise ModelDomainError(f"gneiting_sep: beta must be in [0, 1], got {self.beta}")

    def value(self, h, u):
        r = float(np.hypot(h[0], h[1]))
        den = 0.5 * np.abs(u) + 1.0
        return np.exp(-r / den ** (self.beta / 2.0)) / den

    def params_dict(self):
        return {"beta": self.beta}


@dataclass(frozen=True)
class CressieHuangSep(CovarianceSpec):
    """Separable companion of the Cressie-Huang model (fixed instance)."""

    family = "cressie_huang_sep"

    def value(self, h, u):
        r2 = float(h[0]) ** 2 + float(h[1]) ** 2
        den = 0.5 * np.abs(u) + 1.0
        return 1.0 / (den**2 * (r2 + 1.0) ** 1.5)


@dataclass(frozen=True)
class CressieHuangNonsep(CovarianceSpec):
    """Non-separable Cressie-Huang model (fixed instance)."""

    family = "cressie_huang_nonsep"

    def value(self, h, u):
        r2 = float(h[0]) ** 2 + float(h[1]) ** 2
        den = 0.5 * np.abs(u) + 1.0
        return den / (den**2 + r2) ** 1.5


@dataclass(frozen=True)
class Cesare(CovarianceSpec):
    """Product-sum model (1/3){exp(-||h||)exp(-|u|) + exp(-|u|) + k exp(-||h||)}.

    Negatively non-separable for k > 0; the pure-sum weight k has no
    standard default and must be given explicitly.
    """

    k: float
    family = "cesare"

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k >= 0.0):
            raise ModelDomainError(f"cesare: k must be >= 0, got {self.k}")

    def value(self, h, u):
        r = float(np.hypot(h[0], h[1]))
        ct = np.exp(-np.abs(u))
        cs = np.exp(-r)
        return (cs * ct + ct + self.k * cs) / 3.0

    def params_dict(self):
        return {"k": self.k}


@dataclass(frozen=True)
class GneitingAsym(CovarianceSpec):
    """Asymmetric model: symmetric Gneiting part plus a transport component.

    C(h,u) = (1-lam) exp(-||h||)/(0.2|u|+1) + lam (1 - |h1 - 0.2 u|/2)_+.
    The hinge term moves along the first spatial coordinate with velocity
    0.2, so the model is fully symmetric only at lam=0.
    """

    lam: float
    family = "gneiting_asym"

    def __post_init__(self):
        if not (np.isfinite(self.lam) and 0.0 <= self.lam <= 1.0):
            raise ModelDomainError(f"gneiting_asym: lambda must be in [0, 1], got {self.lam}")

    def value(self, h, u):
        r = float(np.hypot(h[0], h[1]))
        sym = np.exp(-r) / (0.2 * np.abs(u) + 1.0)
        hinge = np.maximum(0.0, 1.0 - 0.5 * np.abs(float(h[0]) - 0.2 * u))
        return (1.0 - self.lam) * sym + self.lam * hinge

    def params_dict(self):
        return {"lambda": self.lam}


_COV1D_KINDS = ("exponential", "gaussian", "white", "table")


@dataclass(frozen=True)
class Cov1D:
    """One-dimensional covariance component for :class:`SeparableProduct`.

    ``kind`` is one of ``exponential`` (exp(-d/range)), ``gaussian``
    (exp(-(d/range)^2)), ``white`` (1 at d=0, else 0), or ``table``
    (nearest-neighbor lookup in ``xs``/``values``).
    """

    kind: str
    range_: float = 1.0
    xs: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in _COV1D_KINDS:
            raise ModelDomainError(f"unknown 1-D covariance kind {self.kind!r}")
        if self.kind in ("exponential", "gaussian") and not self.range_ > 0:
            raise ModelDomainError(f"1-D covariance range must be > 0, got {self.range_}")
        if self.kind == "table":
            if len(self.xs) != len(self.values) or len(self.xs) == 0:
                raise ModelDomainError("table covariance needs matching non-empty xs/values")

    def __call__(self, d):
        d = np.abs(np.asarray(d, dtype=float))
        if self.kind == "exponential":
            return np.exp(-d / self.range_)
        if self.kind == "gaussian":
            return np.exp(-((d / self.range_) ** 2))
        if self.kind == "white":
            return np.where(d == 0.0, 1.0, 0.0)
        xs = np.asarray(self.xs, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        idx = np.abs(d[..., None] - xs).argmin(axis=-1)
        return vals[idx]

    def to_json_dict(self):
        out = {"kind": self.kind}
        if self.kind in ("exponential", "gaussian"):
            out["range"] = self.range_
        if self.kind == "table":
            out["xs"] = list(self.xs)
            out["values"] = list(self.values)
        return out

    @staticmethod
    def from_json_dict(obj):
        return Cov1D(
            kind=obj["kind"],
            range_=float(obj.get("range", 1.0)),
            xs=tuple(obj.get("xs", ())),
            values=tuple(obj.get("values", ())),
        )


@dataclass(frozen=True)
class SeparableProduct(CovarianceSpec):
    """Separable model C(h,u) = spatial(||h||) * temporal(|u|).

    Both components may be :class:`Cov1D` instances (JSON-serializable) or
    arbitrary callables of a nonnegative distance.
    """

    spatial: object
    temporal: object
    family = "separable_product"

    def value(self, h, u):
        r = float(np.hypot(h[0], h[1]))
        return float(np.asarray(self.spatial(r), dtype=float)) * np.asarray(
            self.temporal(np.abs(u)), dtype=float
        )

    def params_dict(self):
        if not isinstance(self.spatial, Cov1D) or not isinstance(self.temporal, Cov1D):
            raise ModelDomainError(
                "separable_product with callable components is not JSON-serializable"
            )
        return {"spatial": self.spatial.to_json_dict(), "temporal": self.temporal.to_json_dict()}


class _EmpiricalBase(CovarianceSpec):
    """Shared lag lookup for empirical specs built on an observed site set."""

    def _site_lags(self):
        sites = self.sites
        return sites[None, :, :] - sites[:, None, :]  # lag[i, j] = s_j - s_i

    def matches_sites(self, sites) -> bool:
        sites = np.asarray(sites, dtype=float)
        return sites.shape == self.sites.shape and np.array_equal(sites, self.sites)

    def _pairs_for_lag(self, h, tol=1e-8):
        """All ordered site pairs (i, j) whose lag s_j - s_i matches h or -h."""
        lags = self._site_lags()
        d_pos = np.abs(lags - np.asarray(h, float)).max(axis=2)
        d_neg = np.abs(lags + np.asarray(h, float)).max(axis=2)
        mask = (d_pos <= tol) | (d_neg <= tol)
        ii, jj = np.nonzero(mask)
        if ii.size == 0:
            raise ModelDomainError(
                f"spatial lag {tuple(np.asarray(h, float))} not in the observed lag set"
            )
        return ii, jj

    def _int_lag(self, u):
        u = np.asarray(u, dtype=float)
        k = np.rint(u)
        if np.abs(u - k).max() > 1e-8:
            raise ModelDomainError("empirical models are defined on integer temporal lags only")
        return np.abs(k).astype(int)


@dataclass(frozen=True)
class EmpiricalSeparable(_EmpiricalBase):
    """Separable covariance estimated from data: C(h,u) = C_s(h) C_t(u) / C(0,0).

    ``spatial_cov`` is the n x n lag-zero sample covariance of the sites,
    ``temporal_autocov`` the site-averaged sample autocovariance at lags
    0..p-1, and C(0,0) is ``temporal_autocov[0]``.  Evaluation at a spatial
    lag averages the matrix entries over all site pairs realizing that lag;
    lags outside the observed sets raise, they are never extrapolated.
    """

    sites: np.ndarray
    spatial_cov: np.ndarray
    temporal_autocov: np.ndarray
    family = "empirical_separable"

    def __post_init__(self):
        object.__setattr__(self, "sites", np.asarray(self.sites, dtype=float))
        object.__setattr__(self, "spatial_cov", np.asarray(self.spatial_cov, dtype=float))
        object.__setattr__(self, "temporal_autocov", np.asarray(self.temporal_autocov, dtype=float))
        n = self.sites.shape[0]
        if self.sites.ndim != 2 or self.sites.shape[1] != 2:
            raise ModelDomainError("sites must be an (n, 2) array")
        if self.spatial_cov.shape != (n, n):
            raise ModelDomainError("spatial_cov must be n x n")
        if self.temporal_autocov.ndim != 1 or self.temporal_autocov.size < 1:
            raise ModelDomainError("temporal_autocov must be a non-empty vector")
        if not self.temporal_autocov[0] > 0:
            raise ModelDomainError("temporal_autocov[0] must be positive")

    @property
    def c00(self) -> float:
        return float(self.temporal_autocov[0])

    def pair_value(self, i, j, u):
        k = self._int_lag(u)
        if np.any(k >= self.temporal_autocov.size):
            raise ModelDomainError("temporal lag outside the observed lag set")
        return self.spatial_cov[i, j] * self.temporal_autocov[k] / self.c00

    def value(self, h, u):
        ii, jj = self._pairs_for_lag(h)
        s = float(self.spatial_cov[ii, jj].mean())
        k = self._int_lag(u)
        if np.any(k >= self.temporal_autocov.size):
            raise ModelDomainError("temporal lag outside the observed lag set")
        return s * self.temporal_autocov[k] / self.c00

    def params_dict(self):
        return {
            "sites": self.sites.tolist(),
            "spatial_cov": self.spatial_cov.tolist(),
            "temporal_autocov": self.temporal_autocov.tolist(),
        }


@dataclass(frozen=True)
class EmpiricalSymmetrized(_EmpiricalBase):
    """Symmetrized empirical space-time covariance truncated at a max lag.

    ``kernel[u][i, j]`` holds (C_hat(i->j, u) + C_hat(i->j, -u)) / 2 for
    u = 0..U; the covariance is zero beyond lag U.  Each kernel slice is
    symmetric in (i, j), making the model fully symmetric by construction.
    """

    sites: np.ndarray
    kernel: np.ndarray
    family = "empirical_symmetrized"

    def __post_init__(self):
        object.__setattr__(self, "sites", np.asarray(self.sites, dtype=float))
        object.__setattr__(self, "kernel", np.asarray(self.kernel, dtype=float))
        n = self.sites.shape[0]
        if self.kernel.ndim != 3 or self.kernel.shape[1:] != (n, n):
            raise ModelDomainError("kernel must have shape (max_lag+1, n, n)")
        if not np.allclose(self.kernel, np.swapaxes(self.kernel, 1, 2), atol=1e-12):
            raise ModelDomainError("kernel slices must be symmetric in the site indices")

    @property
    def max_lag(self) -> int:
        return self.kernel.shape[0] - 1

    def _lookup(self, per_lag_values, u):
        k = self._int_lag(u)
        flat = np.atleast_1d(k).ravel()
        out = np.zeros(flat.shape, dtype=float)
        inside = flat <= self.max_lag
        out[inside] = per_lag_values[flat[inside]]
        if np.ndim(k) == 0:
            return float(out[0])
        return out.reshape(k.shape)

    def pair_value(self, i, j, u):
        return self._lookup(self.kernel[:, i, j], u)

    def value(self, h, u):
        ii, jj = self._pairs_for_lag(h)
        return self._lookup(self.kernel[:, ii, jj].mean(axis=1), u)

    def params_dict(self):
        return {"sites": self.sites.tolist(), "kernel": self.kernel.tolist()}


def evaluate(spec: CovarianceSpec, h, u):
    """Evaluate ``spec`` at spatial lag ``h`` (2-vector) and temporal lag ``u``.

    ``u`` may be scalar or array; the result matches its shape.  Non-finite
    inputs raise :class:`ModelDomainError`.
    """
    h, u = _check_lag_inputs(h, u)
    out = spec.value(h, u)
    if np.ndim(u) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


def analytic_sep_test_fn(spec: CovarianceSpec, h, max_lag: int) -> np.ndarray:
    """Separability test function f_h(u) at integer lags u = 0..max_lag.

    f_h(u) = C(h,u)/C(h,0) - C(0,u)/C(0,0); zero everywhere for separable
    models, and f_h(0) = 0 identically.  Raises
    :class:`SingularModelError` when C(h,0) or C(0,0) vanishes.
    """
    lags = np.arange(max_lag + 1, dtype=float)
    h, _ = _check_lag_inputs(h, lags)
    ch0 = float(spec.value(h, 0.0))
    c00 = float(spec.value(np.zeros(2), 0.0))
    if ch0 == 0.0 or c00 == 0.0:
        raise SingularModelError(f"C(h,0)={ch0}, C(0,0)={c00}: separability ratio undefined")
    return np.asarray(spec.value(h, lags), dtype=float) / ch0 - np.asarray(
        spec.value(np.zeros(2), lags), dtype=float
    ) / c00


def analytic_sym_test_fn(spec: CovarianceSpec, h, max_lag: int) -> np.ndarray:
    """Symmetry test function g_h(u) = C(h,u) - C(h,-u) at lags u = 1..max_lag."""
    lags = np.arange(1, max_lag + 1, dtype=float)
    h, _ = _check_lag_inputs(h, lags)
    fwd = np.asarray(spec.value(h, lags), dtype=float)
    bwd = np.asarray(spec.value(h, -lags), dtype=float)
    return fwd - bwd


def _validate_geometry(sites, times):
    sites = np.asarray(sites, dtype=float)
    times = np.asarray(times, dtype=float)
    if sites.ndim != 2 or sites.shape[1] != 2:
        raise ModelDomainError("sites must be an (n, 2) array")
    if np.unique(sites, axis=0).shape[0] != sites.shape[0]:
        raise ModelDomainError("sites must be pairwise distinct")
    if times.ndim != 1 or times.size < 1:
        raise ModelDomainError("times must be a non-empty 1-D array")
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise ModelDomainError("times must be strictly increasing")
    return sites, times


def build_covariance_matrix(spec: CovarianceSpec, sites, times) -> np.ndarray:
    """Joint covariance of the field at ``sites`` x ``times``, site-major order.

    Entry ((s,t), (s',t')) equals C(s'-s, t'-t); index (s,t) maps to row
    s * p + t, i.e. all time points of site 0 first.  The result is exactly
    symmetric by construction.
    """
    sites, times = _validate_geometry(sites, times)
    n, p = sites.shape[0], times.size
    lag = times[None, :] - times[:, None]  # lag[t, t'] = t' - t
    out = np.empty((n * p, n * p), dtype=float)
    empirical = isinstance(spec, _EmpiricalBase)
    if empirical and not spec.matches_sites(sites):
        raise ModelDomainError(
            "empirical specs can only build covariance matrices on their own site set"
        )
    for i in range(n):
        for j in range(i, n):
            if empirical:
                block = np.asarray(spec.pair_value(i, j, lag), dtype=float)
            else:
                block = np.asarray(spec.value(sites[j] - sites[i], lag), dtype=float)
            out[i * p : (i + 1) * p, j * p : (j + 1) * p] = block
            if j > i:
                out[j * p : (j + 1) * p, i * p : (i + 1) * p] = block.T
    return out


_FAMILIES = {
    "gneiting_sep": lambda p: GneitingSep(beta=float(p["beta"])),
    "cressie_huang_sep": lambda p: CressieHuangSep(),
    "cressie_huang_nonsep": lambda p: CressieHuangNonsep(),
    "cesare": lambda p: Cesare(k=float(p["k"])),
    "gneiting_asym": lambda p: GneitingAsym(lam=float(p["lambda"])),
    "separable_product": lambda p: SeparableProduct(
        spatial=Cov1D.from_json_dict(p["spatial"]), temporal=Cov1D.from_json_dict(p["temporal"])
    ),
    "empirical_separable": lambda p: EmpiricalSeparable(
        sites=p["sites"], spatial_cov=p["spatial_cov"], temporal_autocov=p["temporal_autocov"]
    ),
    "empirical_symmetrized": lambda p: EmpiricalSymmetrized(sites=p["sites"], kernel=p["kernel"]),
}


def spec_to_json(spec: CovarianceSpec) -> str:
    """Serialize a spec to the canonical JSON form {"family": ..., "params": ...}."""
    return json.dumps(spec.to_json_dict(), sort_keys=True)


def spec_from_json(obj) -> CovarianceSpec:
    """Build a spec from a JSON string or an already-parsed dict."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    try:
        family = obj["family"]
        params = obj.get("params", {})
    except (TypeError, KeyError) as exc:
        raise ModelDomainError(f"malformed model JSON: {exc}") from exc
    try:
        builder = _FAMILIES[family]
    except KeyError:
        raise ModelDomainError(
            f"unknown covariance family {family!r}; known: {sorted(_FAMILIES)}"
        ) from None
    try:
        return builder(params)
    except KeyError as exc:
        raise ModelDomainError(f"family {family!r} missing parameter {exc}") from exc
