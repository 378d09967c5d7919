"""Regression and sampling primitives: OLS fits, 2-D normals, lognormals,
and a boundary-corrected Gaussian KDE for stuck-device conductances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, NotPsd
from .rng import as_generator

PSD_TOL = -1e-12


@dataclass(frozen=True)
class LinearFit:
    """Ordinary least squares line with per-point residuals."""

    slope: float
    intercept: float
    residuals: np.ndarray = field(repr=False)

    def predict(self, xs):
        return self.slope * np.asarray(xs, dtype=float) + self.intercept


def linear_fit(xs, ys) -> LinearFit:
    """OLS fit of ys against xs; residuals are ys minus the fitted line."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DegenerateInput("xs and ys must be 1-D and of equal length")
    if xs.size < 2:
        raise DegenerateInput("need at least 2 points to fit a line")
    xm = xs.mean()
    ym = ys.mean()
    dx = xs - xm
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegenerateInput("xs have zero variance")
    slope = float(dx @ (ys - ym)) / sxx
    intercept = ym - slope * xm
    return LinearFit(slope, intercept, ys - (slope * xs + intercept))


@dataclass(frozen=True)
class Covariance2:
    """Symmetric positive semi-definite 2x2 covariance matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise DegenerateInput("covariance must be 2x2")
        m = 0.5 * (m + m.T)
        object.__setattr__(self, "matrix", m)
        if np.linalg.eigvalsh(m).min() < PSD_TOL:
            raise NotPsd(f"eigenvalue below {PSD_TOL}: {m.tolist()}")

    def cholesky_factors(self) -> tuple[float, float, float]:
        """Lower-triangular factors (l00, l10, l11) of the matrix.

        Computed analytically so the decomposition (and hence every draw
        made from it) is bit-reproducible across BLAS builds.  Handles
        semi-definite matrices, where LAPACK's Cholesky would fail.
        """
        a = float(self.matrix[0, 0])
        b = float(self.matrix[0, 1])
        c = float(self.matrix[1, 1])
        if a <= 0.0:
            # PSD with zero first variance forces b == 0 (up to tolerance).
            return 0.0, 0.0, math.sqrt(max(c, 0.0))
        l00 = math.sqrt(a)
        l10 = b / l00
        return l00, l10, math.sqrt(max(c - l10 * l10, 0.0))


def covariance2(res_a, res_b) -> Covariance2:
    """Sample covariance (denominator n-1) of two paired series."""
    a = np.asarray(res_a, dtype=float)
    b = np.asarray(res_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DegenerateInput("residual series must be 1-D and of equal length")
    if a.size < 2:
        raise DegenerateInput("need at least 2 points for a sample covariance")
    da = a - a.mean()
    db = b - b.mean()
    n1 = a.size - 1
    m = np.array(
        [
            [float(da @ da) / n1, float(da @ db) / n1],
            [float(da @ db) / n1, float(db @ db) / n1],
        ]
    )
    return Covariance2(m)


def sample_mvnormal2(mean, cov, rng, size=None):
    """Draw from a 2-D normal via the analytic Cholesky transform.

    With ``size=None`` returns one pair ``(2,)``; with an integer ``size``
    returns ``(size, 2)``.  Draw order is fixed (two standard normals per
    pair, C-order), so a scalar replay of the same stream reproduces the
    result bit for bit.
    """
    if not isinstance(cov, Covariance2):
        cov = Covariance2(np.asarray(cov, dtype=float))
    l00, l10, l11 = cov.cholesky_factors()
    mean = np.asarray(mean, dtype=float)
    gen = as_generator(rng)
    z = gen.standard_normal((2,) if size is None else (size, 2))
    out0 = mean[0] + l00 * z[..., 0]
    out1 = mean[1] + (l10 * z[..., 0] + l11 * z[..., 1])
    return np.stack([out0, out1], axis=-1)


def sample_lognormal(mu_log, sigma_log, rng, size=None):
    """exp(Normal(mu_log, sigma_log^2)); accepts broadcastable arrays."""
    mu_log = np.asarray(mu_log, dtype=float)
    sigma_log = np.asarray(sigma_log, dtype=float)
    if np.any(sigma_log < 0):
        raise DegenerateInput("sigma_log must be nonnegative")
    gen = as_generator(rng)
    shape = np.broadcast_shapes(mu_log.shape, sigma_log.shape)
    if size is not None:
        shape = (size,) + shape if shape else (size,)
    z = gen.standard_normal(shape)
    return np.exp(mu_log + sigma_log * z)


_MIRROR_MASS_THRESHOLD = 1e-8
_SQRT2 = math.sqrt(2.0)


def _normal_cdf(x):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(x, dtype=float) / _SQRT2))


@dataclass(frozen=True)
class TruncatedKde:
    """Gaussian KDE clipped below at ``clip_low``.

    Components whose untruncated mass below the boundary exceeds 1e-8 get a
    mirror reflection about the boundary (which conserves their mass
    exactly); the remaining, negligible truncation loss is removed by an
    explicit renormalization so the density integrates to one.
    """

    points: np.ndarray
    bandwidth: float
    clip_low: float
    mirrored: np.ndarray = field(repr=False)  # bool per component
    norm: float = field(repr=False)  # surviving mass before renormalization

    @property
    def component_masses(self) -> np.ndarray:
        below = _normal_cdf((self.clip_low - self.points) / self.bandwidth)
        return np.where(self.mirrored, 1.0, 1.0 - below)

    def density(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        h = self.bandwidth
        u = (x[:, None] - self.points[None, :]) / h
        terms = np.exp(-0.5 * u * u)
        um = (x[:, None] - (2.0 * self.clip_low - self.points)[None, :]) / h
        terms = terms + self.mirrored[None, :] * np.exp(-0.5 * um * um)
        dens = terms.sum(axis=1) / (self.points.size * h * math.sqrt(2.0 * math.pi))
        dens /= self.norm
        dens[x < self.clip_low] = 0.0
        return dens


def build_kde(points, clip_low: float = 0.0) -> TruncatedKde:
    """Boundary-corrected KDE with Scott's-rule bandwidth n**(-1/5) * std."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 1 or points.size == 0:
        raise DegenerateInput("points must be a non-empty 1-D array")
    if np.any(points < clip_low):
        raise DegenerateInput("all points must lie at or above clip_low")
    std = float(points.std(ddof=1)) if points.size > 1 else 0.0
    if std == 0.0:
        raise DegenerateInput("zero-variance points give zero bandwidth")
    bandwidth = points.size ** (-0.2) * std
    below = _normal_cdf((clip_low - points) / bandwidth)
    mirrored = below > _MIRROR_MASS_THRESHOLD
    masses = np.where(mirrored, 1.0, 1.0 - below)
    return TruncatedKde(points, bandwidth, clip_low, mirrored, float(masses.mean()))


def sample_kde(kde: TruncatedKde, rng, size=None):
    """Draw from the truncated KDE; every sample is >= clip_low."""
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    masses = kde.component_masses
    idx = gen.choice(kde.points.size, size=n, p=masses / masses.sum())
    raw = kde.points[idx] + kde.bandwidth * gen.standard_normal(n)
    out = np.where(
        kde.mirrored[idx], kde.clip_low + np.abs(raw - kde.clip_low), raw
    )
    # Non-mirrored components carry < 1e-8 mass below the boundary; redraw
    # the (essentially never occurring) violations to honor the truncation.
    bad = out < kde.clip_low
    while np.any(bad):
        redraw = kde.points[idx[bad]] + kde.bandwidth * gen.standard_normal(
            int(bad.sum())
        )
        out[bad] = redraw
        bad = out < kde.clip_low
    return float(out[0]) if size is None else out
