"""Poole-Frenkel device model: per-curve fitting, cross-state trends with
residual covariance, the two-point nonlinearity metric, curve exclusion,
and stochastic per-device parameter sampling.

Conduction law (SI units throughout):

    I = c * V * exp( (2e / (k_B T)) * sqrt(e V / (4 pi d_eps)) )

``c`` has units of conductance; ``d_eps`` is the thickness-permittivity
product.  Implementations factor the exponent as ``sqrt(V) * k_dev`` with
``k_dev = (2e / (k_B T)) * sqrt(e / (4 pi d_eps))`` so the per-device
coefficient can be precomputed once per crossbar; any reference evaluation
meant to reproduce results bit for bit must use the same factoring.
Negative voltages use the odd extension ``I(-V) = -I(V)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInput,
    InsufficientStates,
    NonPositiveCurrent,
    OutOfRange,
)
from .rng import as_generator
from .stats import Covariance2, LinearFit, covariance2, linear_fit

# CODATA 2018 exact values.
ELEMENTARY_CHARGE = 1.602176634e-19  # C
BOLTZMANN = 1.380649e-23  # J/K
PLANCK = 6.62607015e-34  # J s
CONDUCTANCE_QUANTUM = 2.0 * ELEMENTARY_CHARGE**2 / PLANCK  # ~7.748e-5 S

ROOM_TEMPERATURE = 298.15  # K
DEFAULT_V_MAX = 0.5  # V
FIT_V_MIN = 0.1  # V, lower edge of the fitted voltage window
LABEL_VOLTAGE = 0.1  # V, where the resistance label is measured

# d_eps assigned when a fitted exponent slope is indistinguishable from
# zero; far above any physical value, marking the fit as ohmic-limit.
_OHMIC_SLOPE_FLOOR = 1e-6  # V**-1/2
OHMIC_DEPS_THRESHOLD = 1e-8  # F


def exponent_coefficient(d_eps, temperature: float):
    """Per-device k_dev such that the PF exponent is sqrt(V) * k_dev."""
    kcoef = 2.0 * ELEMENTARY_CHARGE / (BOLTZMANN * temperature)
    return kcoef * np.sqrt(ELEMENTARY_CHARGE / ((4.0 * np.pi) * np.asarray(d_eps, dtype=float)))


@dataclass(frozen=True)
class PfParams:
    """Poole-Frenkel parameters of one device state."""

    c: float  # S
    d_eps: float  # F
    temperature: float = ROOM_TEMPERATURE

    def __post_init__(self):
        if not (self.c > 0 and self.d_eps > 0 and self.temperature > 0):
            raise DegenerateInput("c, d_eps and temperature must be positive")

    @property
    def ohmic_limit(self) -> bool:
        return self.d_eps >= OHMIC_DEPS_THRESHOLD


def pf_current(params: PfParams, v):
    """Current through a PF device; odd extension for negative voltage."""
    v = np.asarray(v, dtype=float)
    k_dev = exponent_coefficient(params.d_eps, params.temperature)
    out = params.c * v * np.exp(np.sqrt(np.abs(v)) * k_dev)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IvCurve:
    """One measured I-V sweep with its resistance label at 0.1 V."""

    voltages: np.ndarray  # V, strictly increasing, >= 0
    currents: np.ndarray  # A
    resistance_label: float = field(default=0.0)  # ohm; 0 -> compute

    def __post_init__(self):
        v = np.asarray(self.voltages, dtype=float)
        i = np.asarray(self.currents, dtype=float)
        if v.shape != i.shape or v.ndim != 1 or v.size < 3:
            raise DegenerateInput("curve needs >= 3 equal-length samples")
        if np.any(np.diff(v) <= 0) or v[0] < 0:
            raise DegenerateInput("voltages must be nonnegative and strictly increasing")
        object.__setattr__(self, "voltages", v)
        object.__setattr__(self, "currents", i)
        if self.resistance_label == 0.0:
            object.__setattr__(self, "resistance_label", self._label_resistance())
        if self.resistance_label <= 0:
            raise DegenerateInput("resistance label must be positive")

    def _label_resistance(self) -> float:
        i_at = self.current_at(LABEL_VOLTAGE)
        if i_at <= 0:
            raise DegenerateInput("non-positive current at the 0.1 V label point")
        return LABEL_VOLTAGE / i_at

    def current_at(self, v: float) -> float:
        """Linear interpolation of current; errors outside the sweep."""
        if v < self.voltages[0] or v > self.voltages[-1]:
            raise OutOfRange(f"{v} V outside sweep range "
                             f"[{self.voltages[0]}, {self.voltages[-1]}]")
        return float(np.interp(v, self.voltages, self.currents))


def nonlinearity(curve_or_params, v_ref: float) -> float:
    """Conductance ratio G(v_ref) / G(v_ref / 2); 1 for ohmic devices."""
    if v_ref <= 0:
        raise OutOfRange("v_ref must be positive")
    half = v_ref / 2.0
    if isinstance(curve_or_params, PfParams):
        g_full = pf_current(curve_or_params, v_ref) / v_ref
        g_half = pf_current(curve_or_params, half) / half
    else:
        curve = curve_or_params
        first_positive = curve.voltages[curve.voltages > 0]
        if first_positive.size == 0 or half < first_positive[0]:
            raise OutOfRange("v_ref / 2 below the first measurable point")
        g_full = curve.current_at(v_ref) / v_ref
        g_half = curve.current_at(half) / half
    return g_full / g_half


def exclude_abrupt(curves, threshold: float = 0.1):
    """Drop curves with abrupt current changes.

    A curve is kept iff the largest second finite difference of the current
    sequence, relative to the curve's mean current, stays at or below the
    threshold.  The undivided difference I[k+1] - 2 I[k] + I[k-1] is the
    discriminating quantity: it vanishes for smooth conduction at realistic
    sweep spacing but is of the order of the jump size at a discontinuity.
    (Dividing by the squared voltage step would flag every non-ohmic smooth
    curve, since d2I/dV2 / mean(I) is several V^-2 for Poole-Frenkel
    conduction in the fitted window.)
    """
    kept = []
    for curve in curves:
        i = curve.currents
        d2 = i[2:] - 2.0 * i[1:-1] + i[:-2]
        mean_i = float(i.mean())
        if mean_i == 0.0:
            ratio = 0.0 if np.all(d2 == 0.0) else math.inf
        else:
            ratio = float(np.abs(d2).max() / mean_i)
        if ratio <= threshold:
            kept.append(curve)
    return kept


def fit_pf_curve(
    curve: IvCurve,
    temperature: float = ROOM_TEMPERATURE,
    v_min: float = FIT_V_MIN,
    v_max: float = DEFAULT_V_MAX,
) -> PfParams:
    """Fit (c, d_eps) by regressing ln(I/V) on sqrt(V) over [v_min, v_max].

    An exactly ohmic curve gives a zero exponent slope; it is returned with
    a huge d_eps (flagged by ``PfParams.ohmic_limit``) rather than raising.
    """
    mask = (curve.voltages >= v_min) & (curve.voltages <= v_max) & (curve.voltages > 0)
    v = curve.voltages[mask]
    i = curve.currents[mask]
    if v.size < 2:
        raise DegenerateInput("fewer than 2 samples in the fitting window")
    if np.any(i <= 0):
        raise NonPositiveCurrent("currents must be positive at positive voltage")
    fit = linear_fit(np.sqrt(v), np.log(i / v))
    c = math.exp(fit.intercept)
    slope = max(fit.slope, _OHMIC_SLOPE_FLOOR)
    d_eps = (
        ELEMENTARY_CHARGE
        / (4.0 * math.pi)
        * (2.0 * ELEMENTARY_CHARGE / (BOLTZMANN * temperature * slope)) ** 2
    )
    return PfParams(c, d_eps, temperature)


@dataclass(frozen=True)
class RegionTrend:
    """Log-log trends of one resistance region, with residual covariance."""

    fit_ln_c: LinearFit
    fit_ln_deps: LinearFit
    residual_cov: Covariance2
    g_off: float  # S
    g_on: float  # S

    def __post_init__(self):
        if not 0 < self.g_off < self.g_on:
            raise DegenerateInput("need 0 < g_off < g_on")


@dataclass(frozen=True)
class PfTrendModel:
    """Per-region PF trends split at the conductance quantum."""

    low_resistance: RegionTrend  # conductances above G_0
    high_resistance: RegionTrend  # conductances below G_0
    temperature: float = ROOM_TEMPERATURE
    v_max: float = DEFAULT_V_MAX

    def __post_init__(self):
        if self.low_resistance.g_off <= CONDUCTANCE_QUANTUM:
            raise DegenerateInput("low-resistance region must lie above G_0")
        if self.high_resistance.g_on >= CONDUCTANCE_QUANTUM:
            raise DegenerateInput("high-resistance region must lie below G_0")

    def region_for(self, conductance: float) -> RegionTrend:
        region = (
            self.low_resistance
            if conductance > CONDUCTANCE_QUANTUM
            else self.high_resistance
        )
        lo = region.g_off * (1.0 - 1e-9)
        hi = region.g_on * (1.0 + 1e-9)
        if not lo <= conductance <= hi:
            raise OutOfRange(
                f"conductance {conductance} S outside region "
                f"[{region.g_off}, {region.g_on}]"
            )
        return region


def fit_trend_model(
    states,
    temperature: float = ROOM_TEMPERATURE,
    v_max: float = DEFAULT_V_MAX,
) -> PfTrendModel:
    """Fit ln(c) and ln(d_eps) against ln(R) per region from fitted states.

    ``states`` is a sequence of (IvCurve, PfParams) pairs; the curve's
    resistance label routes it to the region above or below G_0.
    """
    lows, highs = [], []
    for curve, params in states:
        g_label = 1.0 / curve.resistance_label
        (lows if g_label > CONDUCTANCE_QUANTUM else highs).append((curve, params))
    regions = []
    for name, bucket in (("low-resistance", lows), ("high-resistance", highs)):
        if len(bucket) < 2:
            raise InsufficientStates(
                f"{name} region has {len(bucket)} states; need >= 2"
            )
        ln_r = np.log([c.resistance_label for c, _ in bucket])
        fit_c = linear_fit(ln_r, np.log([p.c for _, p in bucket]))
        fit_d = linear_fit(ln_r, np.log([p.d_eps for _, p in bucket]))
        cov = covariance2(fit_c.residuals, fit_d.residuals)
        g_labels = np.exp(-ln_r)
        regions.append(RegionTrend(fit_c, fit_d, cov, g_labels.min(), g_labels.max()))
    return PfTrendModel(regions[0], regions[1], temperature, v_max)


def realize_param_residuals(region: RegionTrend, shape, rng):
    """Draw frozen trend residuals (e_c, e_d) for a block of devices.

    Two standard normals per device in C order, transformed with the
    analytic Cholesky factors of the region covariance; a scalar replay of
    the same stream is bit-identical.
    """
    l00, l10, l11 = region.residual_cov.cholesky_factors()
    z = as_generator(rng).standard_normal(tuple(shape) + (2,))
    e_c = l00 * z[..., 0]
    e_d = l10 * z[..., 0] + l11 * z[..., 1]
    return e_c, e_d


def apply_param_trend(region: RegionTrend, conductances, e_c, e_d):
    """Evaluate the log-log trends at 1/G and add frozen residuals."""
    ln_r = np.log(1.0 / np.asarray(conductances, dtype=float))
    mean_c = region.fit_ln_c.slope * ln_r + region.fit_ln_c.intercept
    mean_d = region.fit_ln_deps.slope * ln_r + region.fit_ln_deps.intercept
    return np.exp(mean_c + e_c), np.exp(mean_d + e_d)


def resolve_region(model: PfTrendModel, conductances) -> RegionTrend:
    """Region containing every conductance of a crossbar (all same side)."""
    g = np.asarray(conductances, dtype=float)
    region = model.region_for(float(g.min()))
    if region is not model.region_for(float(g.max())):
        raise OutOfRange("conductances straddle the region boundary")
    return region


def sample_params_arrays(model: PfTrendModel, conductances, rng):
    """Vectorized trend sampling: (c, d_eps) arrays for a conductance array."""
    g = np.asarray(conductances, dtype=float)
    region = resolve_region(model, g)
    e_c, e_d = realize_param_residuals(region, g.shape, rng)
    return apply_param_trend(region, g, e_c, e_d)


def sample_device_params(model: PfTrendModel, conductance: float, rng) -> PfParams:
    """Draw PF parameters for one device programmed to ``conductance``."""
    c, d_eps = sample_params_arrays(model, np.array([conductance]), rng)
    return PfParams(float(c[0]), float(d_eps[0]), model.temperature)


# ---------------------------------------------------------------------------
# Model file I/O
# ---------------------------------------------------------------------------

_SCHEMA_VERSION = 1


def _region_to_dict(r: RegionTrend) -> dict:
    return {
        "g_off_S": r.g_off,
        "g_on_S": r.g_on,
        "fit_ln_c": {"slope": r.fit_ln_c.slope, "intercept": r.fit_ln_c.intercept},
        "fit_ln_deps": {
            "slope": r.fit_ln_deps.slope,
            "intercept": r.fit_ln_deps.intercept,
        },
        "residual_cov": r.residual_cov.matrix.tolist(),
    }


def _region_from_dict(d: dict) -> RegionTrend:
    return RegionTrend(
        LinearFit(d["fit_ln_c"]["slope"], d["fit_ln_c"]["intercept"], np.empty(0)),
        LinearFit(
            d["fit_ln_deps"]["slope"], d["fit_ln_deps"]["intercept"], np.empty(0)
        ),
        Covariance2(np.asarray(d["residual_cov"], dtype=float)),
        d["g_off_S"],
        d["g_on_S"],
    )


def model_to_json(model: PfTrendModel) -> str:
    doc = {
        "schema_version": _SCHEMA_VERSION,
        "temperature_K": model.temperature,
        "v_max_V": model.v_max,
        "regions": {
            "low_resistance": _region_to_dict(model.low_resistance),
            "high_resistance": _region_to_dict(model.high_resistance),
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def model_from_json(text: str) -> PfTrendModel:
    doc = json.loads(text)
    if doc.get("schema_version") != _SCHEMA_VERSION:
        from .errors import SchemaVersionMismatch

        raise SchemaVersionMismatch(
            f"device model schema {doc.get('schema_version')!r}, expected {_SCHEMA_VERSION}"
        )
    return PfTrendModel(
        _region_from_dict(doc["regions"]["low_resistance"]),
        _region_from_dict(doc["regions"]["high_resistance"]),
        doc["temperature_K"],
        doc["v_max_V"],
    )


def save_model(model: PfTrendModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> PfTrendModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())


# ---------------------------------------------------------------------------
# Built-in synthetic-calibrated reference model
# ---------------------------------------------------------------------------

# The reference silicon-oxide trends below are synthetic calibrations: the
# slopes/intercepts are chosen so that (a) devices programmed to a target
# conductance G reproduce roughly that conductance when read at the 0.1 V
# label voltage, (b) the low-resistance region is near-ohmic (two-point
# nonlinearity ~1.1-1.3 at 0.5 V) with small scatter, and (c) the
# high-resistance region is strongly non-ohmic (nonlinearity ~3-5) with
# large, positively correlated scatter in ln(c) and ln(d_eps).
SIOX_LOW_G_OFF = 6.901e-4  # S  (R = 1449 ohm)
SIOX_LOW_G_ON = 3.451e-3  # S  (R = 289.8 ohm)
SIOX_HIGH_G_OFF = 5.248e-7  # S  (R = 1.905 Mohm)
SIOX_HIGH_G_ON = 2.624e-6  # S  (R = 381.1 kohm)

_SIOX_LOW = {
    "ln_c": (-1.16, 0.76),
    "ln_deps": (-1.26, -28.40),
    "cov": [[0.0025, 0.00375], [0.00375, 0.0625]],
}
_SIOX_HIGH = {
    "ln_c": (-1.16, 0.03),
    "ln_deps": (-0.15, -38.88),
    "cov": [[0.2025, 0.0675], [0.0675, 0.09]],
}


def _builtin_region(spec: dict, g_off: float, g_on: float) -> RegionTrend:
    return RegionTrend(
        LinearFit(spec["ln_c"][0], spec["ln_c"][1], np.empty(0)),
        LinearFit(spec["ln_deps"][0], spec["ln_deps"][1], np.empty(0)),
        Covariance2(np.asarray(spec["cov"], dtype=float)),
        g_off,
        g_on,
    )


def builtin_siox_model(temperature: float = ROOM_TEMPERATURE) -> PfTrendModel:
    """Synthetic-calibrated reference model for the SiO_x-like device."""
    return PfTrendModel(
        _builtin_region(_SIOX_LOW, SIOX_LOW_G_OFF, SIOX_LOW_G_ON),
        _builtin_region(_SIOX_HIGH, SIOX_HIGH_G_OFF, SIOX_HIGH_G_ON),
        temperature,
        DEFAULT_V_MAX,
    )


def synthesize_curves(
    model: PfTrendModel,
    n_per_region: int,
    rng,
    noise: float = 0.0,
    n_points: int = 41,
):
    """Generate I-V sweeps consistent with a trend model (calibration aid).

    Resistance labels are spaced geometrically across each region; PF
    parameters sit on the trend lines plus a residual draw from the region
    covariance.  ``noise`` adds multiplicative current noise.
    """
    gen = as_generator(rng)
    v = np.linspace(0.0, model.v_max, n_points)
    curves = []
    for region in (model.low_resistance, model.high_resistance):
        r_values = np.exp(
            np.linspace(
                math.log(1.0 / region.g_on),
                math.log(1.0 / region.g_off),
                n_per_region,
            )
        )
        l00, l10, l11 = region.residual_cov.cholesky_factors()
        for r in r_values:
            ln_r = math.log(r)
            z0, z1 = gen.standard_normal(2)
            ln_c = region.fit_ln_c.slope * ln_r + region.fit_ln_c.intercept + l00 * z0
            ln_d = (
                region.fit_ln_deps.slope * ln_r
                + region.fit_ln_deps.intercept
                + (l10 * z0 + l11 * z1)
            )
            params = PfParams(math.exp(ln_c), math.exp(ln_d), model.temperature)
            i = pf_current(params, v)
            if noise > 0.0:
                i = i * (1.0 + noise * gen.standard_normal(i.shape))
            # Label with the generating resistance, not the (residual-
            # disturbed) readback, so injected residuals stay exogenous to
            # the trend regressor.
            curves.append(IvCurve(v, i, resistance_label=r))
    return curves
