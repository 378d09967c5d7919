"""Weight-to-conductance mappings, the ideal and Poole-Frenkel
vector-matrix multiplies with differential readout, and power accounting.

Scaling conventions: inputs map to row voltages V = k_V * x, outputs map
back through y = I / k_I with k_I = k_V * k_G.  Power is the sum of
|I * V| over every device, tallied per input example.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .device import PfTrendModel, exponent_coefficient
from .errors import (
    DimensionMismatch,
    NegativeWeight,
    OutOfRange,
    WeightOutOfRange,
    ZeroPower,
    ZeroWeightRange,
)
from .rng import as_generator

RULE_SYMMETRIC = "symmetric"
RULE_LOW_POWER = "low_power"
RULE_DOUBLE = "double"

DEFAULT_K_V = 0.5  # V per unit input; matches the 0-0.5 V device window
READ_PULSE_SECONDS = 50e-9
_BOUND_TOL = 1e-15  # absolute slack on mapped conductances


@dataclass(frozen=True)
class CrossbarMapping:
    """Conductance bounds plus the input/weight scaling factors."""

    g_off: float  # S
    g_on: float  # S
    k_v: float  # V per unit input
    k_g: float  # S per unit weight
    rule: str = RULE_LOW_POWER

    def __post_init__(self):
        if not 0 < self.g_off < self.g_on:
            raise OutOfRange("need 0 < g_off < g_on")
        if self.k_v <= 0 or self.k_g < 0:
            raise OutOfRange("k_v must be positive and k_g nonnegative")
        if self.rule not in (RULE_SYMMETRIC, RULE_LOW_POWER, RULE_DOUBLE):
            raise OutOfRange(f"unknown mapping rule {self.rule!r}")

    @property
    def k_i(self) -> float:
        # Derived, so k_I == k_V * k_G holds exactly by construction.
        return self.k_v * self.k_g

    @property
    def g_avg(self) -> float:
        return (self.g_off + self.g_on) / 2.0


@dataclass(frozen=True)
class ConductancePair:
    """Positive- and negative-line conductance matrices of one layer."""

    g_plus: np.ndarray
    g_minus: np.ndarray

    def __post_init__(self):
        if self.g_plus.shape != self.g_minus.shape:
            raise DimensionMismatch("pair matrices must share a shape")


@dataclass(frozen=True)
class PowerTally:
    """Total |I*V| over all devices, plus the normalization counts."""

    total_device_power: float  # W summed over examples
    device_count: int
    batch_count: int

    @property
    def avg_power(self) -> float:
        """Average crossbar power per presented input example."""
        return self.total_device_power / self.batch_count if self.batch_count else 0.0


def compute_k_g(w_absmax: float, g_off: float, g_on: float) -> float:
    """Conductance scale (G_on - G_off) / max|w|."""
    if w_absmax <= 0:
        raise ZeroWeightRange("max |w| must be positive")
    return (g_on - g_off) / w_absmax


def _check_bounds(pair: ConductancePair, mapping: CrossbarMapping, err_cls):
    lo = mapping.g_off - _BOUND_TOL
    hi = mapping.g_on + _BOUND_TOL
    for g in (pair.g_plus, pair.g_minus):
        if g.min() < lo or g.max() > hi:
            raise err_cls(
                f"mapped conductance outside [{mapping.g_off}, {mapping.g_on}]"
            )


def map_symmetric(w, mapping: CrossbarMapping) -> ConductancePair:
    """G+- = G_avg +- k_G * w / 2."""
    w = np.asarray(w, dtype=float)
    half = mapping.k_g * w / 2.0
    pair = ConductancePair(mapping.g_avg + half, mapping.g_avg - half)
    _check_bounds(pair, mapping, WeightOutOfRange)
    return pair


def map_low_power(w, mapping: CrossbarMapping) -> ConductancePair:
    """One device of each pair rests at G_off; the other carries |w|."""
    w = np.asarray(w, dtype=float)
    scaled = mapping.k_g * w
    pair = ConductancePair(
        mapping.g_off + np.maximum(0.0, scaled),
        mapping.g_off - np.minimum(0.0, scaled),
    )
    _check_bounds(pair, mapping, WeightOutOfRange)
    return pair


def map_double(w_plus, w_minus, mapping: CrossbarMapping):
    """Linear map of two nonnegative matrices onto the two lines.

    k_G is recomputed from the current max over both matrices, so the
    largest weight always lands on G_on.  Returns (pair, k_g); with an
    all-zero weight pair both lines rest at G_off and k_g is 0.
    """
    w_plus = np.asarray(w_plus, dtype=float)
    w_minus = np.asarray(w_minus, dtype=float)
    if w_plus.shape != w_minus.shape:
        raise DimensionMismatch("double-weight matrices must share a shape")
    if w_plus.size and (w_plus.min() < 0 or w_minus.min() < 0):
        raise NegativeWeight("double weights must be nonnegative")
    w_max = max(w_plus.max(), w_minus.max()) if w_plus.size else 0.0
    if w_max == 0.0:
        k_g = 0.0
        pair = ConductancePair(
            np.full_like(w_plus, mapping.g_off), np.full_like(w_minus, mapping.g_off)
        )
    else:
        k_g = compute_k_g(w_max, mapping.g_off, mapping.g_on)
        pair = ConductancePair(
            k_g * w_plus + mapping.g_off, k_g * w_minus + mapping.g_off
        )
    _check_bounds(pair, mapping, NegativeWeight)
    return pair, k_g


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise DimensionMismatch("input must be a vector or a batch of rows")


def vmm_ideal(x, pair: ConductancePair, mapping: CrossbarMapping):
    """Ohmic differential readout: y = V (G+ - G-) / k_I, with power tally."""
    xb, squeeze = _as_batch(x)
    m, n = pair.g_plus.shape
    if xb.shape[1] != m:
        raise DimensionMismatch(f"input width {xb.shape[1]} != {m} rows")
    v = mapping.k_v * xb
    sp, sm, pc = kernels.ideal_vmm(v, pair.g_plus, pair.g_minus)
    y = (sp - sm) / mapping.k_i
    tally = PowerTally(float(np.sum(pc)), 2 * m * n, xb.shape[0])
    return (y[0] if squeeze else y), tally


def pf_line_arrays(pair: ConductancePair, mapping: CrossbarMapping,
                   model: PfTrendModel, rng):
    """Sample per-device PF parameters for both lines of a crossbar.

    Draw order is fixed: plus line first, then minus line, C-order within
    each.  Returns (c_plus, k_plus, c_minus, k_minus) where k is the
    precomputed exponent coefficient.
    """
    gen = as_generator(rng)
    from .device import sample_params_arrays

    c_p, d_p = sample_params_arrays(model, pair.g_plus, gen)
    c_m, d_m = sample_params_arrays(model, pair.g_minus, gen)
    k_p = exponent_coefficient(d_p, model.temperature)
    k_m = exponent_coefficient(d_m, model.temperature)
    return c_p, k_p, c_m, k_m


def vmm_pf(x, pair: ConductancePair, mapping: CrossbarMapping,
           model: PfTrendModel, rng):
    """Differential readout through the PF output law.

    Device parameters are drawn once per invocation (the caller invokes
    once per batch), then currents follow the PF model.
    """
    xb, squeeze = _as_batch(x)
    m, n = pair.g_plus.shape
    if xb.shape[1] != m:
        raise DimensionMismatch(f"input width {xb.shape[1]} != {m} rows")
    c_p, k_p, c_m, k_m = pf_line_arrays(pair, mapping, model, rng)
    v = mapping.k_v * xb
    sp, sm, pc = kernels.pf_vmm(v, c_p, k_p, c_m, k_m)
    y = (sp - sm) / mapping.k_i
    tally = PowerTally(float(np.sum(pc)), 2 * m * n, xb.shape[0])
    return (y[0] if squeeze else y), tally


def energy_efficiency(n_synapses: int, p_avg: float) -> float:
    """OP/s/W assuming 50 ns read pulses and 2 operations per synapse."""
    if p_avg <= 0:
        raise ZeroPower("average power must be positive")
    return 2.0 * n_synapses / (READ_PULSE_SECONDS * p_avg)
