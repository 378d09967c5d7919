"""Composable conductance disturbances and the output-law switch.

Linearity-preserving nonidealities (stuck devices, device-to-device
lognormal variability) transform the conductance matrix; the I-V
nonlinearity entry does not touch conductances but tags the crossbar to
evaluate the Poole-Frenkel output law instead of Ohm's law.

Each disturbance also reports d(G')/dG per device with the random draws
held fixed, which is what backpropagation-through-frozen-noise needs:
stuck replacements contribute zero, lognormal disturbances contribute the
exact reparameterized factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .device import PfTrendModel
from .errors import ConflictingSpecs, DegenerateInput
from .rng import as_generator
from .stats import TruncatedKde, sample_kde

STUCK_AT_G_OFF = "g_off"
STUCK_AT_G_ON = "g_on"


@dataclass(frozen=True)
class IvNonlinearity:
    """Switches the crossbar output law to the PF model (no G change)."""

    model: PfTrendModel


@dataclass(frozen=True)
class StuckSimple:
    """Each device sticks at G_off or G_on with probability p."""

    p: float
    at: str  # STUCK_AT_G_OFF | STUCK_AT_G_ON

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DegenerateInput("stuck probability must be in [0, 1]")
        if self.at not in (STUCK_AT_G_OFF, STUCK_AT_G_ON):
            raise DegenerateInput(f"unknown stuck target {self.at!r}")


@dataclass(frozen=True)
class StuckEmpirical:
    """Each device sticks, with probability p, at a KDE-drawn conductance."""

    p: float
    kde: TruncatedKde

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DegenerateInput("stuck probability must be in [0, 1]")


@dataclass(frozen=True)
class D2dLognormal:
    """Lognormal programming inaccuracy on the resistance of each device.

    The log-resistance standard deviation interpolates linearly in R
    between its values at R_off (=1/G_off) and R_on (=1/G_on).
    """

    sigma_at_r_off: float
    sigma_at_r_on: float

    def __post_init__(self):
        if self.sigma_at_r_off < 0 or self.sigma_at_r_on < 0:
            raise DegenerateInput("sigmas must be nonnegative")


NonidealitySpec = Union[IvNonlinearity, StuckSimple, StuckEmpirical, D2dLognormal]


@dataclass(frozen=True)
class DisturbanceReport:
    fraction_stuck: float
    mean_relative_g_change: float


def disturb_stuck_simple(g, p, at, g_off, g_on, rng):
    """Replace each entry with probability p by G_off or G_on."""
    gen = as_generator(rng)
    g = np.asarray(g, dtype=float)
    mask = gen.random(g.shape) < p
    value = g_off if at == STUCK_AT_G_OFF else g_on
    return np.where(mask, value, g), mask


def disturb_stuck_empirical(g, p, kde, rng):
    """Replace each entry, with probability p, by a KDE draw (fully stuck:
    the replacement ignores the target conductance)."""
    gen = as_generator(rng)
    g = np.asarray(g, dtype=float)
    mask = gen.random(g.shape) < p
    out = g.copy()
    n_stuck = int(mask.sum())
    if n_stuck:
        out[mask] = sample_kde(kde, gen, size=n_stuck)
    return out, mask


def disturb_d2d(g, sigma_at_r_off, sigma_at_r_on, g_off, g_on, rng):
    """Lognormal resistance disturbance; returns (g', dG'/dG factors).

    sigma(R) = sigma_on + (R - R_on) / (R_off - R_on) * (sigma_off - sigma_on)
    R' = exp(ln R + sigma(R) * z),  G' = 1 / R'  (no clipping).
    The gradient factor treats z as frozen:
    dG'/dG = G' * (R + z * dsigma/dR * R^2).
    """
    gen = as_generator(rng)
    g = np.asarray(g, dtype=float)
    z = gen.standard_normal(g.shape)
    if sigma_at_r_off == 0.0 and sigma_at_r_on == 0.0:
        # exp(log(R)) is not the FP identity; zero disturbance must be.
        return g.copy(), np.ones_like(g)
    r_off = 1.0 / g_off
    r_on = 1.0 / g_on
    r = 1.0 / g
    slope = (sigma_at_r_off - sigma_at_r_on) / (r_off - r_on)
    sigma = sigma_at_r_on + (r - r_on) * slope
    r_new = np.exp(np.log(r) + sigma * z)
    g_new = 1.0 / r_new
    dg_dg = g_new * (r + z * slope * r * r)
    return g_new, dg_dg


def split_output_law(specs):
    """Partition specs into (linearity-preserving list, IV tag or None)."""
    iv = [s for s in specs if isinstance(s, IvNonlinearity)]
    if len(iv) > 1:
        raise ConflictingSpecs("at most one IvNonlinearity per composite")
    preserving = [s for s in specs if not isinstance(s, IvNonlinearity)]
    return preserving, (iv[0] if iv else None)


@dataclass(frozen=True)
class FrozenComposite:
    """One realization of a disturbance composite: all random draws fixed.

    ``apply`` is then a deterministic, differentiable-through map of the
    conductance matrix; re-applying it to a perturbed matrix is exactly the
    reparameterized view that frozen-noise backpropagation assumes.
    """

    steps: tuple  # ("stuck", mask, values) | ("d2d", spec, z)
    g_off: float
    g_on: float

    def apply(self, g):
        g = np.asarray(g, dtype=float)
        original = g
        factor = np.ones_like(g)
        stuck_any = np.zeros(g.shape, dtype=bool)
        for step in self.steps:
            if step[0] == "stuck":
                _, mask, values = step
                g = np.where(mask, values, g)
                factor = np.where(mask, 0.0, factor)
                stuck_any |= mask
            else:
                _, spec, z = step
                if spec.sigma_at_r_off == 0.0 and spec.sigma_at_r_on == 0.0:
                    continue  # zero disturbance is the exact identity
                r_off = 1.0 / self.g_off
                r_on = 1.0 / self.g_on
                r = 1.0 / g
                slope = (spec.sigma_at_r_off - spec.sigma_at_r_on) / (r_off - r_on)
                sigma = spec.sigma_at_r_on + (r - r_on) * slope
                g = 1.0 / np.exp(np.log(r) + sigma * z)
                factor = factor * (g * (r + z * slope * r * r))
        report = DisturbanceReport(
            fraction_stuck=float(stuck_any.mean()) if g.size else 0.0,
            mean_relative_g_change=(
                float((np.abs(g - original) / original).mean()) if g.size else 0.0
            ),
        )
        return g, factor, report


def realize_composite(specs, shape, g_off, g_on, rng):
    """Sample every random draw of the composite for one batch.

    Returns (FrozenComposite, iv_tag).  Draw order is the listed spec
    order; stuck masks come from uniform draws, replacement values follow
    for the masked entries (KDE draws for the empirical model), and each
    lognormal disturbance consumes one standard normal per device.
    """
    preserving, iv = split_output_law(specs)
    gen = as_generator(rng)
    steps = []
    for spec in preserving:
        if isinstance(spec, StuckSimple):
            mask = gen.random(shape) < spec.p
            value = g_off if spec.at == STUCK_AT_G_OFF else g_on
            steps.append(("stuck", mask, np.full(shape, value)))
        elif isinstance(spec, StuckEmpirical):
            mask = gen.random(shape) < spec.p
            values = np.zeros(shape)
            n_stuck = int(mask.sum())
            if n_stuck:
                values[mask] = sample_kde(spec.kde, gen, size=n_stuck)
            steps.append(("stuck", mask, values))
        elif isinstance(spec, D2dLognormal):
            steps.append(("d2d", spec, gen.standard_normal(shape)))
        else:
            raise ConflictingSpecs(f"unknown nonideality spec {spec!r}")
    return FrozenComposite(tuple(steps), g_off, g_on), iv


def apply_composite(specs, g, g_off, g_on, rng):
    """Sample and apply the composite once (one batch's disturbance).

    Returns (g', dG'/dG, report, iv_tag); the gradient factor composes
    multiplicatively across disturbances, with stuck replacements zeroing
    it.
    """
    g = np.asarray(g, dtype=float)
    frozen, iv = realize_composite(specs, g.shape, g_off, g_on, rng)
    g_new, factor, report = frozen.apply(g)
    return g_new, factor, report, iv
