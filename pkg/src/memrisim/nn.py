"""Dense network with analytic backpropagation through digital, ideal-
crossbar, and Poole-Frenkel-crossbar synapses.

Weights live on an (M+1, N) grid per layer; the extra row is the bias,
driven by a fixed input of 1.0 and mapped onto devices like any other row.
Stochastic draws (trend residuals, stuck masks, lognormal disturbances)
are sampled once per batch and held fixed through the backward pass; the
``reuse`` argument to :func:`forward` replays a previous realization, which
is also what finite-difference checks of the gradients rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .crossbar import (
    RULE_DOUBLE,
    RULE_LOW_POWER,
    RULE_SYMMETRIC,
    DEFAULT_K_V,
    CrossbarMapping,
    ConductancePair,
    PowerTally,
    compute_k_g,
    map_double,
    map_low_power,
    map_symmetric,
)
from .device import (
    PfTrendModel,
    apply_param_trend,
    exponent_coefficient,
    realize_param_residuals,
    resolve_region,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    IncompatibleMapping,
    MissingCache,
    ShapeMismatch,
)
from .nonideality import FrozenComposite, realize_composite, split_output_law
from .rng import as_generator

WEIGHTS_CONVENTIONAL = "conventional"
WEIGHTS_DOUBLE = "double"

ACT_LOGISTIC = "logistic"
ACT_SOFTMAX = "softmax"
ACT_RELU = "relu"
ACT_CAPPED_RELU = "capped_relu"
_ACTIVATIONS = (ACT_LOGISTIC, ACT_SOFTMAX, ACT_RELU, ACT_CAPPED_RELU)


@dataclass
class DenseLayer:
    """One fully connected layer; weight arrays include the bias row."""

    activation: str
    weight_mode: str
    w: Optional[np.ndarray] = None
    w_plus: Optional[np.ndarray] = None
    w_minus: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.weight_mode == WEIGHTS_CONVENTIONAL:
            if self.w is None:
                raise ConfigError("conventional layer needs w")
        elif self.weight_mode == WEIGHTS_DOUBLE:
            if self.w_plus is None or self.w_minus is None:
                raise ConfigError("double layer needs w_plus and w_minus")
        else:
            raise ConfigError(f"unknown weight mode {self.weight_mode!r}")

    @property
    def shape(self):
        arr = self.w if self.w is not None else self.w_plus
        return arr.shape

    def effective_w(self) -> np.ndarray:
        if self.weight_mode == WEIGHTS_CONVENTIONAL:
            return self.w
        return self.w_plus - self.w_minus

    def weight_arrays(self) -> dict:
        if self.weight_mode == WEIGHTS_CONVENTIONAL:
            return {"w": self.w}
        return {"w_plus": self.w_plus, "w_minus": self.w_minus}


@dataclass
class Network:
    layers: list

    @property
    def weight_mode(self) -> str:
        return self.layers[0].weight_mode

    def parameters(self) -> list:
        return [layer.weight_arrays() for layer in self.layers]

    def set_parameters(self, params) -> None:
        for layer, p in zip(self.layers, params):
            for name, arr in p.items():
                setattr(layer, name, np.array(arr, dtype=float))

    def copy_parameters(self) -> list:
        return [
            {name: arr.copy() for name, arr in p.items()} for p in self.parameters()
        ]

    def synapse_count(self) -> int:
        """Weight parameters per differential pair, bias rows included."""
        return sum(int(np.prod(layer.shape)) for layer in self.layers)


def make_mlp(layer_sizes, activations, weight_mode, rng) -> Network:
    """Glorot-uniform MLP; double mode splits the draw into +/- parts."""
    gen = as_generator(rng)
    layers = []
    for m, n, act in zip(layer_sizes[:-1], layer_sizes[1:], activations):
        limit = np.sqrt(6.0 / (m + n))
        w = np.zeros((m + 1, n))
        w[:m] = gen.uniform(-limit, limit, size=(m, n))
        if weight_mode == WEIGHTS_CONVENTIONAL:
            layers.append(DenseLayer(act, weight_mode, w=w))
        else:
            layers.append(
                DenseLayer(
                    act,
                    weight_mode,
                    w_plus=np.maximum(w, 0.0),
                    w_minus=np.maximum(-w, 0.0),
                )
            )
    return Network(layers)


@dataclass(frozen=True)
class CrossbarContext:
    """Physical realization an experiment runs under."""

    g_off: float
    g_on: float
    rule: str
    nonidealities: tuple = ()
    k_v: float = DEFAULT_K_V

    def iv_model(self) -> Optional[PfTrendModel]:
        _, iv = split_output_law(self.nonidealities)
        return iv.model if iv is not None else None


@dataclass
class _LayerCache:
    kind: str  # digital | ideal | pf
    x_ext: np.ndarray
    z: np.ndarray
    a: np.ndarray
    w_eff: Optional[np.ndarray] = None
    mapping: Optional[CrossbarMapping] = None
    frozen: Optional[FrozenComposite] = None
    pair: Optional[ConductancePair] = None
    factor_p: Optional[np.ndarray] = None
    factor_m: Optional[np.ndarray] = None
    pos_mask: Optional[np.ndarray] = None
    neg_mask: Optional[np.ndarray] = None
    pf_residuals: Optional[tuple] = None  # (e_c_p, e_d_p, e_c_m, e_d_m)
    pf_params: Optional[tuple] = None  # (c_p, k_p, c_m, k_m)
    pf_slopes: Optional[tuple] = None  # (m_c, m_d)


@dataclass
class ForwardResult:
    output: np.ndarray  # post-activation of the last layer
    logits: np.ndarray  # pre-activation of the last layer
    caches: Optional[list]
    power: Optional[PowerTally]


def _activate(z, kind):
    if kind == ACT_LOGISTIC:
        return 1.0 / (1.0 + np.exp(-z))
    if kind == ACT_SOFTMAX:
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    if kind == ACT_RELU:
        return np.maximum(z, 0.0)
    return np.clip(z, 0.0, 1.0)


def _activation_grad(z, a, kind):
    if kind == ACT_LOGISTIC:
        return a * (1.0 - a)
    if kind == ACT_RELU:
        return (z > 0.0).astype(float)
    if kind == ACT_CAPPED_RELU:
        return ((z > 0.0) & (z < 1.0)).astype(float)
    raise ConfigError("softmax gradient is fused into the cross-entropy loss")


def _map_layer(layer, ctx, reuse_cache):
    """Map layer weights to a conductance pair, realizing or reusing k_G."""
    if layer.weight_mode == WEIGHTS_DOUBLE:
        if ctx.rule != RULE_DOUBLE:
            raise IncompatibleMapping("double weights require the double rule")
        if reuse_cache is None:
            pair, k_g = map_double(layer.w_plus, layer.w_minus, _mapping_for(ctx, 1.0))
            return pair, k_g, None, None
        k_g = reuse_cache.mapping.k_g
        return (
            ConductancePair(
                k_g * layer.w_plus + ctx.g_off, k_g * layer.w_minus + ctx.g_off
            ),
            k_g,
            None,
            None,
        )
    if ctx.rule == RULE_DOUBLE:
        raise IncompatibleMapping("conventional weights cannot use the double rule")
    w = layer.w
    if reuse_cache is None:
        absmax = float(np.abs(w).max())
        k_g = compute_k_g(absmax, ctx.g_off, ctx.g_on) if absmax > 0 else 0.0
        mapping = _mapping_for(ctx, k_g)
        pair = (
            map_symmetric(w, mapping)
            if ctx.rule == RULE_SYMMETRIC
            else map_low_power(w, mapping)
        )
    else:
        k_g = reuse_cache.mapping.k_g
        scaled = k_g * w
        if ctx.rule == RULE_SYMMETRIC:
            g_avg = (ctx.g_off + ctx.g_on) / 2.0
            pair = ConductancePair(g_avg + scaled / 2.0, g_avg - scaled / 2.0)
        else:
            pair = ConductancePair(
                ctx.g_off + np.maximum(0.0, scaled),
                ctx.g_off - np.minimum(0.0, scaled),
            )
    pos = (w > 0.0).astype(float)
    neg = (w < 0.0).astype(float)
    return pair, k_g, pos, neg


def _mapping_for(ctx, k_g):
    return CrossbarMapping(ctx.g_off, ctx.g_on, ctx.k_v, k_g, ctx.rule)


def forward(
    net: Network,
    x,
    ctx: Optional[CrossbarContext] = None,
    rng=None,
    train: bool = False,
    reuse: Optional[ForwardResult] = None,
) -> ForwardResult:
    """Run the network; ``ctx=None`` means digital dot products throughout.

    ``train=True`` stores realization caches for :func:`backward`.
    ``reuse`` replays the stochastic realization of a previous result
    (fresh weights, frozen noise), in which case ``rng`` is unused.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch("expected a (batch, features) input")
    gen = as_generator(rng) if (ctx is not None and reuse is None) else None
    caches = []
    total_power = 0.0
    device_count = 0
    for index, layer in enumerate(net.layers):
        m, n = layer.shape
        if a.shape[1] != m - 1:
            raise DimensionMismatch(
                f"layer {index} expects {m - 1} inputs, got {a.shape[1]}"
            )
        x_ext = np.concatenate([a, np.ones((a.shape[0], 1))], axis=1)
        reuse_cache = reuse.caches[index] if reuse is not None else None
        if ctx is None:
            w_eff = layer.effective_w()
            z = x_ext @ w_eff
            cache = _LayerCache("digital", x_ext, z, None, w_eff=w_eff)
        else:
            pair, k_g, pos, neg = _map_layer(layer, ctx, reuse_cache)
            mapping = _mapping_for(ctx, k_g)
            if reuse_cache is None:
                frozen, _ = realize_composite(
                    ctx.nonidealities, pair.g_plus.shape, ctx.g_off, ctx.g_on, gen
                )
            else:
                frozen = reuse_cache.frozen
            model = ctx.iv_model()
            g_p, f_p, _ = frozen.apply(pair.g_plus)
            g_m, f_m, _ = frozen.apply(pair.g_minus)
            disturbed = ConductancePair(g_p, g_m)
            v = mapping.k_v * x_ext
            if model is None:
                sp, sm, pc = kernels.ideal_vmm(v, g_p, g_m)
                z = (sp - sm) / mapping.k_i if mapping.k_i else np.zeros_like(sp)
                cache = _LayerCache(
                    "ideal", x_ext, z, None,
                    mapping=mapping, frozen=frozen, pair=disturbed,
                    factor_p=f_p, factor_m=f_m, pos_mask=pos, neg_mask=neg,
                )
                total_power += float(np.sum(pc))
            else:
                region = resolve_region(model, np.array([ctx.g_off, ctx.g_on]))
                if reuse_cache is None:
                    e_c_p, e_d_p = realize_param_residuals(region, g_p.shape, gen)
                    e_c_m, e_d_m = realize_param_residuals(region, g_m.shape, gen)
                else:
                    e_c_p, e_d_p, e_c_m, e_d_m = reuse_cache.pf_residuals
                c_p, d_p = apply_param_trend(region, g_p, e_c_p, e_d_p)
                c_m, d_m = apply_param_trend(region, g_m, e_c_m, e_d_m)
                k_p = exponent_coefficient(d_p, model.temperature)
                k_m = exponent_coefficient(d_m, model.temperature)
                if train or reuse is not None:
                    sp, sm = kernels.pf_vmm_fwd(v, c_p, k_p, c_m, k_m)
                else:
                    sp, sm, pc = kernels.pf_vmm(v, c_p, k_p, c_m, k_m)
                    total_power += float(np.sum(pc))
                z = (sp - sm) / mapping.k_i if mapping.k_i else np.zeros_like(sp)
                cache = _LayerCache(
                    "pf", x_ext, z, None,
                    mapping=mapping, frozen=frozen, pair=disturbed,
                    factor_p=f_p, factor_m=f_m, pos_mask=pos, neg_mask=neg,
                    pf_residuals=(e_c_p, e_d_p, e_c_m, e_d_m),
                    pf_params=(c_p, k_p, c_m, k_m),
                    pf_slopes=(
                        region.fit_ln_c.slope,
                        region.fit_ln_deps.slope,
                    ),
                )
            device_count += 2 * m * n
        a = _activate(z, layer.activation)
        cache.a = a
        caches.append(cache)
    power = None
    if ctx is not None and not train and reuse is None:
        power = PowerTally(total_power, device_count, a.shape[0])
    return ForwardResult(a, caches[-1].z, caches if (train or reuse) else None, power)


def backward(net: Network, result: ForwardResult, d_out) -> list:
    """Gradients w.r.t. every weight array.

    ``d_out`` is dL/dz of the last layer when its activation is softmax
    (the fused cross-entropy convention), otherwise dL/da.  Stochastic
    draws cached in ``result`` are treated as constants.
    """
    if result.caches is None:
        raise MissingCache("forward was not run with train=True")
    grads = [None] * len(net.layers)
    d = np.asarray(d_out, dtype=float)
    for index in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[index]
        cache = result.caches[index]
        if layer.activation == ACT_SOFTMAX:
            if index != len(net.layers) - 1:
                raise ConfigError("softmax is only supported on the output layer")
            dz = d
        else:
            dz = d * _activation_grad(cache.z, cache.a, layer.activation)
        if cache.kind == "digital":
            dw = cache.x_ext.T @ dz
            if layer.weight_mode == WEIGHTS_CONVENTIONAL:
                grads[index] = {"w": dw}
            else:
                grads[index] = {"w_plus": dw, "w_minus": -dw}
            d = (dz @ cache.w_eff.T)[:, :-1]
            continue
        mapping = cache.mapping
        k_i = mapping.k_i
        if cache.kind == "ideal":
            s_lin = cache.x_ext.T @ dz  # d(k_I z)/dG scaled by 1/k_V
            dg_p = (mapping.k_v / k_i) * s_lin if k_i else np.zeros_like(s_lin)
            d_in = (
                (mapping.k_v / k_i)
                * (dz @ (cache.pair.g_plus - cache.pair.g_minus).T)[:, :-1]
                if k_i
                else np.zeros((dz.shape[0], layer.shape[0] - 1))
            )
            swp = swm = dg_p  # identical linear sensitivities on both lines
        else:
            c_p, k_p, c_m, k_m = cache.pf_params
            m_c, m_d = cache.pf_slopes
            v = mapping.k_v * cache.x_ext
            rgp = 1.0 / cache.pair.g_plus
            rgm = 1.0 / cache.pair.g_minus
            swp_raw, swm_raw, dxv = kernels.pf_vmm_bwd(
                v, dz, c_p, k_p, c_m, k_m, rgp, rgm, -m_c, m_d / 2.0
            )
            swp = swp_raw / k_i if k_i else np.zeros_like(swp_raw)
            swm = swm_raw / k_i if k_i else np.zeros_like(swm_raw)
            d_in = (
                (mapping.k_v / k_i) * dxv[:, :-1]
                if k_i
                else np.zeros((dz.shape[0], layer.shape[0] - 1))
            )
        k_g = mapping.k_g
        f_p = cache.factor_p
        f_m = cache.factor_m
        if layer.weight_mode == WEIGHTS_DOUBLE:
            grads[index] = {
                "w_plus": k_g * (swp * f_p),
                "w_minus": -k_g * (swm * f_m),
            }
        elif mapping.rule == RULE_SYMMETRIC:
            grads[index] = {"w": (k_g / 2.0) * (swp * f_p + swm * f_m)}
        else:
            grads[index] = {
                "w": k_g * (swp * f_p * cache.pos_mask + swm * f_m * cache.neg_mask)
            }
        d = d_in
    return grads


def loss_softmax_xent(logits, labels):
    """Mean categorical cross-entropy and its fused softmax gradient."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels)
    b = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(b), labels]))
    p = np.exp(shifted)
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(b), labels] -= 1.0
    return loss, p / b


def l1_penalty(weight_arrays, lam: float) -> float:
    """lam * sum |w| over the given arrays (bias rows included)."""
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    return lam * float(sum(np.abs(w).sum() for w in weight_arrays))


def l1_grad(w, lam: float):
    return lam * np.sign(w)


def clip_nonneg(weights):
    """Zero out negative entries (idempotent)."""
    return np.maximum(np.asarray(weights, dtype=float), 0.0)


@dataclass
class AdamState:
    """Adam moments; defaults follow common framework conventions."""

    m: list
    v: list
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    @classmethod
    def for_network(cls, net: Network, lr: float = 1e-3) -> "AdamState":
        zeros = lambda: [
            {name: np.zeros_like(arr) for name, arr in p.items()}
            for p in net.parameters()
        ]
        return cls(m=zeros(), v=zeros(), lr=lr)


def optimizer_step(state: AdamState, grads, weights):
    """One Adam update, in place; returns the updated weight structure."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for layer_m, layer_v, layer_g, layer_w in zip(state.m, state.v, grads, weights):
        for name, w in layer_w.items():
            g = layer_g[name]
            if g.shape != w.shape:
                raise ShapeMismatch(f"{name}: grad {g.shape} vs weight {w.shape}")
            m = layer_m[name]
            v = layer_v[name]
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * (g * g)
            w -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return weights


def sgd_step(state, grads, weights, lr: float):
    """Plain SGD alternative to Adam."""
    for layer_g, layer_w in zip(grads, weights):
        for name, w in layer_w.items():
            w -= lr * layer_g[name]
    return weights
