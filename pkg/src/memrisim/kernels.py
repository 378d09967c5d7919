"""Hot crossbar kernels: numba-jitted loops with a pure-numpy fallback.

Backend selection: set ``MEMRISIM_BACKEND=numpy`` to force the fallback;
anything else (or unset) uses numba when importable.  Both backends
accumulate per output cell sequentially over input rows, so the ideal
kernels are bit-identical to a naive scalar loop on either backend.  The
Poole-Frenkel kernels are additionally bit-identical to a scalar libm
loop on the numba backend; the numpy fallback may differ in the last ulp
where numpy dispatches SIMD implementations of ``exp``.

Conventions shared by all kernels (and by any reference loop checking
them):

* ``V``: (B, M) nonnegative row voltages, ``gp``/``gm``: (M, N) line
  conductances, outputs summed over rows ``i`` in increasing order.
* Power is tallied per (example, column) cell as ``|I*V|``, plus-line
  term before minus-line term at each row.
* Poole-Frenkel currents use the factored form
  ``I = c * V * exp(sqrt(|V|) * k)`` where ``k`` is the per-device
  exponent coefficient precomputed from ``d_eps`` and temperature; the
  signed ``V`` multiplier gives the odd extension ``I(-V) = -I(V)``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

_env = os.environ.get("MEMRISIM_BACKEND", "").strip().lower()
USE_NUMBA = HAS_NUMBA and _env != "numpy"


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy fallback: loops over rows, vectorized over (example, column) cells.
# ---------------------------------------------------------------------------


def ideal_vmm_numpy(V, gp, gm):
    B, M = V.shape
    N = gp.shape[1]
    sp = np.zeros((B, N))
    sm = np.zeros((B, N))
    pc = np.zeros((B, N))
    for i in range(M):
        vi = V[:, i : i + 1]
        ip = vi * gp[i]
        im = vi * gm[i]
        sp += ip
        sm += im
        pc += np.abs(ip * vi)
        pc += np.abs(im * vi)
    return sp, sm, pc


def pf_vmm_numpy(V, cp, kp, cm, km):
    B, M = V.shape
    N = cp.shape[1]
    sp = np.zeros((B, N))
    sm = np.zeros((B, N))
    pc = np.zeros((B, N))
    sv = np.sqrt(np.abs(V))
    for i in range(M):
        vi = V[:, i : i + 1]
        svi = sv[:, i : i + 1]
        ip = cp[i] * np.exp(svi * kp[i]) * vi
        im = cm[i] * np.exp(svi * km[i]) * vi
        sp += ip
        sm += im
        pc += np.abs(ip * vi)
        pc += np.abs(im * vi)
    return sp, sm, pc


def pf_vmm_fwd_numpy(V, cp, kp, cm, km):
    B, M = V.shape
    N = cp.shape[1]
    sp = np.zeros((B, N))
    sm = np.zeros((B, N))
    sv = np.sqrt(np.abs(V))
    for i in range(M):
        vi = V[:, i : i + 1]
        svi = sv[:, i : i + 1]
        sp += cp[i] * np.exp(svi * kp[i]) * vi
        sm += cm[i] * np.exp(svi * km[i]) * vi
    return sp, sm


def pf_vmm_bwd_numpy(V, dz, cp, kp, cm, km, rgp, rgm, a_c, d_m):
    B, M = V.shape
    swp = np.zeros(cp.shape)
    swm = np.zeros(cp.shape)
    dxv = np.zeros((B, M))
    sv = np.sqrt(np.abs(V))
    for i in range(M):
        vi = V[:, i : i + 1]
        svi = sv[:, i : i + 1]
        ep = svi * kp[i]
        gp_eff = cp[i] * np.exp(ep)
        em = svi * km[i]
        gm_eff = cm[i] * np.exp(em)
        swp[i] = ((dz * vi) * (gp_eff * rgp[i] * (a_c + d_m * ep))).sum(axis=0)
        swm[i] = ((dz * vi) * (gm_eff * rgm[i] * (a_c + d_m * em))).sum(axis=0)
        dxv[:, i] = (
            dz * (gp_eff * (1.0 + 0.5 * ep) - gm_eff * (1.0 + 0.5 * em))
        ).sum(axis=1)
    return swp, swm, dxv


# ---------------------------------------------------------------------------
# numba kernels: same accumulation order, scalar libm transcendentals.
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @numba.njit(cache=True)
    def _ideal_vmm_numba(V, gp, gm):
        B, M = V.shape
        N = gp.shape[1]
        sp = np.zeros((B, N))
        sm = np.zeros((B, N))
        pc = np.zeros((B, N))
        for b in range(B):
            for i in range(M):
                v = V[b, i]
                if v != 0.0:
                    for j in range(N):
                        ip = v * gp[i, j]
                        im = v * gm[i, j]
                        sp[b, j] += ip
                        sm[b, j] += im
                        pc[b, j] += abs(ip * v)
                        pc[b, j] += abs(im * v)
        return sp, sm, pc

    @numba.njit(cache=True)
    def _pf_vmm_numba(V, cp, kp, cm, km):
        B, M = V.shape
        N = cp.shape[1]
        sp = np.zeros((B, N))
        sm = np.zeros((B, N))
        pc = np.zeros((B, N))
        for b in range(B):
            for i in range(M):
                v = V[b, i]
                if v != 0.0:
                    sv = np.sqrt(abs(v))
                    for j in range(N):
                        ip = cp[i, j] * np.exp(sv * kp[i, j]) * v
                        im = cm[i, j] * np.exp(sv * km[i, j]) * v
                        sp[b, j] += ip
                        sm[b, j] += im
                        pc[b, j] += abs(ip * v)
                        pc[b, j] += abs(im * v)
        return sp, sm, pc

    @numba.njit(cache=True)
    def _pf_vmm_fwd_numba(V, cp, kp, cm, km):
        B, M = V.shape
        N = cp.shape[1]
        sp = np.zeros((B, N))
        sm = np.zeros((B, N))
        for b in range(B):
            for i in range(M):
                v = V[b, i]
                if v != 0.0:
                    sv = np.sqrt(abs(v))
                    for j in range(N):
                        sp[b, j] += cp[i, j] * np.exp(sv * kp[i, j]) * v
                        sm[b, j] += cm[i, j] * np.exp(sv * km[i, j]) * v
        return sp, sm

    @numba.njit(cache=True)
    def _pf_vmm_bwd_numba(V, dz, cp, kp, cm, km, rgp, rgm, a_c, d_m):
        B, M = V.shape
        N = cp.shape[1]
        swp = np.zeros((M, N))
        swm = np.zeros((M, N))
        dxv = np.zeros((B, M))
        for b in range(B):
            for i in range(M):
                v = V[b, i]
                acc = 0.0
                if v != 0.0:
                    sv = np.sqrt(abs(v))
                    for j in range(N):
                        d = dz[b, j]
                        e = sv * kp[i, j]
                        g = cp[i, j] * np.exp(e)
                        swp[i, j] += (d * v) * (g * rgp[i, j] * (a_c + d_m * e))
                        acc += d * (g * (1.0 + 0.5 * e))
                        e = sv * km[i, j]
                        g = cm[i, j] * np.exp(e)
                        swm[i, j] += (d * v) * (g * rgm[i, j] * (a_c + d_m * e))
                        acc -= d * (g * (1.0 + 0.5 * e))
                else:
                    for j in range(N):
                        acc += dz[b, j] * (cp[i, j] - cm[i, j])
                dxv[b, i] = acc
        return swp, swm, dxv


if USE_NUMBA:
    ideal_vmm = _ideal_vmm_numba
    pf_vmm = _pf_vmm_numba
    pf_vmm_fwd = _pf_vmm_fwd_numba
    pf_vmm_bwd = _pf_vmm_bwd_numba
else:
    ideal_vmm = ideal_vmm_numpy
    pf_vmm = pf_vmm_numpy
    pf_vmm_fwd = pf_vmm_fwd_numpy
    pf_vmm_bwd = pf_vmm_bwd_numpy
