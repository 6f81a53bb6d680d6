"""Lockstep numpy integrator for sweeps over many initial conditions.

The fallback for :func:`kernels.sweep_kernel` when numba is disabled. All
cells advance together with the same RK4 step and the same clamp; mode
transitions are applied at step ends only (no bisection), so labels agree
with the compiled path except for cells sitting on a basin border.
"""
from __future__ import annotations

import numpy as np

from . import kernels as K


def _wrap(d):
    return np.mod(d + 180.0, 360.0) - 180.0


def _in_arcs(w, arcs, n):
    out = np.zeros(w.shape, dtype=bool)
    for i in range(n):
        lo, hi = arcs[i]
        out |= (w >= lo) & (w <= hi)
        if hi == 180.0:
            out |= w == -180.0
    return out


def region(d, s_arcs, ns, r_arcs, nr):
    w = _wrap(d)
    in_s = _in_arcs(w, s_arcs, ns)
    in_r = _in_arcs(w, r_arcs, nr)
    return np.where(in_s, np.where(in_r, K.S_AND_R, K.S_MINUS_R),
                    np.where(in_r, K.R_MINUS_S, K.NEITHER))


def next_mode(mode, reg, policy):
    if policy == K.FROZEN:
        return mode
    out = mode.copy()
    out[reg == K.S_MINUS_R] = K.SATURATED
    out[reg == K.R_MINUS_S] = K.NORMAL
    both = reg == K.S_AND_R
    if policy == K.FORCED_SATURATION:
        out[both] = K.SATURATED
    else:
        out[both] = 1 - mode[both]
    return out


def power(d, mode, vg, pv):
    r = np.radians(d)
    p_n = (pv[K.I_VREF] ** 2 * np.sin(pv[K.I_ALPHA])
           + vg * pv[K.I_VREF] * np.sin(r - pv[K.I_ALPHA])) / pv[K.I_Z]
    p_s = pv[K.I_RES] * pv[K.I_IMAX] ** 2 + vg * pv[K.I_IMAX] * np.cos(r + pv[K.I_BETA])
    return np.where(mode == K.SATURATED, p_s, p_n)


def rhs(d, w, mode, vg, pv, damping, limit):
    acc = pv[K.I_P0] - power(d, mode, vg, pv)
    if damping:
        acc = acc - w / pv[K.I_DP]
    acc = acc / (2.0 * pv[K.I_H])
    if limit:
        dwmax = pv[K.I_DWMAX]
        pinned = ((w >= dwmax) & (acc > 0.0)) | ((w <= -dwmax) & (acc < 0.0))
        acc = np.where(pinned, 0.0, acc)
    return np.degrees(pv[K.I_WN] * w), acc


def rk4(d, w, mode, vg, pv, dt, damping, limit):
    k1d, k1w = rhs(d, w, mode, vg, pv, damping, limit)
    k2d, k2w = rhs(d + 0.5 * dt * k1d, w + 0.5 * dt * k1w, mode, vg, pv, damping, limit)
    k3d, k3w = rhs(d + 0.5 * dt * k2d, w + 0.5 * dt * k2w, mode, vg, pv, damping, limit)
    k4d, k4w = rhs(d + dt * k3d, w + dt * k3w, mode, vg, pv, damping, limit)
    return (d + dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
            w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w))


def sweep(d0s, w0s, modes, pv, seg_s, seg_ns, seg_r, seg_nr, vg, h, t_max,
          policy, damping, limit, cls):
    """Summary rows (``kernels.S_*`` layout) for a constant-grid sweep."""
    n = d0s.shape[0]
    out = np.zeros((n, K.N_SUMMARY))
    dwmax = pv[K.I_DWMAX]
    d = np.asarray(d0s, dtype=float).copy()
    w = np.asarray(w0s, dtype=float).copy()
    if limit:
        w = np.clip(w, -dwmax, dwmax)
    mode = np.asarray(modes, dtype=np.int64).copy()
    reg = region(d, seg_s, seg_ns, seg_r, seg_nr)
    mode = next_mode(mode, reg, policy)

    dwell_kind = np.full(n, -1)
    dwell_start = np.zeros(n)
    converged = np.full(n, -1)
    conv_time = np.full(n, -1.0)
    net = np.zeros(n, dtype=np.int64)
    cross_at = np.zeros(n)
    cross_dir = np.zeros(n, dtype=np.int64)
    los = np.zeros(n, dtype=bool)
    d_prev = d.copy()
    in_neg = np.zeros(n, dtype=bool)
    neg_s = np.zeros(n)
    best_s = np.full(n, -1.0)
    best_e = np.full(n, -1.0)
    diverged = np.zeros(n, dtype=bool)
    t_end = np.zeros(n)
    steps = np.zeros(n)

    live = np.arange(n)
    n_steps = int(np.ceil(t_max / h - 1e-9))
    for k in range(n_steps):
        if live.size == 0:
            break
        t = min((k + 1) * h, t_max)
        dt = t - min(k * h, t_max)
        dl, wl, ml = d[live], w[live], mode[live]
        dl, wl = rk4(dl, wl, ml, vg, pv, dt, damping, limit)
        if limit:
            wl = np.clip(wl, -dwmax, dwmax)
        bad = ~(np.isfinite(dl) & np.isfinite(wl))
        if bad.any():
            diverged[live[bad]] = True
            t_end[live[bad]] = t
            steps[live[bad]] = k + 1
        rl = region(dl, seg_s, seg_ns, seg_r, seg_nr)
        ml = next_mode(ml, rl, policy)
        d[live], w[live], mode[live] = dl, wl, ml

        p = power(dl, ml, vg, pv)
        neg = p < 0.0
        start = neg & ~in_neg[live]
        neg_s[live[start]] = t
        stop = ~neg & in_neg[live]
        longer = stop & (t - neg_s[live] > best_e[live] - best_s[live])
        best_s[live[longer]] = neg_s[live[longer]]
        best_e[live[longer]] = t
        in_neg[live] = neg

        dp = d_prev[live]
        u_prev = _wrap(dp - cls[K.C_UE])
        u_now = _wrap(dl - cls[K.C_UE])
        near = np.abs(u_now - u_prev) < 180.0
        fwd = near & (dl > dp) & (u_prev < 0.0) & (u_now >= 0.0)
        bwd = near & (dl < dp) & (u_now < 0.0) & (u_prev >= 0.0)
        net[live] += fwd.astype(np.int64) - bwd.astype(np.int64)
        hit = fwd | bwd
        cross_at[live[hit]] = (dl - u_now)[hit]
        cross_dir[live[fwd]] = 1
        cross_dir[live[bwd]] = -1
        d_prev[live] = dl
        cd = cross_dir[live]
        los[live] |= (cd != 0) & ((dl - cross_at[live]) * cd >= K.LOS_EXCURSION)

        t_end[live] = t
        steps[live] = k + 1
        if t >= cls[K.C_T_START] - K.TIME_TOL * h:
            tol_d, tol_w = cls[K.C_TOL_DEG], cls[K.C_TOL_W]
            calm = np.abs(wl) < tol_w
            cand = np.full(live.size, -1)
            if cls[K.C_HAS_SE] > 0.5:
                at_se = (ml == K.NORMAL) & calm & (np.abs(_wrap(dl - cls[K.C_SE])) < tol_d)
                cand[at_se] = K.CONVERGED_SEP
            if cls[K.C_HAS_SSE] > 0.5:
                at_sse = ((cand < 0) & (ml == K.SATURATED) & calm
                          & (np.abs(_wrap(dl - cls[K.C_SSE])) < tol_d))
                cand[at_sse] = K.CONVERGED_SAT_SEP
            changed = cand != dwell_kind[live]
            dwell_kind[live[changed]] = cand[changed]
            dwell_start[live[changed]] = t
            done = (cand >= 0) & (t - dwell_start[live] >= cls[K.C_DWELL] - K.TIME_TOL * h)
            converged[live[done]] = cand[done]
            conv_time[live[done]] = dwell_start[live[done]]
            live = live[~(done | bad)]
        else:
            live = live[~bad]

    tail = in_neg & (t_end - neg_s > best_e - best_s)
    best_s[tail] = neg_s[tail]
    best_e[tail] = t_end[tail]

    target = np.where(converged == K.CONVERGED_SAT_SEP, cls[K.C_SSE], cls[K.C_SE])
    slips = np.where(converged >= 0, np.floor((d - target) / 360.0 + 0.5), net)
    kind = np.where(converged >= 0, np.where(slips == 0, converged, K.POLE_SLIP),
                    np.where(los, K.LOSS_OF_SYNC, K.UNDETERMINED))
    out[:, K.S_KIND] = kind
    out[:, K.S_SLIP] = slips
    out[:, K.S_CONV_T] = conv_time
    out[:, K.S_NEG_START] = best_s
    out[:, K.S_NEG_END] = best_e
    out[:, K.S_DIVERGED] = diverged
    out[:, K.S_T] = t_end
    out[:, K.S_D] = d
    out[:, K.S_W] = w
    out[:, K.S_MODE] = mode
    out[:, K.S_LOS] = los
    out[:, K.S_STEPS] = steps
    return out
