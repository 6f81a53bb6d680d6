"""Hot loops: the hybrid swing-equation integrator and the per-cell sweep.

Everything here is scalar code over float64 arrays so the same source runs
under numba or, with the JIT disabled, as plain Python. Parameters travel as
a flat vector indexed by the ``I_*`` constants below.
"""
import math

import numpy as np

from ._jit import njit

# parameter vector layout
I_P0, I_H, I_DP, I_WN, I_DWMAX, I_VREF, I_IMAX, I_BETA, I_ALPHA, I_Z, I_RES = range(11)
N_PARAMS = 11

NORMAL = 0
SATURATED = 1

FORCED_SATURATION = 0
RETURN_PRIORITY = 1
FROZEN = 2

NEITHER = 0
S_MINUS_R = 1
R_MINUS_S = 2
S_AND_R = 3

CONVERGED_SEP = 0
CONVERGED_SAT_SEP = 1
LOSS_OF_SYNC = 2
POLE_SLIP = 3
UNDETERMINED = 4

# classifier vector layout
C_SE, C_SSE, C_UE, C_HAS_SE, C_HAS_SSE, C_TOL_DEG, C_TOL_W, C_DWELL, C_T_START = range(9)
N_CLS = 9

# summary vector layout
S_KIND, S_SLIP, S_CONV_T, S_NEG_START, S_NEG_END, S_DIVERGED, S_T, S_D, S_W, S_MODE, S_LOS, S_STEPS = range(12)
N_SUMMARY = 12

SAMPLE_COLS = 6  # t, delta, d_omega, mode, p, v_g
EVENT_COLS = 8   # t, delta, d_omega, region_from, region_to, mode_from, mode_to, segment

MAX_EVENTS_PER_STEP = 16
BISECT_ITERS = 60
TIME_TOL = 1e-9
BISECT_TIME_TOL = 1e-10  # seconds
LOS_EXCURSION = 90.0


@njit
def wrap_deg(d):
    w = (d + 180.0) % 360.0 - 180.0
    if w == -180.0:
        w = 180.0
    return w


@njit
def power(d_deg, mode, vg, pv):
    d = math.radians(d_deg)
    if mode == NORMAL:
        return (pv[I_VREF] * pv[I_VREF] * math.sin(pv[I_ALPHA])
                + vg * pv[I_VREF] * math.sin(d - pv[I_ALPHA])) / pv[I_Z]
    return pv[I_RES] * pv[I_IMAX] * pv[I_IMAX] + vg * pv[I_IMAX] * math.cos(d + pv[I_BETA])


@njit
def rhs(d, w, mode, vg, pv, damping, limit):
    """Swing equation: returns (d delta/dt in deg/s, d omega/dt in p.u./s)."""
    acc = pv[I_P0] - power(d, mode, vg, pv)
    if damping:
        acc -= w / pv[I_DP]
    acc /= 2.0 * pv[I_H]
    if limit:
        if w >= pv[I_DWMAX] and acc > 0.0:
            acc = 0.0
        elif w <= -pv[I_DWMAX] and acc < 0.0:
            acc = 0.0
    return math.degrees(pv[I_WN] * w), acc


@njit
def rk4(d, w, mode, vg, pv, dt, damping, limit):
    k1d, k1w = rhs(d, w, mode, vg, pv, damping, limit)
    k2d, k2w = rhs(d + 0.5 * dt * k1d, w + 0.5 * dt * k1w, mode, vg, pv, damping, limit)
    k3d, k3w = rhs(d + 0.5 * dt * k2d, w + 0.5 * dt * k2w, mode, vg, pv, damping, limit)
    k4d, k4w = rhs(d + dt * k3d, w + dt * k3w, mode, vg, pv, damping, limit)
    return (d + dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
            w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w))


@njit
def in_arcs(w, arcs, n):
    for i in range(n):
        lo = arcs[i, 0]
        hi = arcs[i, 1]
        if lo <= w <= hi:
            return True
        if w == 180.0 and lo == -180.0:
            return True
    return False


@njit
def region(d, s_arcs, ns, r_arcs, nr):
    w = wrap_deg(d)
    in_s = in_arcs(w, s_arcs, ns)
    in_r = in_arcs(w, r_arcs, nr)
    if in_s and in_r:
        return S_AND_R
    if in_s:
        return S_MINUS_R
    if in_r:
        return R_MINUS_S
    return NEITHER


@njit
def next_mode(mode, reg, policy):
    if policy == FROZEN:
        return mode
    if reg == S_MINUS_R:
        return SATURATED
    if reg == R_MINUS_S:
        return NORMAL
    if reg == S_AND_R:
        if policy == FORCED_SATURATION:
            return SATURATED
        # both entering and returning conditions hold: flip every evaluation
        return NORMAL if mode == SATURATED else SATURATED
    return mode


@njit
def _grow(a):
    b = np.empty((a.shape[0] * 2, a.shape[1]))
    b[:a.shape[0]] = a
    return b


@njit
def _log(events, ne, t, d, w, r_from, r_to, m_from, m_to, seg):
    if ne >= events.shape[0]:
        events = _grow(events)
    events[ne, 0] = t
    events[ne, 1] = d
    events[ne, 2] = w
    events[ne, 3] = r_from
    events[ne, 4] = r_to
    events[ne, 5] = m_from
    events[ne, 6] = m_to
    events[ne, 7] = seg
    return events, ne + 1


@njit
def _push_sample(samples, ns_, t, d, w, mode, p, vg):
    if ns_ >= samples.shape[0]:
        samples = _grow(samples)
    samples[ns_, 0] = t
    samples[ns_, 1] = d
    samples[ns_, 2] = w
    samples[ns_, 3] = mode
    samples[ns_, 4] = p
    samples[ns_, 5] = vg
    return samples, ns_ + 1


@njit
def _clamp_w(w, dwmax):
    if w > dwmax:
        return dwmax
    if w < -dwmax:
        return -dwmax
    return w


@njit
def integrate_kernel(d0, w0, mode0, pv,
                     seg_t, seg_vg, seg_jump, seg_s, seg_ns, seg_r, seg_nr,
                     h, t_max, event_tol, sample_every, policy, damping, limit,
                     cls, record, early_exit):
    """Fixed-step RK4 through a piecewise-constant grid timeline.

    Region changes and frequency-limit hits inside a step are located by
    bisection on the step fraction and the step is split there. Returns
    ``(samples, events, summary)``; see the column constants above.
    """
    nseg = seg_t.shape[0]
    n_steps = int(math.ceil(t_max / h - 1e-9))
    dwmax = pv[I_DWMAX]

    cap = n_steps // max(sample_every, 1) + nseg + 16 if record else 1
    samples = np.empty((cap, SAMPLE_COLS))
    ns_ = 0
    events = np.empty((64 if record else 1, EVENT_COLS))
    ne = 0
    summary = np.zeros(N_SUMMARY)

    d = d0
    w = w0
    mode = mode0
    t = 0.0
    seg = 0
    vg = seg_vg[0]
    d -= seg_jump[0]
    if limit:
        w = _clamp_w(w, dwmax)
    s_arcs = seg_s[0]
    r_arcs = seg_r[0]
    n_s = seg_ns[0]
    n_r = seg_nr[0]
    reg = region(d, s_arcs, n_s, r_arcs, n_r)
    new = next_mode(mode, reg, policy)
    if new != mode and record:
        events, ne = _log(events, ne, t, d, w, reg, reg, mode, new, seg)
    mode = new
    if record:
        samples, ns_ = _push_sample(samples, ns_, t, d, w, mode, power(d, mode, vg, pv), vg)

    # classifier state
    t_cls = cls[C_T_START]
    dwell_kind = -1
    dwell_start = 0.0
    converged = -1
    conv_time = -1.0
    net = 0
    cross_at = 0.0
    cross_dir = 0
    los = False
    d_prev = d
    # longest stretch of negative power
    in_neg = False
    neg_s = 0.0
    best_s = -1.0
    best_e = -1.0
    diverged = False
    steps_done = 0

    for n in range(n_steps):
        t_end = (n + 1) * h
        if t_end > t_max:
            t_end = t_max
        while t < t_end - TIME_TOL * h:
            target = t_end
            seg_break = False
            if seg + 1 < nseg and seg_t[seg + 1] <= target + TIME_TOL * h:
                target = seg_t[seg + 1]
                seg_break = True
            n_ev = 0
            while t < target - TIME_TOL * h:
                dt = target - t
                d1, w1 = rk4(d, w, mode, vg, pv, dt, damping, limit)
                r1 = region(d1, s_arcs, n_s, r_arcs, n_r)
                over = limit and (w1 > dwmax or w1 < -dwmax)
                if (r1 == reg and not over) or n_ev >= MAX_EVENTS_PER_STEP:
                    d = d1
                    w = w1
                    t = target
                    if limit:
                        w = _clamp_w(w, dwmax)
                    if r1 != reg:
                        new = next_mode(mode, r1, policy)
                        if record:
                            events, ne = _log(events, ne, t, d, w, reg, r1, mode, new, seg)
                        reg = r1
                        mode = new
                    break
                # bisection on the fraction of the remaining interval
                lo = 0.0
                hi = 1.0
                dl = d
                dh = d1
                wh = w1
                for _ in range(BISECT_ITERS):
                    if abs(dh - dl) < event_tol and (hi - lo) * dt < BISECT_TIME_TOL:
                        break
                    mid = 0.5 * (lo + hi)
                    dm, wm = rk4(d, w, mode, vg, pv, mid * dt, damping, limit)
                    hit = region(dm, s_arcs, n_s, r_arcs, n_r) != reg
                    if limit and (wm > dwmax or wm < -dwmax):
                        hit = True
                    if hit:
                        hi = mid
                        dh = dm
                        wh = wm
                    else:
                        lo = mid
                        dl = dm
                t = t + hi * dt
                d = dh
                w = wh
                if limit:
                    w = _clamp_w(w, dwmax)
                r_new = region(d, s_arcs, n_s, r_arcs, n_r)
                if r_new != reg:
                    new = next_mode(mode, r_new, policy)
                    if record:
                        events, ne = _log(events, ne, t, d, w, reg, r_new, mode, new, seg)
                    reg = r_new
                    mode = new
                n_ev += 1
            t = target
            if seg_break:
                seg += 1
                vg = seg_vg[seg]
                if seg_jump[seg] != 0.0:
                    d -= seg_jump[seg]
                    d_prev = d
                s_arcs = seg_s[seg]
                r_arcs = seg_r[seg]
                n_s = seg_ns[seg]
                n_r = seg_nr[seg]
                r_new = region(d, s_arcs, n_s, r_arcs, n_r)
                new = next_mode(mode, r_new, policy)
                if record and (r_new != reg or new != mode):
                    events, ne = _log(events, ne, t, d, w, reg, r_new, mode, new, seg)
                reg = r_new
                mode = new
                if record:
                    samples, ns_ = _push_sample(samples, ns_, t, d, w, mode, power(d, mode, vg, pv), vg)
        t = t_end
        steps_done = n + 1

        if not (math.isfinite(d) and math.isfinite(w)):
            diverged = True
            break

        # step-end transition; a no-op except for chattering in S and R
        new = next_mode(mode, reg, policy)
        if new != mode:
            if record:
                events, ne = _log(events, ne, t, d, w, reg, reg, mode, new, seg)
            mode = new

        p = power(d, mode, vg, pv)
        if p < 0.0:
            if not in_neg:
                in_neg = True
                neg_s = t
        elif in_neg:
            in_neg = False
            if t - neg_s > best_e - best_s:
                best_s = neg_s
                best_e = t

        u_prev = wrap_deg(d_prev - cls[C_UE])
        u_now = wrap_deg(d - cls[C_UE])
        if abs(u_now - u_prev) < 180.0:
            if d > d_prev and u_prev < 0.0 <= u_now:
                net += 1
                cross_at = d - u_now
                cross_dir = 1
            elif d < d_prev and u_now < 0.0 <= u_prev:
                net -= 1
                cross_at = d - u_now
                cross_dir = -1
        d_prev = d
        if cross_dir != 0 and (d - cross_at) * cross_dir >= LOS_EXCURSION:
            los = True

        if converged < 0 and t >= t_cls - TIME_TOL * h:
            cand = -1
            if (mode == NORMAL and cls[C_HAS_SE] > 0.5
                    and abs(wrap_deg(d - cls[C_SE])) < cls[C_TOL_DEG] and abs(w) < cls[C_TOL_W]):
                cand = CONVERGED_SEP
            elif (mode == SATURATED and cls[C_HAS_SSE] > 0.5
                    and abs(wrap_deg(d - cls[C_SSE])) < cls[C_TOL_DEG] and abs(w) < cls[C_TOL_W]):
                cand = CONVERGED_SAT_SEP
            if cand != dwell_kind:
                dwell_kind = cand
                dwell_start = t
            if cand >= 0 and t - dwell_start >= cls[C_DWELL] - TIME_TOL * h:
                converged = cand
                conv_time = dwell_start

        if record and (n + 1) % sample_every == 0:
            if samples[ns_ - 1, 0] != t:
                samples, ns_ = _push_sample(samples, ns_, t, d, w, mode, p, vg)

        if early_exit and converged >= 0:
            break

    if in_neg and t - neg_s > best_e - best_s:
        best_s = neg_s
        best_e = t
    if record and samples[ns_ - 1, 0] != t and math.isfinite(d) and math.isfinite(w):
        samples, ns_ = _push_sample(samples, ns_, t, d, w, mode, power(d, mode, vg, pv), vg)

    slips = net
    if converged >= 0:
        # which copy of the attractor the state settled on
        target = cls[C_SE] if converged == CONVERGED_SEP else cls[C_SSE]
        slips = int(math.floor((d - target) / 360.0 + 0.5))
        kind = converged if slips == 0 else POLE_SLIP
    elif los:
        kind = LOSS_OF_SYNC
    else:
        kind = UNDETERMINED
    summary[S_KIND] = kind
    summary[S_SLIP] = slips
    summary[S_CONV_T] = conv_time
    summary[S_NEG_START] = best_s
    summary[S_NEG_END] = best_e
    summary[S_DIVERGED] = 1.0 if diverged else 0.0
    summary[S_T] = t
    summary[S_D] = d
    summary[S_W] = w
    summary[S_MODE] = mode
    summary[S_LOS] = 1.0 if los else 0.0
    summary[S_STEPS] = steps_done
    return samples[:ns_], events[:ne], summary


@njit
def sweep_kernel(d0s, w0s, modes, pv, seg_t, seg_vg, seg_jump, seg_s, seg_ns, seg_r, seg_nr,
                 h, t_max, event_tol, policy, damping, limit, cls, out):
    """Classify every initial condition; ``out`` receives one summary row per cell."""
    for i in range(d0s.shape[0]):
        _, _, summary = integrate_kernel(
            d0s[i], w0s[i], modes[i], pv, seg_t, seg_vg, seg_jump, seg_s, seg_ns, seg_r, seg_nr,
            h, t_max, event_tol, 1, policy, damping, limit, cls, False, True)
        out[i] = summary
