"""Domain-of-attraction maps in the (delta, d_omega) plane."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from skimage.measure import find_contours

from . import batch
from . import kernels as K
from ._jit import JIT_ENABLED
from .analytics import entering_set, equilibria
from .hybrid_sim import (
    OVERLAP_POLICIES, ConvergenceCriteria, GridSegment, SimConfig, classifier_vector,
    pack_params, pack_segments,
)
from .params import ConverterParams, GridParams

INIT_MODE_RULES = ("by_region", "force_normal", "force_saturated")
NO_CAUSE, CAUSE_C1, CAUSE_C2 = 0, 1, 2
CAUSE_NAMES = {NO_CAUSE: "", CAUSE_C1: "C1", CAUSE_C2: "C2"}
CHUNK = 32


def _axis(lo, hi, count):
    lo, hi, count = float(lo), float(hi), int(count)
    if count < 2:
        raise ValueError(f"axis needs at least 2 points, got {count}")
    if not hi > lo:
        raise ValueError(f"axis bounds must increase, got ({lo}, {hi})")
    return lo, hi, count


@dataclass(frozen=True)
class DoaSpec:
    """Axes and initialization of a sweep.

    ``omega_axis=None`` spans ``+/- d_omega_max`` while the frequency limiter
    is active (any start outside that band is clamped onto its edge at
    t = 0) and ``+/- 0.02`` otherwise. ``current_limit=False`` pins the
    normal mode to map the unsaturated model.
    """

    delta_axis: tuple = (-180.0, 360.0, 200)
    omega_axis: tuple | None = None
    init_mode_rule: str = "by_region"
    current_limit: bool = True

    def __post_init__(self):
        object.__setattr__(self, "delta_axis", _axis(*self.delta_axis))
        if self.omega_axis is not None:
            object.__setattr__(self, "omega_axis", _axis(*self.omega_axis))
        if self.init_mode_rule not in INIT_MODE_RULES:
            raise ValueError(f"init_mode_rule must be one of {INIT_MODE_RULES}")

    def resolved_omega(self, conv: ConverterParams, freq_limit: bool = True) -> tuple:
        if self.omega_axis is not None:
            return self.omega_axis
        span = conv.d_omega_max if freq_limit else 0.02
        return (-span, span, 100)


@dataclass
class DoaGrid:
    delta_axis: tuple
    omega_axis: tuple
    labels: np.ndarray          # (n_omega, n_delta) outcome codes, row-major
    causes: np.ndarray          # NO_CAUSE / CAUSE_C1 / CAUSE_C2
    diverged: np.ndarray        # diagnostic flag per cell
    init_mode_rule: str = "by_region"
    summaries: np.ndarray | None = field(default=None, repr=False)

    @property
    def deltas(self) -> np.ndarray:
        return np.linspace(*self.delta_axis)

    @property
    def omegas(self) -> np.ndarray:
        return np.linspace(*self.omega_axis)

    def count(self, kind_code: int) -> int:
        return int(np.count_nonzero(self.labels == kind_code))

    def sep_fraction(self) -> float:
        return self.count(K.CONVERGED_SEP) / self.labels.size


def worker_count(requested: int | None = None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("GFM_STAB_THREADS", "").strip()
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, int(n))


def initial_modes(deltas, grid: GridParams, conv: ConverterParams, rule: str) -> np.ndarray:
    d = np.asarray(deltas, dtype=float)
    if rule == "force_normal":
        return np.zeros(d.shape, dtype=np.int64)
    if rule == "force_saturated":
        return np.ones(d.shape, dtype=np.int64)
    return entering_set(grid, conv).contains(d).astype(np.int64)


def sweep(grid: GridParams, conv: ConverterParams, grid_spec: DoaSpec | None = None,
          sim_config: SimConfig | None = None, *, criteria: ConvergenceCriteria | None = None,
          workers: int | None = None, backend: str = "auto") -> DoaGrid:
    """Classify every cell of the grid as an initial state with no disturbance.

    ``backend`` is ``"numba"`` (compiled per-cell integrator, threaded),
    ``"numpy"`` (vectorized lockstep fallback) or ``"auto"``.
    """
    spec = grid_spec or DoaSpec()
    cfg = sim_config or SimConfig()
    crit = criteria or ConvergenceCriteria()
    if backend == "auto":
        backend = "numba" if JIT_ENABLED else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")

    d_axis = spec.delta_axis
    w_axis = spec.resolved_omega(conv, cfg.freq_limit)
    dd, ww = np.meshgrid(np.linspace(*d_axis), np.linspace(*w_axis))
    d0s = dd.ravel()
    w0s = ww.ravel()
    rule = spec.init_mode_rule if spec.current_limit else "force_normal"
    modes = initial_modes(d0s, grid, conv, rule)

    policy = OVERLAP_POLICIES[cfg.overlap_policy] if spec.current_limit else K.FROZEN
    pv = pack_params(grid, conv)
    seg_t, seg_vg, seg_jump, seg_s, seg_ns, seg_r, seg_nr = pack_segments(
        [GridSegment(0.0, grid)], conv, cfg.returning_method)
    cls = classifier_vector(grid, conv, crit, 0.0, spec.current_limit)
    n = d0s.size
    out = np.zeros((n, K.N_SUMMARY))

    if backend == "numpy":
        out[:] = batch.sweep(d0s, w0s, modes, pv, seg_s[0], seg_ns[0], seg_r[0], seg_nr[0],
                             grid.v_g, cfg.step, cfg.t_max, policy, cfg.damping,
                             cfg.freq_limit, cls)
    else:
        args = (pv, seg_t, seg_vg, seg_jump, seg_s, seg_ns, seg_r, seg_nr,
                float(cfg.step), float(cfg.t_max), float(cfg.event_tol), policy,
                bool(cfg.damping), bool(cfg.freq_limit), cls)

        def work(lo):
            hi = min(lo + CHUNK, n)
            K.sweep_kernel(d0s[lo:hi], w0s[lo:hi], modes[lo:hi], *args, out[lo:hi])

        starts = range(0, n, CHUNK)
        nw = worker_count(workers)
        if nw == 1:
            for lo in starts:
                work(lo)
        else:
            work(0)  # compile before fanning out
            with ThreadPoolExecutor(max_workers=nw) as pool:
                list(pool.map(work, starts[1:]))

    labels = out[:, K.S_KIND].astype(np.int8)
    causes = np.zeros(n, dtype=np.int8)
    sse = equilibria(grid, conv).delta_se_sat
    if sse is not None:
        c = CAUSE_C1 if entering_set(grid, conv).contains(sse) else CAUSE_C2
        causes[labels == K.CONVERGED_SAT_SEP] = c
    shape = dd.shape
    return DoaGrid(
        delta_axis=d_axis,
        omega_axis=w_axis,
        labels=labels.reshape(shape),
        causes=causes.reshape(shape),
        diverged=out[:, K.S_DIVERGED].astype(bool).reshape(shape),
        init_mode_rule=rule,
        summaries=out.reshape(shape + (K.N_SUMMARY,)),
    )


def boundary(doa_grid: DoaGrid, kind_code: int = K.CONVERGED_SEP) -> list[np.ndarray]:
    """Marching-squares border of the cells labelled ``kind_code``.

    Each polyline is an ``(m, 2)`` array of ``(delta_deg, d_omega_pu)``
    vertices lying halfway between a basin cell and its non-basin neighbour.
    """
    mask = (doa_grid.labels == kind_code).astype(float)
    if not mask.any() or mask.all():
        return []
    d_lo, d_hi, nd = doa_grid.delta_axis
    w_lo, w_hi, nw = doa_grid.omega_axis
    d_step = (d_hi - d_lo) / (nd - 1)
    w_step = (w_hi - w_lo) / (nw - 1)
    lines = []
    for c in find_contours(mask, 0.5):
        lines.append(np.column_stack([d_lo + c[:, 1] * d_step, w_lo + c[:, 0] * w_step]))
    return lines


def point_label(doa_grid: DoaGrid, delta: float, d_omega: float) -> int:
    """Label of the cell nearest to ``(delta, d_omega)``."""
    d = doa_grid.deltas
    w = doa_grid.omegas
    i = int(np.argmin(np.abs(w - d_omega)))
    j = int(np.argmin(np.abs(d - delta)))
    return int(doa_grid.labels[i, j])


def vector_field(grid: GridParams, conv: ConverterParams, spec: DoaSpec | None = None,
                 sim_config: SimConfig | None = None) -> dict:
    """Swing-equation velocity at every grid point under the sweep's initial-mode rule."""
    spec = spec or DoaSpec()
    cfg = sim_config or SimConfig()
    w_axis = spec.resolved_omega(conv, cfg.freq_limit)
    dd, ww = np.meshgrid(np.linspace(*spec.delta_axis), np.linspace(*w_axis))
    rule = spec.init_mode_rule if spec.current_limit else "force_normal"
    modes = initial_modes(dd.ravel(), grid, conv, rule)
    pv = pack_params(grid, conv)
    w = ww.ravel()
    if cfg.freq_limit:
        w = np.clip(w, -conv.d_omega_max, conv.d_omega_max)
    dd_dt, dw_dt = batch.rhs(dd.ravel(), w, modes, grid.v_g, pv, cfg.damping, cfg.freq_limit)
    return {
        "delta_deg": dd.ravel(),
        "omega_dev_pu": ww.ravel(),
        "ddelta_dt": dd_dt,
        "domega_dt": dw_dt,
        "mode": modes,
    }

