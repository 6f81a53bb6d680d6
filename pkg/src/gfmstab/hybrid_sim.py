"""Two-state swing equation with mode-dependent power and a four-region mode automaton."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels as K
from .analytics import (
    Region, entering_set, equilibria, i_unsat, returning_set, unsaturated_ue, v_sat,
)
from .angleset import AngleSet, wrap_angle
from .params import ConverterParams, GridParams

MAX_ARCS = 8

OVERLAP_POLICIES = {
    "forced_saturation": K.FORCED_SATURATION,
    "return_priority": K.RETURN_PRIORITY,
}
RETURNING_MODELS = ("closed_form", "exact")

CSV_HEADER = ["time_s", "delta_deg", "omega_dev_pu", "mode", "p_pu", "vd_pu", "vq_pu", "i_mag_pu"]


class Mode(enum.IntEnum):
    NORMAL = K.NORMAL
    SATURATED = K.SATURATED


@dataclass(frozen=True)
class SystemState:
    delta: float
    d_omega: float = 0.0
    mode: Mode = Mode.NORMAL


@dataclass(frozen=True)
class SimConfig:
    step: float = 1e-4
    t_max: float = 10.0
    overlap_policy: str = "forced_saturation"
    event_tol: float = 1e-6
    sample_every: int = 10
    returning_method: str = "closed_form"
    damping: bool = True
    freq_limit: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if not self.event_tol > 0:
            raise ValueError(f"event_tol must be > 0, got {self.event_tol}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValueError(f"sample_every must be a positive integer, got {self.sample_every}")
        if self.overlap_policy not in OVERLAP_POLICIES:
            raise ValueError(f"overlap_policy must be one of {sorted(OVERLAP_POLICIES)}")
        if self.returning_method not in RETURNING_MODELS:
            raise ValueError(f"returning_method must be one of {RETURNING_MODELS}")


@dataclass(frozen=True)
class ConvergenceCriteria:
    """Window an equilibrium must hold a trajectory in before it counts as converged."""

    angle_tol: float = 0.5
    omega_tol: float = 1e-4
    dwell: float = 0.5


@dataclass(frozen=True)
class GridSegment:
    t_start: float
    grid: GridParams
    phase_jump: float = 0.0


@dataclass(frozen=True)
class RegionEvent:
    t: float
    delta: float
    d_omega: float
    region_from: Region
    region_to: Region
    mode_from: Mode
    mode_to: Mode

    @property
    def mode_changed(self) -> bool:
        return self.mode_from != self.mode_to


@dataclass
class Trajectory:
    t: np.ndarray
    delta: np.ndarray
    d_omega: np.ndarray
    mode: np.ndarray
    p: np.ndarray
    v_g: np.ndarray
    events: list[RegionEvent]
    segments: tuple[GridSegment, ...]
    conv: ConverterParams
    kind_code: int
    slip_count: int
    convergence_time: float | None
    negative_power_interval: tuple[float, float] | None
    lost_sync_excursion: bool
    diverged: bool
    final_state: SystemState
    frozen_mode: bool = False
    config: SimConfig = field(default_factory=SimConfig)

    @property
    def mode_events(self) -> list[RegionEvent]:
        return [e for e in self.events if e.mode_changed]

    def terminal_quantities(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-sample ``(v_d, v_q, |i|)``; normal mode holds the voltage reference."""
        vd = np.empty_like(self.delta)
        vq = np.empty_like(self.delta)
        im = np.empty_like(self.delta)
        base = self.segments[0].grid
        for vg in np.unique(self.v_g):
            grid = base.with_voltage(float(vg))
            sel = self.v_g == vg
            sat = sel & (self.mode == Mode.SATURATED)
            nor = sel & (self.mode == Mode.NORMAL)
            if sat.any():
                vd[sat], vq[sat] = v_sat(self.delta[sat], grid, self.conv)
                im[sat] = self.conv.i_s_max
            if nor.any():
                vd[nor] = self.conv.v_d_ref
                vq[nor] = 0.0
                im[nor] = i_unsat(self.delta[nor], grid, self.conv)
        return vd, vq, im

    def to_csv(self, path) -> None:
        vd, vq, im = self.terminal_quantities()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for k in range(self.t.size):
                writer.writerow([
                    f"{self.t[k]:.6f}",
                    f"{self.delta[k]:.4f}",
                    f"{self.d_omega[k]:.8f}",
                    int(self.mode[k]),
                    f"{self.p[k]:.6f}",
                    f"{vd[k]:.6f}",
                    f"{vq[k]:.6f}",
                    f"{im[k]:.6f}",
                ])


def pack_params(grid: GridParams, conv: ConverterParams) -> np.ndarray:
    pv = np.zeros(K.N_PARAMS)
    pv[K.I_P0] = conv.p0
    pv[K.I_H] = conv.h
    pv[K.I_DP] = conv.d_p
    pv[K.I_WN] = conv.omega_n
    pv[K.I_DWMAX] = conv.d_omega_max
    pv[K.I_VREF] = conv.v_d_ref
    pv[K.I_IMAX] = conv.i_s_max
    pv[K.I_BETA] = conv.beta_rad
    pv[K.I_ALPHA] = grid.alpha_rad
    pv[K.I_Z] = grid.z
    pv[K.I_RES] = grid.r
    return pv


def mode_sets(grid: GridParams, conv: ConverterParams,
              method: str = "closed_form") -> tuple[AngleSet, AngleSet]:
    """Entering and returning sets as the automaton sees them."""
    return entering_set(grid, conv), returning_set(conv.beta, grid, conv, method)


def swing_rhs(state: SystemState, grid: GridParams, conv: ConverterParams) -> tuple[float, float]:
    """``(d delta/dt [deg/s], d omega/dt [p.u./s])`` with the frequency limiter active."""
    return K.rhs(float(state.delta), float(state.d_omega), int(state.mode), grid.v_g,
                 pack_params(grid, conv), True, True)


def transition(mode: Mode, delta_wrapped: float, beta: float, grid: GridParams,
               conv: ConverterParams, overlap_policy: str = "forced_saturation",
               method: str = "closed_form") -> Mode:
    conv = conv if conv.beta == beta else conv.with_beta(beta)
    s, r = mode_sets(grid, conv, method)
    s_arr, ns = s.as_array(MAX_ARCS)
    r_arr, nr = r.as_array(MAX_ARCS)
    reg = K.region(float(delta_wrapped), s_arr, ns, r_arr, nr)
    return Mode(K.next_mode(int(mode), reg, OVERLAP_POLICIES[overlap_policy]))


def energy(delta, d_omega, mode: Mode, grid: GridParams, conv: ConverterParams):
    """First integral of the undamped, unlimited swing equation in a fixed mode."""
    d = np.radians(delta)
    if mode == Mode.NORMAL:
        a = grid.alpha_rad
        pot = (conv.v_d_ref ** 2 * math.sin(a) / grid.z * d
               - grid.v_g * conv.v_d_ref / grid.z * np.cos(d - a))
    else:
        i = conv.i_s_max
        pot = grid.r * i * i * d + grid.v_g * i * np.sin(d + conv.beta_rad)
    return conv.h * conv.omega_n * np.asarray(d_omega) ** 2 + pot - conv.p0 * d


def _as_segments(grid_timeline) -> tuple[GridSegment, ...]:
    if isinstance(grid_timeline, GridParams):
        return (GridSegment(0.0, grid_timeline),)
    segs = []
    for item in grid_timeline:
        if isinstance(item, GridSegment):
            segs.append(item)
        else:
            t0, g = item
            segs.append(GridSegment(float(t0), g))
    if not segs or segs[0].t_start != 0.0:
        raise ValueError("grid timeline must start at t = 0")
    for a, b in zip(segs, segs[1:]):
        if not b.t_start > a.t_start:
            raise ValueError("grid timeline times must be strictly increasing")
        if (b.grid.z, b.grid.x_over_r) != (a.grid.z, a.grid.x_over_r):
            raise ValueError("grid timeline may only change v_g, not the impedance")
    return tuple(segs)


def pack_segments(segs: Sequence[GridSegment], conv: ConverterParams, method: str):
    n = len(segs)
    seg_t = np.array([s.t_start for s in segs], dtype=float)
    seg_vg = np.array([s.grid.v_g for s in segs], dtype=float)
    seg_jump = np.array([s.phase_jump for s in segs], dtype=float)
    seg_s = np.zeros((n, MAX_ARCS, 2))
    seg_r = np.zeros((n, MAX_ARCS, 2))
    seg_ns = np.zeros(n, dtype=np.int64)
    seg_nr = np.zeros(n, dtype=np.int64)
    for k, seg in enumerate(segs):
        s, r = mode_sets(seg.grid, conv, method)
        seg_s[k], seg_ns[k] = s.as_array(MAX_ARCS)
        seg_r[k], seg_nr[k] = r.as_array(MAX_ARCS)
    return seg_t, seg_vg, seg_jump, seg_s, seg_ns, seg_r, seg_nr


def classifier_vector(grid: GridParams, conv: ConverterParams, criteria: ConvergenceCriteria,
                      t_start: float, saturation_possible: bool) -> np.ndarray:
    eq = equilibria(grid, conv)
    ue_unsat = unsaturated_ue(grid, conv)
    if saturation_possible and eq.delta_ue1 is not None:
        ue = eq.delta_ue1
    elif ue_unsat is not None:
        ue = ue_unsat
    elif eq.delta_se is not None:
        ue = eq.delta_se + 180.0
    else:
        ue = 180.0
    cls = np.zeros(K.N_CLS)
    cls[K.C_SE] = eq.delta_se if eq.delta_se is not None else 0.0
    cls[K.C_HAS_SE] = eq.delta_se is not None
    cls[K.C_SSE] = eq.delta_se_sat if eq.delta_se_sat is not None else 0.0
    cls[K.C_HAS_SSE] = saturation_possible and eq.delta_se_sat is not None
    cls[K.C_UE] = ue
    cls[K.C_TOL_DEG] = criteria.angle_tol
    cls[K.C_TOL_W] = criteria.omega_tol
    cls[K.C_DWELL] = criteria.dwell
    cls[K.C_T_START] = t_start
    return cls


def integrate(initial_state: SystemState, grid_timeline, conv: ConverterParams,
              sim_config: SimConfig | None = None, *, freeze_mode: bool = False,
              criteria: ConvergenceCriteria | None = None,
              early_exit: bool = False) -> Trajectory:
    """Integrate from ``initial_state`` through a piecewise-constant grid timeline.

    ``grid_timeline`` is a single :class:`GridParams`, or a sequence of
    :class:`GridSegment` / ``(t_start, GridParams)`` beginning at t = 0.
    ``freeze_mode`` pins the initial mode for the whole run (no current
    limiter when that mode is normal). Classification starts at the last
    timeline discontinuity.
    """
    cfg = sim_config or SimConfig()
    crit = criteria or ConvergenceCriteria()
    segs = _as_segments(grid_timeline)
    if segs[-1].t_start >= cfg.t_max:
        raise ValueError("every timeline change must happen before t_max")
    policy = K.FROZEN if freeze_mode else OVERLAP_POLICIES[cfg.overlap_policy]
    pv = pack_params(segs[0].grid, conv)
    packed = pack_segments(segs, conv, cfg.returning_method)
    saturating = not (freeze_mode and initial_state.mode == Mode.NORMAL)
    cls = classifier_vector(segs[-1].grid, conv, crit, segs[-1].t_start, saturating)

    samples, events, summary = K.integrate_kernel(
        float(initial_state.delta), float(initial_state.d_omega), int(initial_state.mode), pv,
        *packed, float(cfg.step), float(cfg.t_max), float(cfg.event_tol), int(cfg.sample_every),
        policy, bool(cfg.damping), bool(cfg.freq_limit), cls, True, bool(early_exit))

    ev = [
        RegionEvent(
            t=float(row[0]), delta=float(wrap_angle(row[1])), d_omega=float(row[2]),
            region_from=Region.from_code(row[3]), region_to=Region.from_code(row[4]),
            mode_from=Mode(int(row[5])), mode_to=Mode(int(row[6])),
        )
        for row in events
    ]
    neg = None
    if summary[K.S_NEG_START] >= 0.0:
        neg = (float(summary[K.S_NEG_START]), float(summary[K.S_NEG_END]))
    conv_t = float(summary[K.S_CONV_T])
    return Trajectory(
        t=samples[:, 0].copy(),
        delta=samples[:, 1].copy(),
        d_omega=samples[:, 2].copy(),
        mode=samples[:, 3].astype(np.int8),
        p=samples[:, 4].copy(),
        v_g=samples[:, 5].copy(),
        events=ev,
        segments=segs,
        conv=conv,
        kind_code=int(summary[K.S_KIND]),
        slip_count=int(summary[K.S_SLIP]),
        convergence_time=conv_t if conv_t >= 0.0 else None,
        negative_power_interval=neg,
        lost_sync_excursion=bool(summary[K.S_LOS]),
        diverged=bool(summary[K.S_DIVERGED]),
        final_state=SystemState(float(summary[K.S_D]), float(summary[K.S_W]),
                                Mode(int(summary[K.S_MODE]))),
        frozen_mode=freeze_mode,
        config=cfg,
    )
