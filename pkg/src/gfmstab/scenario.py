"""Disturbance scenarios, outcome classification and the eight reference cases."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import kernels as K
from .analytics import Region, entering_set, equilibria, sep_angle
from .hybrid_sim import (
    ConvergenceCriteria, GridSegment, Mode, SimConfig, SystemState, Trajectory, integrate,
    mode_sets,
)
from .params import ConverterParams, GridParams, reference_converter, reference_grid


class InfeasibleOperatingPoint(ValueError):
    """No stable normal-mode operating point for the requested power."""


class OutcomeKind(str, enum.Enum):
    CONVERGED_SEP = "ConvergedSEP"
    CONVERGED_SAT_SEP = "ConvergedSatSEP"
    LOSS_OF_SYNC = "LossOfSynchronism"
    POLE_SLIP = "PoleSlipResync"
    UNDETERMINED = "Undetermined"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "OutcomeKind":
        return _KINDS_BY_CODE[int(code)]


_KIND_CODES = {
    OutcomeKind.CONVERGED_SEP: K.CONVERGED_SEP,
    OutcomeKind.CONVERGED_SAT_SEP: K.CONVERGED_SAT_SEP,
    OutcomeKind.LOSS_OF_SYNC: K.LOSS_OF_SYNC,
    OutcomeKind.POLE_SLIP: K.POLE_SLIP,
    OutcomeKind.UNDETERMINED: K.UNDETERMINED,
}
_KINDS_BY_CODE = {v: k for k, v in _KIND_CODES.items()}


class Cause(str, enum.Enum):
    C1 = "C1"
    C2 = "C2"


@dataclass(frozen=True)
class VoltageStep:
    v_g: float

    def __post_init__(self):
        if not self.v_g >= 0.0:
            raise ValueError(f"v_g must be >= 0, got {self.v_g}")


@dataclass(frozen=True)
class PhaseJump:
    """Step of the grid voltage angle; the converter angle relative to the grid drops by it."""

    degrees: float


Event = Union[VoltageStep, PhaseJump]


@dataclass(frozen=True)
class ModeEvent:
    t: float
    mode_from: Mode
    mode_to: Mode
    delta: float


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    cause: Cause | None
    slip_count: int
    final_delta: float
    mode_events: tuple[ModeEvent, ...]
    metrics: dict = field(default_factory=dict)
    diverged: bool = False


@dataclass(frozen=True)
class Scenario:
    conv: ConverterParams
    pre_fault_grid: GridParams
    events: tuple[tuple[float, Event], ...] = ()
    sim: SimConfig = field(default_factory=SimConfig)
    current_limit: bool = True
    criteria: ConvergenceCriteria = field(default_factory=ConvergenceCriteria)
    case_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple((float(t), ev) for t, ev in self.events))
        times = [t for t, _ in self.events]
        for t in times:
            if not 0.0 < t < self.sim.t_max:
                raise ValueError(f"event time {t} must lie in (0, t_max)")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")
        for _, ev in self.events:
            if not isinstance(ev, (VoltageStep, PhaseJump)):
                raise TypeError(f"unsupported event {ev!r}")

    def timeline(self) -> list[GridSegment]:
        segs = [GridSegment(0.0, self.pre_fault_grid)]
        grid = self.pre_fault_grid
        for t, ev in self.events:
            if isinstance(ev, VoltageStep):
                grid = grid.with_voltage(ev.v_g)
                segs.append(GridSegment(t, grid))
            else:
                segs.append(GridSegment(t, grid, phase_jump=ev.degrees))
        return segs

    @property
    def clearance_time(self) -> float | None:
        steps = [t for t, ev in self.events if isinstance(ev, VoltageStep)]
        return steps[-1] if steps else None

    @property
    def post_fault_grid(self) -> GridParams:
        return self.timeline()[-1].grid


def steady_state(conv: ConverterParams, grid: GridParams) -> SystemState:
    se = sep_angle(grid, conv)
    if se is None:
        raise InfeasibleOperatingPoint(f"no normal-mode equilibrium for p0 = {conv.p0}")
    if entering_set(grid, conv).contains(se):
        raise InfeasibleOperatingPoint(
            f"equilibrium {se:.4f} deg already violates the current limit")
    return SystemState(se, 0.0, Mode.NORMAL)


def _value_at(traj: Trajectory, t: float, series: np.ndarray) -> float:
    idx = np.flatnonzero(np.abs(traj.t - t) <= 1e-9)
    if idx.size == 0:
        return float(np.interp(t, traj.t, series))
    return float(series[idx[-1]])


def run(scenario: Scenario) -> tuple[Trajectory, Outcome]:
    initial = steady_state(scenario.conv, scenario.pre_fault_grid)
    traj = integrate(initial, scenario.timeline(), scenario.conv, scenario.sim,
                     freeze_mode=not scenario.current_limit, criteria=scenario.criteria)
    return traj, classify(traj, scenario)


def classify(traj: Trajectory, scenario: Scenario) -> Outcome:
    kind = OutcomeKind.from_code(traj.kind_code)
    cause = None
    if kind is OutcomeKind.CONVERGED_SAT_SEP:
        post = scenario.post_fault_grid
        sse = equilibria(post, scenario.conv).delta_se_sat
        cause = Cause.C1 if entering_set(post, scenario.conv).contains(sse) else Cause.C2

    t_clear = scenario.clearance_time
    metrics = {
        "delta_af": None if t_clear is None else _value_at(traj, t_clear, traj.delta),
        "d_omega_af": None if t_clear is None else _value_at(traj, t_clear, traj.d_omega),
        "delta_min": float(np.min(traj.delta)),
        "delta_max": float(np.max(traj.delta)),
        "negative_power_interval": traj.negative_power_interval,
        "convergence_time": traj.convergence_time,
    }
    events = tuple(ModeEvent(e.t, e.mode_from, e.mode_to, e.delta) for e in traj.mode_events)
    return Outcome(
        kind=kind,
        cause=cause,
        slip_count=traj.slip_count,
        final_delta=traj.final_state.delta,
        mode_events=events,
        metrics=metrics,
        diverged=traj.diverged,
    )


def check_c2_dynamic(trajectory: Trajectory, beta: float, grid: GridParams,
                     conv: ConverterParams, t_from: float | None = None,
                     method: str = "closed_form") -> bool:
    """Post-clearance trace never touches the returning set and stays between the UEs.

    ``t_from`` defaults to the last grid change of the trajectory's timeline.
    """
    if t_from is None:
        t_from = trajectory.segments[-1].t_start
    conv = conv if conv.beta == beta else conv.with_beta(beta)
    eq = equilibria(grid, conv)
    if eq.delta_ue1 is None:
        return False
    _, r = mode_sets(grid, conv, method)
    sel = trajectory.t >= t_from - 1e-12
    d = trajectory.delta[sel]
    if np.any(r.contains(d)):
        return False
    into_r = (Region.R_MINUS_S, Region.S_AND_R)
    if any(e.t >= t_from - 1e-12 and e.region_to in into_r for e in trajectory.events):
        return False
    return bool(np.all((d > eq.delta_ue2) & (d < eq.delta_ue1)))


FAULT_START = 0.05
FAULT_VOLTAGE = 0.05

# id: (beta, p0, fault duration s, current limit)
CASES = {
    "A": (-6.0, 0.87, 0.100, True),
    "B": (-30.0, 0.87, 0.100, True),
    "C": (-90.0, 0.87, 0.100, True),
    "D": (-60.0, 0.2, 0.600, True),
    "E": (-60.0, 0.2, 0.100, True),
    "F": (-30.0, 0.87, 0.290, True),
    "G": (-30.0, 0.87, 0.330, True),
    "H": (-30.0, 0.87, 0.400, False),
}


def builtin_case(case_id: str, sim: SimConfig | None = None) -> Scenario:
    key = str(case_id).upper()
    if key not in CASES:
        raise KeyError(f"unknown case {case_id!r}; expected one of {sorted(CASES)}")
    beta, p0, duration, limit = CASES[key]
    grid = reference_grid()
    return Scenario(
        conv=reference_converter(beta=beta, p0=p0),
        pre_fault_grid=grid,
        events=(
            (FAULT_START, VoltageStep(FAULT_VOLTAGE)),
            (round(FAULT_START + duration, 12), VoltageStep(grid.v_g)),
        ),
        sim=sim or SimConfig(),
        current_limit=limit,
        case_id=key,
    )
