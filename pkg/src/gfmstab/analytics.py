"""Closed-form power-angle, saturation-set and equilibrium analytics.

All functions are pure. ``delta`` arguments accept scalars or numpy arrays
(degrees); set-valued results are :class:`AngleSet` instances.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .angleset import AngleSet, wrap_angle
from .params import ConverterParams, GridParams, ParameterError


class Region(str, enum.Enum):
    NEITHER = "neither"
    S_MINUS_R = "S_minus_R"
    R_MINUS_S = "R_minus_S"
    S_AND_R = "S_and_R"

    @property
    def code(self) -> int:
        return _REGION_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Region":
        return _REGIONS_BY_CODE[int(code)]


_REGION_CODES = {Region.NEITHER: 0, Region.S_MINUS_R: 1, Region.R_MINUS_S: 2, Region.S_AND_R: 3}
_REGIONS_BY_CODE = {v: k for k, v in _REGION_CODES.items()}

RETURNING_METHODS = ("closed_form", "exact")


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def p_unsat(delta, grid: GridParams, conv: ConverterParams):
    """Active power in normal (voltage-source) mode."""
    d = np.radians(delta)
    a = grid.alpha_rad
    out = (conv.v_d_ref ** 2 * math.sin(a) + grid.v_g * conv.v_d_ref * np.sin(d - a)) / grid.z
    return _scalar(out)


def v_sat(delta, grid: GridParams, conv: ConverterParams):
    """Terminal voltage ``(v_d, v_q)`` in the local frame while the current is saturated."""
    d = np.radians(delta)
    gap = grid.alpha_rad - conv.beta_rad
    zi = grid.z * conv.i_s_max
    v_d = grid.v_g * np.cos(d) + zi * math.sin(gap)
    v_q = -grid.v_g * np.sin(d) + zi * math.cos(gap)
    return _scalar(v_d), _scalar(v_q)


def p_sat(delta, grid: GridParams, conv: ConverterParams):
    """Active power with the current pinned at ``i_s_max`` and angle ``beta``."""
    d = np.radians(delta)
    i = conv.i_s_max
    out = grid.r * i * i + grid.v_g * i * np.cos(d + conv.beta_rad)
    return _scalar(out)


def i_unsat(delta, grid: GridParams, conv: ConverterParams):
    """Current magnitude drawn in normal mode, |V_ref - V_g e^{-j delta}| / Z."""
    d = np.radians(delta)
    re = conv.v_d_ref - grid.v_g * np.cos(d)
    im = grid.v_g * np.sin(d)
    return _scalar(np.hypot(re, im) / grid.z)


def saturation_threshold(grid: GridParams, conv: ConverterParams) -> float:
    """Smallest |delta| (degrees) at which a normally operating converter saturates.

    Returns 0 when the limit binds at every angle (including ``v_g = 0``) and
    180 when it never binds.
    """
    if grid.v_g == 0.0:
        return 0.0
    c = _threshold_cosine(grid, conv)
    if c >= 1.0:
        return 0.0
    if c <= -1.0:
        return 180.0
    return math.degrees(math.acos(c))


def _threshold_cosine(grid: GridParams, conv: ConverterParams) -> float:
    vg, vr = grid.v_g, conv.v_d_ref
    zi = grid.z * conv.i_s_max
    return 0.5 * (vr / vg + vg / vr - zi * zi / (vg * vr))


def entering_set(grid: GridParams, conv: ConverterParams) -> AngleSet:
    d = saturation_threshold(grid, conv)
    return AngleSet([(-180.0, -d), (d, 180.0)])


def _check_beta(beta: float):
    if not -90.0 <= beta <= 0.0:
        raise ParameterError([("beta", f"must lie in [-90, 0] degrees, got {beta}")])


def _d_cosine(beta: float, grid: GridParams, conv: ConverterParams) -> float:
    # cos(delta) above this value means V_d^sat > V_d^ref
    num = conv.v_d_ref - grid.z * conv.i_s_max * math.sin(grid.alpha_rad - math.radians(beta))
    if grid.v_g == 0.0:
        return math.copysign(math.inf, num) if num != 0.0 else math.inf
    return num / grid.v_g


def _q_sine(beta: float, grid: GridParams, conv: ConverterParams) -> float:
    # sin(delta) above this value means V_q^sat < 0
    num = grid.z * conv.i_s_max * math.cos(grid.alpha_rad - math.radians(beta))
    if grid.v_g == 0.0:
        return math.copysign(math.inf, num) if num != 0.0 else math.inf
    return num / grid.v_g


def delta_d_p(beta: float, grid: GridParams, conv: ConverterParams) -> float:
    """Largest angle with V_d^sat >= V_d^ref (0 when no angle qualifies)."""
    c = _d_cosine(beta, grid, conv)
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def delta_q_p(beta: float, grid: GridParams, conv: ConverterParams) -> float:
    """Smallest angle with V_q^sat <= 0 (clamped to [-90, 90])."""
    s = _q_sine(beta, grid, conv)
    return math.degrees(math.asin(min(1.0, max(-1.0, s))))


def _d_negative_set(beta, grid, conv) -> AngleSet:
    """Angles where the d-axis voltage error is negative (u_d < 0)."""
    c = _d_cosine(beta, grid, conv)
    if c >= 1.0:
        return AngleSet.empty()
    if c <= -1.0:
        return AngleSet.full()
    x = math.degrees(math.acos(c))
    return AngleSet([(-x, x)])


def _q_positive_set(beta, grid, conv) -> AngleSet:
    """Angles where the q-axis voltage error is positive (u_q > 0)."""
    s = _q_sine(beta, grid, conv)
    if s >= 1.0:
        return AngleSet.empty()
    if s <= -1.0:
        return AngleSet.full()
    a = math.degrees(math.asin(s))
    return AngleSet.arc(a, 180.0 - a)


def returning_set(beta: float, grid: GridParams, conv: ConverterParams,
                  method: str = "closed_form") -> AngleSet:
    """Angles at which a saturated converter's voltage loop asks for less than the limit.

    ``closed_form`` is the two-branch expression (d-axis branch on
    [-45, 0], q-axis branch below). ``exact`` solves the sign-partitioned
    inequality with the true ``u_max / i_s_max`` margin, quadrant by quadrant.
    """
    _check_beta(beta)
    if method == "closed_form":
        if beta >= -45.0:
            return _d_negative_set(beta, grid, conv)
        return _q_positive_set(beta, grid, conv)
    if method != "exact":
        raise ValueError(f"unknown returning-set method {method!r}")

    d_neg = _d_negative_set(beta, grid, conv)
    q_pos = _q_positive_set(beta, grid, conv)
    regions = {-1: d_neg, 1: d_neg.complement()}
    q_regions = {1: q_pos, -1: q_pos.complement()}
    b = math.radians(beta)
    margin = -conv.u_max / conv.i_s_max
    out = AngleSet.empty()
    for sd in (-1, 1):
        for sq in (-1, 1):
            if sd * math.cos(b) + sq * math.sin(b) <= margin:
                out = out | (regions[sd] & q_regions[sq])
    return out


def returning_quadrants(beta: float, conv: ConverterParams) -> list[tuple[int, int]]:
    """Sign pairs ``(sign u_d, sign u_q)`` for which the current reference is feasible."""
    b = math.radians(beta)
    margin = -conv.u_max / conv.i_s_max
    return [(sd, sq) for sd in (1, -1) for sq in (1, -1)
            if sd * math.cos(b) + sq * math.sin(b) <= margin]


def returning_by_signs(delta, beta: float, grid: GridParams, conv: ConverterParams):
    """Pointwise returning test straight from the PI-limited current reference.

    Evaluates ``(u_d + I cos b)^2 + (u_q + I sin b)^2 <= I^2`` with
    ``u = +/-u_max`` taken from the signs of the voltage errors. Independent
    of the interval algebra in :func:`returning_set`.
    """
    v_d, v_q = v_sat(delta, grid, conv)
    u_d = conv.u_max * np.sign(conv.v_d_ref - np.asarray(v_d))
    u_q = conv.u_max * np.sign(-np.asarray(v_q))
    i = conv.i_s_max
    b = math.radians(beta)
    ok = (u_d + i * math.cos(b)) ** 2 + (u_q + i * math.sin(b)) ** 2 <= i * i
    return bool(ok) if np.ndim(ok) == 0 else ok


@dataclass(frozen=True)
class EquilibriumSummary:
    delta_se: float | None
    delta_ue1: float | None
    delta_ue2: float | None
    delta_se_sat: float | None
    flags: dict = field(default_factory=dict)
    memberships: dict = field(default_factory=dict)

    def as_dict(self, ndigits: int = 4) -> dict:
        def r(x):
            return None if x is None else round(x, ndigits)
        return {
            "delta_se": r(self.delta_se),
            "delta_ue1": r(self.delta_ue1),
            "delta_ue2": r(self.delta_ue2),
            "delta_se_sat": r(self.delta_se_sat),
            "flags": dict(self.flags),
            "memberships": dict(self.memberships),
        }


def sep_angle(grid: GridParams, conv: ConverterParams) -> float | None:
    if grid.v_g == 0.0:
        return None
    a = grid.alpha_rad
    s = grid.z / (grid.v_g * conv.v_d_ref) * (conv.p0 - conv.v_d_ref ** 2 / grid.z * math.sin(a))
    if not -1.0 <= s <= 1.0:
        return None
    return math.degrees(a + math.asin(s))


def unsaturated_ue(grid: GridParams, conv: ConverterParams) -> float | None:
    """Unstable crossing of the normal-mode power-angle curve."""
    se = sep_angle(grid, conv)
    if se is None:
        return None
    return 180.0 + 2.0 * grid.alpha - se


def _sat_arccos(grid, conv) -> float | None:
    i = conv.i_s_max
    if grid.v_g == 0.0:
        return None
    c = (conv.p0 - grid.r * i * i) / (grid.v_g * i)
    if not -1.0 <= c <= 1.0:
        return None
    return math.degrees(math.acos(c))


def equilibria(grid: GridParams, conv: ConverterParams,
               method: str = "exact") -> EquilibriumSummary:
    se = sep_angle(grid, conv)
    ac = _sat_arccos(grid, conv)
    ue1 = ue2 = sse = None
    if ac is not None:
        ue1 = -conv.beta + ac
        ue2 = ue1 - 360.0
        sse = -conv.beta - ac
    named = {"delta_se": se, "delta_ue1": ue1, "delta_ue2": ue2, "delta_se_sat": sse}
    flags = {f"has_{k[6:]}": v is not None for k, v in named.items()}
    memberships = {
        k: classify_region(v, conv.beta, grid, conv, method).value
        for k, v in named.items() if v is not None
    }
    return EquilibriumSummary(se, ue1, ue2, sse, flags, memberships)


def classify_region(delta, beta: float, grid: GridParams, conv: ConverterParams,
                    method: str = "exact") -> Region:
    s = entering_set(grid, conv)
    r = returning_set(beta, grid, conv, method)
    return region_of(delta, s, r)


def region_of(delta, s: AngleSet, r: AngleSet) -> Region:
    in_s = s.contains(delta)
    in_r = r.contains(delta)
    if in_s and in_r:
        return Region.S_AND_R
    if in_s:
        return Region.S_MINUS_R
    if in_r:
        return Region.R_MINUS_S
    return Region.NEITHER


def c1_holds(grid: GridParams, conv: ConverterParams) -> bool:
    """The saturated equilibrium lies inside the entering set."""
    sse = equilibria(grid, conv).delta_se_sat
    return sse is not None and entering_set(grid, conv).contains(sse)


def c2_static_holds(grid: GridParams, conv: ConverterParams, method: str = "exact") -> bool:
    """The saturated equilibrium lies outside both the entering and returning sets."""
    sse = equilibria(grid, conv).delta_se_sat
    if sse is None:
        return False
    s = entering_set(grid, conv)
    r = returning_set(conv.beta, grid, conv, method)
    return not (s | r).contains(sse)

