"""Per-unit grid and converter parameters.

Every electrical quantity is per-unit on the converter base and every angle is
in degrees. Radians appear only inside the integration kernels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping


class ParameterError(ValueError):
    """Raised when one or more parameter invariants are violated.

    ``violations`` holds ``(field, message)`` pairs, one per broken bound.
    """

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = list(violations)
        text = "; ".join(f"{name}: {msg}" for name, msg in self.violations)
        super().__init__(text or "invalid parameters")


def derive_electrical(z: float, x_over_r: float) -> tuple[float, float, float]:
    """Split an impedance magnitude into ``(r, x, alpha_deg)``.

    ``x_over_r = math.inf`` is the purely inductive limit (alpha = 0).
    """
    bad = []
    if not (z > 0.0) or math.isinf(z):
        bad.append(("z", f"must be finite and > 0, got {z!r}"))
    if not (x_over_r > 0.0):
        bad.append(("x_over_r", f"must be > 0 or inf, got {x_over_r!r}"))
    if bad:
        raise ParameterError(bad)
    if math.isinf(x_over_r):
        return 0.0, z, 0.0
    alpha = math.atan2(1.0, x_over_r)
    return z * math.sin(alpha), z * math.cos(alpha), math.degrees(alpha)


@dataclass(frozen=True)
class GridParams:
    """Thevenin grid seen from the converter terminal."""

    v_g: float
    z: float
    x_over_r: float
    r: float = field(init=False)
    x: float = field(init=False)
    alpha: float = field(init=False)
    phi: float = field(init=False)

    def __post_init__(self):
        bad = grid_violations(self.v_g, self.z, self.x_over_r)
        if bad:
            raise ParameterError(bad)
        r, x, alpha = derive_electrical(self.z, self.x_over_r)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "phi", 90.0 - alpha)

    @property
    def alpha_rad(self) -> float:
        return math.radians(self.alpha)

    def with_voltage(self, v_g: float) -> "GridParams":
        return replace(self, v_g=v_g)


def grid_violations(v_g, z, x_over_r) -> list[tuple[str, str]]:
    bad = []
    if not _is_real(v_g) or not (v_g >= 0.0) or math.isinf(v_g):
        bad.append(("v_g", f"must be finite and >= 0, got {v_g!r}"))
    if not _is_real(z) or not (z > 0.0) or math.isinf(z):
        bad.append(("z", f"must be finite and > 0, got {z!r}"))
    if not _is_real(x_over_r) or not (x_over_r > 0.0):
        bad.append(("x_over_r", f"must be > 0 or inf, got {x_over_r!r}"))
    return bad


@dataclass(frozen=True)
class ConverterParams:
    """Active power controller and current limiter constants.

    ``beta`` is the saturated current angle in degrees, ``omega0`` and
    ``d_omega_max`` are per-unit frequencies and ``omega_n`` is in rad/s.
    The nameplate fields at the end are carried for documentation only.
    """

    v_d_ref: float
    i_s_max: float
    u_max: float
    beta: float
    h: float
    d_p: float
    p0: float
    omega0: float
    omega_n: float
    d_omega_max: float
    s_b: float | None = None
    v_b: float | None = None
    v_dc: float | None = None
    n: int | None = None
    f_n: float | None = None
    x_tr: float | None = None

    def __post_init__(self):
        bad = converter_violations(self)
        if bad:
            raise ParameterError(bad)

    @property
    def beta_rad(self) -> float:
        return math.radians(self.beta)

    def with_beta(self, beta: float) -> "ConverterParams":
        return replace(self, beta=beta)


REQUIRED_CONVERTER_FIELDS = (
    "v_d_ref", "i_s_max", "u_max", "beta", "h", "d_p", "p0",
    "omega0", "omega_n", "d_omega_max",
)
GRID_FIELDS = ("v_g", "z", "x_over_r")


def converter_violations(c: ConverterParams) -> list[tuple[str, str]]:
    bad = []
    for name in REQUIRED_CONVERTER_FIELDS:
        value = getattr(c, name)
        if not _is_real(value) or not math.isfinite(value):
            bad.append((name, f"must be a finite number, got {value!r}"))
    if bad:
        return bad
    if not c.v_d_ref > 0.0:
        bad.append(("v_d_ref", f"must be > 0, got {c.v_d_ref}"))
    if not c.i_s_max > 0.0:
        bad.append(("i_s_max", f"must be > 0, got {c.i_s_max}"))
    if not 0.0 < c.u_max < c.i_s_max:
        bad.append(("u_max", f"must satisfy 0 < u_max < i_s_max={c.i_s_max}, got {c.u_max}"))
    if not -90.0 <= c.beta <= 0.0:
        bad.append(("beta", f"must lie in [-90, 0] degrees, got {c.beta}"))
    for name in ("h", "d_p", "d_omega_max", "omega_n"):
        if not getattr(c, name) > 0.0:
            bad.append((name, f"must be > 0, got {getattr(c, name)}"))
    return bad


def validate(record: Mapping[str, Any]) -> tuple[GridParams, ConverterParams]:
    """Build both parameter objects from a raw ``{"grid":…, "converter":…}`` mapping.

    All violated invariants are collected before raising, with field names
    prefixed by their section (``converter.beta``).
    """
    bad: list[tuple[str, str]] = []
    g = dict(record.get("grid", {}))
    c = dict(record.get("converter", {}))
    for name in GRID_FIELDS:
        if name not in g:
            bad.append((f"grid.{name}", "missing"))
    for name in REQUIRED_CONVERTER_FIELDS:
        if name not in c:
            bad.append((f"converter.{name}", "missing"))
    known = {f.name for f in fields(ConverterParams)}
    for name in c:
        if name not in known:
            bad.append((f"converter.{name}", "unknown field"))
    for name in g:
        if name not in GRID_FIELDS:
            bad.append((f"grid.{name}", "unknown field"))
    if bad:
        raise ParameterError(bad)

    bad += [(f"grid.{k}", m) for k, m in grid_violations(g["v_g"], g["z"], g["x_over_r"])]
    try:
        conv = ConverterParams(**c)
    except ParameterError as err:
        bad += [(f"converter.{k}", m) for k, m in err.violations]
        conv = None
    if bad:
        raise ParameterError(bad)
    return GridParams(g["v_g"], g["z"], g["x_over_r"]), conv


def reference_converter(beta: float = -30.0, p0: float = 0.87) -> ConverterParams:
    """The simulated GFM farm: 816 identical 310 MVA-aggregated units at 60 Hz."""
    return ConverterParams(
        v_d_ref=1.0,
        i_s_max=1.2,
        u_max=0.063,
        beta=beta,
        h=2.0,
        d_p=0.03,
        p0=p0,
        omega0=1.0,
        omega_n=2.0 * math.pi * 60.0,
        d_omega_max=0.0066,
        s_b=310.0,
        v_b=400.0,
        v_dc=1200.0,
        n=816,
        f_n=60.0,
        x_tr=0.16,
    )


def reference_grid(v_g: float = 1.0, z: float = 0.46, x_over_r: float = 20.0) -> GridParams:
    # z already includes the 0.16 p.u. transformer reactance
    return GridParams(v_g=v_g, z=z, x_over_r=x_over_r)


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
