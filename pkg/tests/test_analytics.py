import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from gfmstab.analytics import (
    Region, c1_holds, c2_static_holds, classify_region, delta_d_p, delta_q_p, entering_set,
    equilibria, i_unsat, p_sat, p_unsat, returning_by_signs, returning_quadrants,
    returning_set, saturation_threshold, sep_angle, unsaturated_ue, v_sat,
)
from gfmstab.params import reference_converter, reference_grid

PROBE = np.linspace(-179.95, 179.95, 3600)
betas = st.floats(-90.0, 0.0)


def _complex_power(delta, grid, conv):
    # oracle: S = V I*, with the converter voltage on the local d axis and the
    # grid phasor at -delta; Z = R + jX
    v = conv.v_d_ref
    e = grid.v_g * np.exp(-1j * np.radians(delta))
    i = (v - e) / (grid.r + 1j * grid.x)
    return v * np.conj(i), abs(i)


def test_threshold_matches_reference_value(grid, conv):
    assert saturation_threshold(grid, conv) == pytest.approx(32.0455, abs=0.05)
    s = entering_set(grid, conv)
    assert s.spans()[0][0] == pytest.approx(32.043, abs=1e-3)


def test_threshold_is_where_current_hits_limit(grid, conv):
    d = saturation_threshold(grid, conv)
    assert i_unsat(d, grid, conv) == pytest.approx(conv.i_s_max, rel=1e-12)
    assert i_unsat(d - 1.0, grid, conv) < conv.i_s_max < i_unsat(d + 1.0, grid, conv)


def test_threshold_edge_cases(conv):
    assert saturation_threshold(reference_grid(v_g=0.0), conv) == 0.0
    # |V_ref + V_g| / Z below the limit: no angle saturates
    assert saturation_threshold(reference_grid(z=2.0), conv) == 180.0
    assert entering_set(reference_grid(z=2.0), conv).measure() == 0.0


@given(st.floats(-180, 180), st.floats(0.05, 1.2), st.sampled_from([1.0, 5.0, 20.0, 1e3]))
def test_unsaturated_power_matches_phasor_oracle(delta, vg, xr):
    grid = reference_grid(v_g=vg, x_over_r=xr)
    conv = reference_converter()
    s, i = _complex_power(delta, grid, conv)
    assert p_unsat(delta, grid, conv) == pytest.approx(s.real, abs=1e-12)
    assert i_unsat(delta, grid, conv) == pytest.approx(i, abs=1e-12)


@given(st.floats(-180, 180), betas, st.sampled_from([1.0, 20.0]))
def test_saturated_power_identity(delta, beta, xr):
    # P = Re(V I*) with V from the network equation and I = I_max at angle beta
    grid = reference_grid(x_over_r=xr)
    conv = reference_converter(beta=beta)
    vd, vq = v_sat(delta, grid, conv)
    cur = conv.i_s_max * np.exp(1j * np.radians(beta))
    e = grid.v_g * np.exp(-1j * np.radians(delta))
    v = e + (grid.r + 1j * grid.x) * cur
    assert vd == pytest.approx(v.real, abs=1e-12)
    assert vq == pytest.approx(v.imag, abs=1e-12)
    assert p_sat(delta, grid, conv) == pytest.approx((v * np.conj(cur)).real, abs=1e-12)


EXPECTED_EQUILIBRIA = [
    # beta, p0, ue1, satsep
    (-6.0, 0.87, 51.78, -39.78),
    (-30.0, 0.87, 75.78, -15.77),
    (-90.0, 0.87, 135.78, 44.22),
    (-60.0, 0.2, 142.00, -22.00),
]


@pytest.mark.parametrize("beta, p0, ue1, sse", EXPECTED_EQUILIBRIA)
def test_equilibria_reference(grid, beta, p0, ue1, sse):
    conv = reference_converter(beta=beta, p0=p0)
    eq = equilibria(grid, conv)
    assert eq.delta_ue1 == pytest.approx(ue1, abs=0.1)
    assert eq.delta_se_sat == pytest.approx(sse, abs=0.1)
    assert eq.delta_ue2 == pytest.approx(eq.delta_ue1 - 360.0)


@pytest.mark.parametrize("p0, se", [(0.87, 23.38), (0.2, 5.23)])
def test_pre_fault_angle(grid, p0, se):
    assert sep_angle(grid, reference_converter(p0=p0)) == pytest.approx(se, abs=0.1)


@settings(max_examples=100)
@given(betas, st.floats(0.05, 1.0), st.sampled_from([1.0, 10.0, 20.0]))
def test_equilibria_are_roots(beta, p0, xr):
    grid = reference_grid(x_over_r=xr)
    conv = reference_converter(beta=beta, p0=p0)
    eq = equilibria(grid, conv)
    if eq.delta_se is not None:
        assert p_unsat(eq.delta_se, grid, conv) == pytest.approx(p0, abs=1e-10)
        ue = unsaturated_ue(grid, conv)
        assert p_unsat(ue, grid, conv) == pytest.approx(p0, abs=1e-10)
    for d in (eq.delta_ue1, eq.delta_ue2, eq.delta_se_sat):
        if d is not None:
            assert p_sat(d, grid, conv) == pytest.approx(p0, abs=1e-10)


@settings(max_examples=100)
@given(betas, st.floats(0.05, 1.0))
def test_equilibrium_stability_by_slope(beta, p0):
    # dP/ddelta > 0 is restoring for the swing equation used here
    grid, conv = reference_grid(), reference_converter(beta=beta, p0=p0)
    eq = equilibria(grid, conv)
    h = 1e-5
    if eq.delta_se_sat is None:
        return
    slope = lambda d: (p_sat(d + h, grid, conv) - p_sat(d - h, grid, conv)) / (2 * h)
    assume(abs(eq.delta_ue1 - eq.delta_se_sat) > 1e-3)
    assert slope(eq.delta_se_sat) > 0.0
    assert slope(eq.delta_ue1) < 0.0


def test_no_saturated_equilibrium_for_unreachable_power(grid):
    eq = equilibria(grid, reference_converter(p0=1.0))
    assert eq.delta_ue1 is not None
    eq = equilibria(reference_grid(v_g=0.05), reference_converter(p0=0.87))
    assert eq.delta_se_sat is None and not eq.flags["has_se_sat"]
    assert not c1_holds(reference_grid(v_g=0.05), reference_converter(p0=0.87))


@settings(max_examples=60)
@given(st.floats(-89.0, -0.5), st.floats(0.1, 0.5))
def test_ue1_strictly_decreasing_in_beta(beta, gap):
    b2 = min(beta + gap, 0.0)
    assume(b2 > beta)
    grid = reference_grid()
    lo = equilibria(grid, reference_converter(beta=beta)).delta_ue1
    hi = equilibria(grid, reference_converter(beta=b2)).delta_ue1
    assert hi < lo


EXPECTED_RETURNING = [
    (-6.0, 0.87, -23.14, 23.14),
    (-30.0, 0.87, -45.2, 45.2),
    (-90.0, 0.87, -1.3, 181.3),
    (-60.0, 0.2, 14.84, 165.16),
]


@pytest.mark.parametrize("method", ["closed_form", "exact"])
@pytest.mark.parametrize("beta, p0, lo, hi", EXPECTED_RETURNING)
def test_returning_set_reference(grid, method, beta, p0, lo, hi):
    r = returning_set(beta, grid, reference_converter(beta=beta, p0=p0), method)
    [(got_lo, got_hi)] = r.spans()
    assert got_lo == pytest.approx(lo, abs=1.0)
    assert got_hi == pytest.approx(hi, abs=1.0)


def test_returning_bounds_follow_voltage_errors(grid, conv):
    for beta in (-6.0, -30.0):
        c = reference_converter(beta=beta)
        d = delta_d_p(beta, grid, c)
        vd, _ = v_sat(d, grid, c)
        assert vd == pytest.approx(conv.v_d_ref, abs=1e-12)
    d = delta_q_p(-60.0, grid, conv)
    _, vq = v_sat(d, grid, reference_converter(beta=-60.0))
    assert vq == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("beta", [-10.0, -30.0, -60.0, -80.0])
def test_closed_form_agrees_with_exact(grid, beta):
    conv = reference_converter(beta=beta)
    a = returning_set(beta, grid, conv, "closed_form")
    b = returning_set(beta, grid, conv, "exact")
    assert a.isclose(b, 1e-9)


def test_closed_form_and_exact_differ_near_minus_45(grid):
    conv = reference_converter(beta=-45.0)
    a = returning_set(-45.0, grid, conv, "closed_form")
    b = returning_set(-45.0, grid, conv, "exact")
    assert not a.isclose(b, 1e-6)
    assert returning_quadrants(-45.0, conv) == [(-1, 1)]
    assert len(returning_quadrants(-6.0, conv)) == 2


@settings(max_examples=80, deadline=None)
@given(betas, st.sampled_from([0.05, 0.5, 1.0]), st.sampled_from([1.0, 10.0, 20.0]))
def test_exact_set_matches_sign_oracle(beta, vg, xr):
    grid = reference_grid(v_g=vg, x_over_r=xr)
    conv = reference_converter(beta=beta)
    r = returning_set(beta, grid, conv, "exact")
    edges = np.array(r.boundaries() + [180.0, -180.0])
    oracle = returning_by_signs(PROBE, beta, grid, conv)
    # exclude probes sitting on a sign change of either voltage error
    vd, vq = v_sat(PROBE, grid, conv)
    far = (np.min(np.abs(PROBE[:, None] - edges[None, :]), axis=1) > 1e-6)
    far &= (np.abs(vd - conv.v_d_ref) > 1e-9) & (np.abs(vq) > 1e-9)
    assert np.array_equal(r.contains(PROBE)[far], oracle[far])


@settings(max_examples=50)
@given(betas, betas)
def test_entering_set_independent_of_beta(b1, b2):
    grid = reference_grid()
    assert entering_set(grid, reference_converter(beta=b1)) == entering_set(
        grid, reference_converter(beta=b2))


@settings(max_examples=100)
@given(st.floats(-180, 180), betas)
def test_regions_partition_circle(delta, beta):
    grid, conv = reference_grid(), reference_converter(beta=beta)
    s = entering_set(grid, conv)
    r = returning_set(beta, grid, conv, "exact")
    reg = classify_region(delta, beta, grid, conv)
    assert (reg in (Region.S_MINUS_R, Region.S_AND_R)) == s.contains(delta)
    assert (reg in (Region.R_MINUS_S, Region.S_AND_R)) == r.contains(delta)
    assert Region.from_code(reg.code) is reg


def test_clamped_branches(conv):
    # v_g = 0: the voltage errors are constant in delta, so R is empty or full
    g0 = reference_grid(v_g=0.0)
    for beta in (-6.0, -30.0, -60.0):
        assert returning_set(beta, g0, conv).is_empty
    # beta = -90 puts V_q^sat = -Z I sin(alpha) below zero
    assert returning_set(-90.0, g0, conv).is_full
    # weak grid voltage pushes the d-branch cosine below -1
    weak = reference_grid(v_g=0.05, z=0.1)
    assert delta_d_p(-10.0, weak, conv) in (0.0, 180.0)
    assert -90.0 <= delta_q_p(-90.0, weak, conv) <= 90.0


def test_returning_set_rejects_bad_input(grid, conv):
    with pytest.raises(Exception):
        returning_set(5.0, grid, conv)
    with pytest.raises(ValueError):
        returning_set(-30.0, grid, conv, method="magic")


@pytest.mark.parametrize("beta, p0, c1, c2", [
    (-6.0, 0.87, True, False), (-30.0, 0.87, False, False),
    (-90.0, 0.87, True, False), (-60.0, 0.2, False, True),
])
def test_static_conditions(grid, beta, p0, c1, c2):
    conv = reference_converter(beta=beta, p0=p0)
    assert c1_holds(grid, conv) is c1
    assert c2_static_holds(grid, conv) is c2


def test_resistive_grid_delivers_more_saturated_power():
    for beta in (-30.0, -60.0):
        conv = reference_converter(beta=beta)
        ue = equilibria(reference_grid(), conv).delta_ue1
        around = np.linspace(ue - 20.0, ue + 20.0, 41)
        resistive = p_sat(around, reference_grid(x_over_r=1.0), conv)
        inductive = p_sat(around, reference_grid(x_over_r=20.0), conv)
        assert np.all(resistive > inductive)


def test_as_dict_rounding(grid, conv):
    d = equilibria(grid, conv).as_dict(2)
    assert d["delta_ue1"] == 75.78
    assert d["memberships"]["delta_se"] == Region.R_MINUS_S.value
    assert math.isclose(d["delta_ue2"], -284.22)
