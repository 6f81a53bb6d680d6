import numpy as np
import pytest

from gfmstab import kernels as K
from gfmstab.analytics import entering_set, equilibria, sep_angle
from gfmstab.doa import (
    CAUSE_C1, DoaGrid, DoaSpec, boundary, initial_modes, point_label, sweep, vector_field,
    worker_count,
)
from gfmstab.hybrid_sim import SimConfig
from gfmstab.params import reference_converter, reference_grid

SMALL = DoaSpec((-180.0, 360.0, 37), (-0.0066, 0.0066, 5))


@pytest.fixture(scope="module")
def small_grid():
    return sweep(reference_grid(), reference_converter(), SMALL)


def test_shape_and_axes(small_grid):
    assert small_grid.labels.shape == (5, 37)
    assert small_grid.deltas[0] == -180.0 and small_grid.deltas[-1] == 360.0
    assert small_grid.omegas[2] == pytest.approx(0.0)
    assert small_grid.labels.dtype == np.int8
    assert not small_grid.diverged.any()


def test_cells_at_equilibria():
    grid, conv = reference_grid(), reference_converter(beta=-90.0)
    se = sep_angle(grid, conv)
    sse = equilibria(grid, conv).delta_se_sat
    spec = DoaSpec((se, se + 360.0, 2), (0.0, 1e-3, 2))
    g = sweep(grid, conv, spec)
    assert g.labels[0, 0] == K.CONVERGED_SEP
    # same angle one turn on settles on the shifted copy
    assert g.labels[0, 1] == K.POLE_SLIP
    spec = DoaSpec((sse, sse + 1.0, 2), (0.0, 1e-3, 2), init_mode_rule="force_saturated")
    g = sweep(grid, conv, spec)
    assert g.labels[0, 0] == K.CONVERGED_SAT_SEP
    assert g.causes[0, 0] == CAUSE_C1


def test_deterministic_across_worker_counts():
    grid, conv = reference_grid(), reference_converter()
    spec = DoaSpec((-180.0, 360.0, 25), (-0.0066, 0.0066, 5))
    a = sweep(grid, conv, spec, workers=1)
    b = sweep(grid, conv, spec, workers=3)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.summaries, b.summaries)


def test_numpy_backend_agrees_with_compiled(small_grid):
    alt = sweep(reference_grid(), reference_converter(), SMALL, backend="numpy")
    agree = np.mean(alt.labels == small_grid.labels)
    assert agree >= 0.9


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        sweep(reference_grid(), reference_converter(), SMALL, backend="gpu")


def test_unsaturated_model_has_no_saturated_labels():
    spec = DoaSpec((-180.0, 360.0, 19), (-0.0066, 0.0066, 3), current_limit=False)
    g = sweep(reference_grid(), reference_converter(), spec)
    assert g.count(K.CONVERGED_SAT_SEP) == 0
    assert g.init_mode_rule == "force_normal"


def test_initial_mode_rules(grid, conv):
    d = np.array([0.0, 40.0, -170.0])
    assert initial_modes(d, grid, conv, "by_region").tolist() == [0, 1, 1]
    assert initial_modes(d, grid, conv, "force_normal").tolist() == [0, 0, 0]
    assert initial_modes(d, grid, conv, "force_saturated").tolist() == [1, 1, 1]
    s = entering_set(grid, conv)
    assert np.array_equal(initial_modes(d, grid, conv, "by_region"), s.contains(d))


def test_spec_validation():
    with pytest.raises(ValueError):
        DoaSpec((0.0, 0.0, 10))
    with pytest.raises(ValueError):
        DoaSpec((0.0, 10.0, 1))
    with pytest.raises(ValueError):
        DoaSpec(init_mode_rule="random")
    conv = reference_converter()
    assert DoaSpec().resolved_omega(conv) == (-0.0066, 0.0066, 100)
    assert DoaSpec().resolved_omega(conv, freq_limit=False) == (-0.02, 0.02, 100)


def test_worker_count_respects_cap(monkeypatch):
    monkeypatch.setenv("GFM_STAB_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.delenv("GFM_STAB_THREADS")
    assert worker_count(3) == 3
    assert worker_count(0) == 1


def _synthetic(labels, d_axis=(0.0, 10.0, 11), w_axis=(0.0, 4.0, 5)):
    labels = np.asarray(labels, dtype=np.int8)
    return DoaGrid(d_axis, w_axis, labels, np.zeros_like(labels), np.zeros(labels.shape, bool))


def test_boundary_of_uniform_grid_is_empty():
    assert boundary(_synthetic(np.zeros((5, 11)))) == []
    assert boundary(_synthetic(np.full((5, 11), 3))) == []


def test_boundary_lies_halfway_between_cells():
    labels = np.full((5, 11), K.UNDETERMINED)
    labels[:, :4] = K.CONVERGED_SEP   # basin covers delta 0..3
    lines = boundary(_synthetic(labels))
    assert len(lines) == 1
    line = lines[0]
    assert np.allclose(line[:, 0], 3.5)
    assert line[:, 1].min() == 0.0 and line[:, 1].max() == 4.0


def test_boundary_encloses_island():
    labels = np.full((5, 11), K.LOSS_OF_SYNC)
    labels[2, 5] = K.CONVERGED_SEP
    [line] = boundary(_synthetic(labels))
    assert np.allclose(line[0], line[-1])  # closed
    assert line[:, 0].min() == 4.5 and line[:, 0].max() == 5.5
    assert line[:, 1].min() == 1.5 and line[:, 1].max() == 2.5


def test_point_label_nearest_cell():
    labels = np.zeros((5, 11), dtype=np.int8)
    labels[3, 7] = K.POLE_SLIP
    g = _synthetic(labels)
    assert point_label(g, 7.2, 2.9) == K.POLE_SLIP
    assert point_label(g, 6.0, 2.9) == K.CONVERGED_SEP


def test_vector_field_matches_swing_equation(grid, conv):
    spec = DoaSpec((-90.0, 90.0, 5), (-0.005, 0.005, 3))
    vf = vector_field(grid, conv, spec)
    assert vf["delta_deg"].size == 15
    se = sep_angle(grid, conv)
    field = vector_field(grid, conv, DoaSpec((se, se + 1, 2), (0.0, 0.001, 2)))
    assert field["ddelta_dt"][0] == 0.0
    assert field["domega_dt"][0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.sign(vf["ddelta_dt"]) == np.sign(vf["omega_dev_pu"]))


@pytest.mark.slow
def test_refinement_changes_basin_fraction_little():
    grid, conv = reference_grid(x_over_r=10.0), reference_converter(beta=-45.0)
    coarse = sweep(grid, conv, DoaSpec((-180.0, 360.0, 55), (-0.0066, 0.0066, 7)))
    fine = sweep(grid, conv, DoaSpec((-180.0, 360.0, 109), (-0.0066, 0.0066, 13)))
    assert abs(coarse.sep_fraction() - fine.sep_fraction()) < 0.02


@pytest.mark.parametrize("point, expected", [
    ((62.01, 0.0066), K.CONVERGED_SEP), ((67.71, 0.0066), K.POLE_SLIP),
])
def test_post_fault_points_land_in_expected_basin(point, expected):
    # a single-cell sweep starting at the post-clearance state
    spec = DoaSpec((point[0], point[0] + 1e-6, 2), (point[1] - 1e-6, point[1], 2))
    g = sweep(reference_grid(), reference_converter(), spec)
    assert g.labels[1, 0] == expected
