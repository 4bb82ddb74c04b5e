import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetnetlab.cellmodel import assign_cells, traffic_demand, write_cell_csv, write_pixel_csv
from hetnetlab.geometry import GeometryConfig, TierConfig, sample_network, snapshot_from_arrays
from hetnetlab.propagation import loss_matrix


def flat_config(**kw):
    kw.setdefault("shadow_sigma_db", 0.0)
    return GeometryConfig(tiers=(TierConfig(4.0, 100.0), TierConfig(1.0, 1.0)),
                          sim_radius=1.0, obs_radius=0.5, grid_step=0.1, **kw)


def test_surfaces_partition_the_window(small_geometry):
    snap = sample_network(small_geometry, 2)
    cells = assign_cells(snap)
    assert cells.surfaces.sum() == pytest.approx(snap.grid.area)
    assert cells.total_area == pytest.approx(snap.grid.area)
    np.testing.assert_array_equal(cells.pixel_counts * snap.grid.pixel_area, cells.surfaces)


def test_single_tier_no_shadowing_is_voronoi():
    g = GeometryConfig(tiers=(TierConfig(4.0, 100.0),), sim_radius=1.0, obs_radius=0.5,
                       grid_step=0.1, shadow_sigma_db=0.0)
    snap = sample_network(g, 9)
    cells = assign_cells(snap)
    for pix, (x, y) in enumerate(snap.grid.centers):
        d = np.hypot(snap.positions[:, 0] - x, snap.positions[:, 1] - y)
        assert d[cells.serving[pix]] == pytest.approx(d.min())


def test_strongest_signal_not_nearest():
    # a weak station next to the pixel loses to a strong one further away
    snap = snapshot_from_arrays(flat_config(), [[0.3, 0.0], [0.0, 0.15]], [1, 2])
    cells = assign_cells(snap)
    origin = snap.grid.nearest_pixel((0.0, 0.0))
    assert cells.serving[origin] == 0


def test_ties_go_to_lowest_id():
    # two identical stations symmetric about the y axis: pixels on x = 0 tie
    snap = snapshot_from_arrays(flat_config(), [[0.25, 0.0], [-0.25, 0.0]], [1, 1])
    cells = assign_cells(snap)
    on_axis = np.flatnonzero(np.isclose(snap.grid.centers[:, 0], 0.0))
    L = loss_matrix(snap)
    assert np.all(L[0, on_axis] == L[1, on_axis])
    assert np.all(cells.serving[on_axis] == 0)


def test_zero_surface_cell_has_zero_traffic():
    # a weak station right under a strong one owns no pixel
    snap = snapshot_from_arrays(flat_config(), [[0.0, 0.0], [0.01, 0.0]], [1, 2])
    cells = assign_cells(snap)
    assert cells.surfaces[1] == 0.0
    assert traffic_demand(cells, 1, 1e6) == 0.0
    assert traffic_demand(cells, 0, 2e6) == pytest.approx(2e6 * cells.surfaces[0])
    assert len(cells.pixels_of(1)) == 0


def test_no_stations_rejected():
    snap = snapshot_from_arrays(flat_config(), np.empty((0, 2)), np.empty(0, dtype=int))
    with pytest.raises(ValueError):
        assign_cells(snap)


def test_cellmap_is_readonly(small_geometry):
    cells = assign_cells(sample_network(small_geometry, 0))
    with pytest.raises(ValueError):
        cells.serving[0] = 1


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_assignment_minimizes_loss(seed):
    g = flat_config(shadow_sigma_db=10.0)
    snap = sample_network(g, seed)
    cells = assign_cells(snap)
    L = loss_matrix(snap)
    cols = np.arange(L.shape[1])
    assert np.all(L[cells.serving, cols] == L.min(axis=0))


def test_csv_outputs(tmp_path):
    snap = snapshot_from_arrays(flat_config(), [[0.25, 0.0], [-0.25, 0.0]], [1, 2])
    cells = assign_cells(snap)
    write_pixel_csv(snap, cells, tmp_path / "pixels.csv")
    write_cell_csv(snap, cells, 5e5, tmp_path / "cells.csv")
    pix = (tmp_path / "pixels.csv").read_text().splitlines()
    assert pix[0] == "pixel_x_km,pixel_y_km,serving_id"
    assert len(pix) == snap.grid.n_pixels + 1
    rows = (tmp_path / "cells.csv").read_text().splitlines()
    assert rows[0] == "id,tier,surface_km2,traffic_demand_bps"
    i, tier, surface, traffic = rows[2].split(",")
    assert (i, tier) == ("1", "2")
    assert float(traffic) == pytest.approx(5e5 * float(surface))
