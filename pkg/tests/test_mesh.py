import numpy as np
import pytest

from nppsim.mesh import build_cutoff, build_grid


def test_counts_1d():
    g = build_grid(1, [4], [1.0])
    assert g.n_cells == 4
    assert g.cell_volume == pytest.approx(0.25)
    assert len(g.interior_faces) == 3
    assert len(g.boundary_faces) == 2


def test_counts_2d():
    g = build_grid(2, [3, 3], [1.0, 1.0])
    assert (g.n_cells, g.n_faces, g.n_boundary_faces) == (9, 12, 12)


def test_rectangular_face_areas():
    g = build_grid(2, [2, 4], [2.0, 1.0])
    assert g.cell_volume == pytest.approx(0.25)
    x_normal = g.bnd_area[g.bnd_axis == 0]
    y_normal = g.bnd_area[g.bnd_axis == 1]
    assert len(x_normal) == 8 and np.allclose(x_normal, 0.25)
    assert len(y_normal) == 4 and np.allclose(y_normal, 1.0)
    assert g.bnd_area.sum() == pytest.approx(2 * (2.0 + 1.0))


@pytest.mark.parametrize("args", [(3, [4], [1.0]), (1, [4], [0.0]), (1, [4], [-1.0]),
                                  (1, [1], [1.0]), (2, [4], [1.0, 1.0])])
def test_build_grid_rejects(args):
    with pytest.raises(ValueError):
        build_grid(*args)


@pytest.mark.parametrize("cells,extent", [([7], [1.3]), ([5, 3], [2.0, 0.5])])
def test_grid_invariants(cells, extent):
    g = build_grid(len(cells), cells, extent)
    assert g.n_cells * g.cell_volume == pytest.approx(np.prod(extent))
    assert np.all(g.face_a != g.face_b)
    # each cell touches 2N faces, interior or boundary
    touches = np.bincount(np.concatenate([g.face_a, g.face_b, g.bnd_cell]), minlength=g.n_cells)
    assert np.all(touches == 2 * g.dimension)


def test_discrete_divergence_theorem():
    g = build_grid(2, [5, 4], [1.0, 2.0])
    rng = np.random.default_rng(0)
    J = rng.normal(size=g.n_faces)
    Jb = rng.normal(size=g.n_boundary_faces)
    net = g.net_outflow(J, Jb)
    assert net.sum() == pytest.approx(np.sum(g.bnd_area * Jb), abs=1e-12)
    assert abs(g.net_outflow(J).sum()) < 1e-12


def test_cutoff_1d_example():
    z = build_cutoff(build_grid(1, [8], [1.0]), 2)
    assert z.values[0] == 0.0 and z.values[7] == 0.0
    assert np.all(z.values[2:6] == 1.0)
    assert z.values[3] == 1.0
    assert 0.0 < z.values[1] < 1.0


def test_cutoff_2d_plateau_count():
    z = build_cutoff(build_grid(2, [8, 8], [1.0, 1.0]), 2, "plateau-polynomial")
    assert np.count_nonzero(z.values == 1.0) == 16


@pytest.mark.parametrize("margin", [4, 5])
def test_cutoff_empty_plateau_rejected(margin):
    with pytest.raises(ValueError):
        build_cutoff(build_grid(1, [8], [1.0]), margin)


def test_cutoff_rejects_bad_arguments():
    g = build_grid(1, [8], [1.0])
    with pytest.raises(ValueError):
        build_cutoff(g, 0)
    with pytest.raises(ValueError):
        build_cutoff(g, 2, "gaussian")


@pytest.mark.parametrize("profile", ["plateau-cosine", "plateau-polynomial"])
def test_cutoff_range_and_boundary_zero(profile):
    g = build_grid(2, [12, 10], [1.0, 1.0])
    z = build_cutoff(g, 3, profile)
    assert np.all((z.values >= 0) & (z.values <= 1))
    assert np.all(z.values[g.bnd_cell] == 0.0)
    with pytest.raises(ValueError):
        z.values[0] = 1.0
