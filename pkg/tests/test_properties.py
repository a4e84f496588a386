import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nppsim.continuation import truncate_tk
from nppsim.mesh import build_cutoff, build_grid
from nppsim.model import Regularization, boundary_data, h_eval, h_prime, psi_eval, psi_second
from nppsim.outputs import fmt
from nppsim.poisson import assemble, solve_potential
from nppsim.transport import bernoulli, face_flux, species_step

etas = st.floats(0.0, 0.99)
exps = st.floats(2.0, 6.0)
log_r = st.floats(-8.0, 8.0)


@given(log_r, etas, exps)
def test_entropy_identity(lr, eta, p):
    r = 10.0 ** lr
    reg = Regularization(eta, p)
    hp = h_prime(r, reg)
    assert abs(r * psi_second(r, reg) - hp) <= 1e-12 * hp


@given(st.floats(0.0, 1e6), etas, exps)
def test_psi_nonnegative(r, eta, p):
    assert psi_eval(r, Regularization(eta, p)) >= 0.0


@given(st.floats(0.0, 1e4), st.floats(1e-6, 1e3), etas, exps)
def test_h_strictly_increasing(r, dr, eta, p):
    reg = Regularization(eta, p)
    assert h_eval(r + dr, reg) > h_eval(r, reg)


@given(st.floats(0.0, 100.0), st.floats(0.0, 100.0), st.integers(2, 64))
def test_tk_lipschitz_and_bounds(a, b, k):
    ta, tb = truncate_tk(a, k), truncate_tk(b, k)
    assert abs(ta - tb) <= abs(a - b) + 1e-12
    assert 0.0 <= ta <= min(a, k + 0.5)


@given(st.floats(-30.0, 30.0))
def test_bernoulli_reflection(x):
    assert np.isclose(bernoulli(-x), bernoulli(x) * np.exp(x), rtol=1e-12)
    assert bernoulli(x) > 0.0


@given(st.floats(-20.0, 20.0), st.floats(1e-3, 1e3), st.sampled_from([-2, -1, 1, 2, 3]))
def test_boltzmann_pairs_have_no_flux(dphi, c_left, z):
    J = face_flux(c_left, c_left * np.exp(-z * dphi), dphi, 1.0, z, Regularization(0.0, 2.0), 1.0)
    scale = c_left * (1.0 + np.exp(-z * dphi)) * (1.0 + abs(z * dphi))
    assert abs(J) <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.0, 0.05, 0.5]),
       st.floats(1e-4, 1e-1))
def test_species_step_nonnegative_and_conservative(seed, eta, dt):
    rng = np.random.default_rng(seed)
    grid = build_grid(1, [int(rng.integers(2, 24))], [1.0])
    n = grid.n_cells
    c0 = rng.uniform(0, 3, n) * (rng.uniform(size=n) > 0.3)
    phi = rng.normal(scale=5.0, size=n)
    c, _ = species_step(grid, c0, phi, rng.uniform(0.1, 2, grid.n_faces),
                        int(rng.integers(-2, 3)), 0.0, Regularization(eta, 2.0), dt)
    assert c.min() >= 0.0
    assert abs(c.sum() - c0.sum()) <= 1e-11 * max(1.0, c0.sum())


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9), st.integers(0, 2 ** 32 - 1))
def test_poisson_symmetric_and_monotone(nx, ny, seed):
    rng = np.random.default_rng(seed)
    grid = build_grid(2, [nx, ny], [1.0, rng.uniform(0.5, 2)])
    tau = rng.uniform(0, 2, grid.n_boundary_faces)
    tau[0] = 1.0
    bd = boundary_data(grid, tau=tau, xi=rng.uniform(0, 1, grid.n_boundary_faces))
    A, _ = assemble(grid, bd, 1.0)
    u, v = rng.normal(size=(2, grid.n_cells))
    assert abs(u @ (A @ v) - v @ (A @ u)) <= 1e-13 * (1 + np.abs(A.data).sum())
    sol = solve_potential(grid, rng.uniform(0, 2, grid.n_cells), bd, tol=1e-12)
    assert sol.phi.min() >= -1e-12


@given(st.integers(2, 12), st.integers(2, 12), st.floats(0.1, 5), st.floats(0.1, 5))
def test_divergence_theorem(nx, ny, lx, ly):
    grid = build_grid(2, [nx, ny], [lx, ly])
    rng = np.random.default_rng(nx * 100 + ny)
    J = rng.normal(size=grid.n_faces)
    Jb = rng.normal(size=grid.n_boundary_faces)
    total = grid.net_outflow(J, Jb).sum()
    assert abs(total - np.sum(grid.bnd_area * Jb)) <= 1e-12 * (1 + np.abs(Jb).sum() * (lx + ly))
    assert np.isclose(grid.bnd_area.sum(), 2 * (lx + ly))


@given(st.integers(4, 20), st.integers(4, 20), st.integers(1, 3),
       st.sampled_from(["plateau-cosine", "plateau-polynomial"]))
def test_cutoff_properties(nx, ny, margin, profile):
    grid = build_grid(2, [nx, ny], [1.0, 1.0])
    if min(nx, ny) <= 2 * margin:
        return
    z = build_cutoff(grid, margin, profile)
    assert np.all((z.values >= 0) & (z.values <= 1))
    assert np.all(z.values[grid.bnd_cell] == 0)
    assert np.count_nonzero(z.values == 1.0) == (nx - 2 * margin) * (ny - 2 * margin)


@given(arrays(np.float64, 5, elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_text_format_round_trip(x):
    assert all(float(fmt(v)) == v for v in x)
