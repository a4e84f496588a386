import math

import numpy as np
import pytest

from conftest import pair_spec
from nppsim.mesh import build_grid
from nppsim.model import (ConstantDiffusivity, ConstantSource, NoReaction, PeriodicDiffusivity,
                          ProblemSpec, Regularization, ReversiblePair, SpeciesSpec,
                          TimeRampDiffusivity, boundary_data, h_eval, h_prime, psi_eval,
                          psi_second, validate)


def test_h_examples():
    reg = Regularization(0.5, 2.0)
    assert h_eval(2.0, reg) == 4.0
    assert h_prime(2.0, reg) == 3.0
    assert h_eval(0.0, Regularization(0.3, 3.0)) == 0.0
    assert h_prime(0.0, Regularization(0.3, 3.0)) == 1.0


def test_h_unregularized_identity():
    r = np.linspace(0, 10, 11)
    reg = Regularization(0.0, 2.0)
    assert np.array_equal(h_eval(r, reg), r)
    assert np.all(h_prime(r, reg) == 1.0)


def test_psi_examples():
    assert psi_eval(1.0, Regularization(0.3, 2.0)) == pytest.approx(0.3, abs=1e-15)
    assert psi_eval(0.0, Regularization(0.3, 2.0)) == 1.0
    assert psi_eval(2.0, Regularization(0.0, 2.0)) == pytest.approx(2 * math.log(2) - 1, abs=1e-15)
    assert psi_eval(2.0, Regularization(0.0, 2.0)) == pytest.approx(0.386294, abs=1e-6)


def test_domain_errors():
    reg = Regularization(0.1, 2.0)
    with pytest.raises(ValueError):
        h_eval(-1.0, reg)
    with pytest.raises(ValueError):
        psi_eval(-1e-3, reg)
    with pytest.raises(ValueError):
        psi_second(0.0, reg)


def test_tiny_argument_is_finite():
    reg = Regularization(0.1, 2.0)
    assert psi_eval(1e-320, reg) == pytest.approx(1.0)


def test_diffusivities_respect_bounds():
    x = np.random.default_rng(1).uniform(0, 1, (50, 2))
    for d in (ConstantDiffusivity(2.0), PeriodicDiffusivity(1.0, 0.4, 3, 1.0, 1),
              TimeRampDiffusivity(0.5, 1.5, 0.2)):
        lo, hi = d.bounds
        for t in (0.0, 0.1, 1.0):
            v = d(t, x)
            assert v.shape == (50,)
            assert np.all((v >= lo - 1e-15) & (v <= hi + 1e-15))


def test_reversible_pair_is_bounded_and_conservative():
    f = ReversiblePair(0, 1, 2.0)
    c = np.abs(np.random.default_rng(2).normal(size=(3, 20))) * 5
    r = f(0.0, None, c)
    assert np.all(np.abs(r) <= f.sup_bound)
    assert np.allclose(r[0] + r[1], 0.0)
    assert np.all(r[2] == 0.0)


def test_constant_source_clips_sinks():
    f = ConstantSource((1.0, -2.0), width=0.1)
    c = np.array([[0.0, 1.0], [0.0, 0.05]])
    r = f(0.0, None, c)
    assert np.allclose(r, [[1.0, 1.0], [0.0, -1.0]])
    assert f.sup_bound == 2.0


def test_validate_clean_spec():
    assert validate(pair_spec()) == []


def test_validate_tau_zero():
    spec = pair_spec(tau=0.0)
    problems = validate(spec)
    assert any("tau identically zero" in p for p in problems)


class _NotQuasiPositive:
    sup_bound = 1.0

    def __call__(self, t, x, c):
        out = np.zeros_like(c)
        out[0] = -np.tanh(c[1])
        out[1] = np.tanh(c[1])
        return out


def test_validate_quasi_positivity():
    base = pair_spec(cells=(8,))
    spec = ProblemSpec(base.grid, base.species, base.boundary, reactions=_NotQuasiPositive())
    assert any("quasi-positiv" in p for p in validate(spec))


def test_validate_exponent():
    grid = build_grid(2, [4, 4], [1.0, 1.0])
    spec = ProblemSpec(grid, [SpeciesSpec("a", 0, ConstantDiffusivity(1.0), np.ones(16))],
                       boundary_data(grid), regularization=Regularization(0.1, 1.5))
    assert any("p must be >= 2" in p for p in validate(spec))


def test_validate_collects_several_problems():
    grid = build_grid(1, [4], [1.0])
    spec = ProblemSpec(grid, [SpeciesSpec("a", 0, ConstantDiffusivity(-1.0), -np.ones(4))],
                       boundary_data(grid), regularization=Regularization(1.5, 2.0),
                       final_time=-1.0)
    assert len(validate(spec)) >= 4


def test_reaction_bound_violation_detected():
    class Loud:
        sup_bound = 0.1

        def __call__(self, t, x, c):
            return np.ones_like(c)

    base = pair_spec(cells=(8,))
    spec = ProblemSpec(base.grid, base.species, base.boundary, reactions=Loud())
    assert validate(spec)


def test_with_eta_keeps_everything_else():
    spec = pair_spec(eta=0.1)
    other = spec.with_eta(0.01)
    assert other.regularization.eta == 0.01 and other.regularization.p == spec.regularization.p
    assert other.grid is spec.grid and other.species is spec.species


def test_no_reaction_default():
    spec = pair_spec()
    assert isinstance(spec.reactions, NoReaction)
    assert spec.reactions.sup_bound == 0.0
