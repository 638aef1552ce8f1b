import numpy as np
import pytest

from conftest import random_solenoidal
from toporelax.diagnostics import energy, helicity
from toporelax.spectral import Grid3, VectorField, curl
from toporelax.woltjer import (
    DescentOptions,
    beltrami_residual,
    constrained_descent,
    eigenmode,
    helical_decompose,
    helical_energies,
    helicity_helical,
    mixed_start,
    woltjer_minimizer,
)


def abc(g):
    return VectorField.from_function(
        g, lambda x, y, z: (np.sin(z) + np.cos(y), np.sin(x) + np.cos(z), np.sin(y) + np.cos(x))
    )


# helical decomposition ----------------------------------------------------------

def test_abc_is_purely_positive(grid32):
    B = abc(grid32)
    plus, minus = helical_decompose(B)
    assert minus.max_abs() <= 1e-12 * B.max_abs()
    assert (plus - B).max_abs() <= 1e-12 * B.max_abs()


def test_negative_mode_is_purely_negative(grid32):
    B = VectorField.from_function(grid32, lambda x, y, z: (np.cos(z), np.sin(z), 0 * z))
    plus, _ = helical_decompose(B)
    assert plus.max_abs() <= 1e-12


def test_random_field_recombines(grid32, rng):
    B = random_solenoidal(grid32, rng, kmax=6)
    plus, minus = helical_decompose(B)
    assert (plus + minus - B).norm() <= 1e-12 * B.norm()
    ep, em = helical_energies(B)
    assert ep + em == pytest.approx(energy(B), rel=1e-12)
    assert energy(plus) == pytest.approx(ep, rel=1e-12)
    # the parts are curl eigenfields up to the sign of |k|
    assert helicity_helical(B) == pytest.approx(helicity(B), rel=1e-10)


def test_decompose_requires_mean_zero(grid32, rng):
    B = random_solenoidal(grid32, rng, mean_zero=False)
    with pytest.raises(ValueError, match="mean-zero"):
        helical_decompose(B)


# closed-form minimizer ----------------------------------------------------------

def test_zero_helicity_minimizer_is_zero(grid32):
    sol = woltjer_minimizer(0.0, grid32)
    assert sol.E == 0.0
    assert sol.field.max_abs() == 0.0


@pytest.mark.parametrize("c", [1.0, -1.0, 3.5, -0.02])
def test_minimizer_values(c, grid32):
    sol = woltjer_minimizer(c, grid32)
    assert sol.lam == np.sign(c) * grid32.lambda1
    assert sol.E == pytest.approx(abs(c), rel=1e-10)
    assert energy(sol.field) == pytest.approx(abs(c), rel=1e-10)
    assert helicity(sol.field) == pytest.approx(c, rel=1e-10)
    assert beltrami_residual(sol.field, sol.lam) <= 1e-10
    assert sol.E == pytest.approx(sol.lam * sol.H, rel=1e-10)


def test_minimizer_on_larger_box():
    g = Grid3(16, L=4.0)
    sol = woltjer_minimizer(2.0, g)
    assert sol.E == pytest.approx(2 * np.pi / 4.0 * 2.0, rel=1e-12)
    assert energy(sol.field) == pytest.approx(sol.E, rel=1e-10)
    assert helicity(sol.field) == pytest.approx(2.0, rel=1e-10)


def test_optimality_certificate(grid32):
    rng = np.random.default_rng(2024)
    for c in (1.0, -0.5):
        E_min = woltjer_minimizer(c, grid32).E
        checked = 0
        while checked < 100:
            B = random_solenoidal(grid32, rng, kmax=3)
            h = helicity(B)
            if h * c <= 0:
                continue
            B = np.sqrt(c / h) * B
            assert energy(B) >= E_min - 1e-10
            checked += 1


def test_eigenmode_handedness(grid32):
    for axis in range(3):
        for sign in (1, -1):
            B = eigenmode(grid32, axis, sign, k=2, energy=3.0)
            assert (curl(B) - (2.0 * sign) * B).norm() <= 1e-10 * B.norm()
            assert energy(B) == pytest.approx(3.0, rel=1e-12)


def test_eigenmode_must_be_resolved(grid32):
    with pytest.raises(ValueError):
        eigenmode(grid32, k=11)


@pytest.mark.parametrize("c", [1.0, -2.0, 0.0])
def test_mixed_start_helicity(c, grid32):
    assert helicity(mixed_start(c, grid32)) == pytest.approx(c, abs=1e-12)


# constrained descent -------------------------------------------------------------

def test_minimizer_is_a_fixed_point(grid32):
    sol = woltjer_minimizer(1.0, grid32)
    res = constrained_descent(sol.field, 1.0)
    assert res.converged
    assert (res.field - sol.field).max_abs() <= 1e-10 * sol.field.max_abs()


@pytest.mark.parametrize("c", [1.0, -1.0])
def test_descent_reaches_minimum(c, grid32):
    res = constrained_descent(mixed_start(c, grid32), c)
    assert res.converged
    assert energy(res.field) == pytest.approx(abs(c), abs=1e-6)
    assert res.beltrami_residual <= 1e-6
    assert res.lam == pytest.approx(np.sign(c) * grid32.lambda1, abs=1e-6)


def test_descent_monotone_and_helicity_preserving(grid32):
    c = 1.0
    res = constrained_descent(mixed_start(c, grid32), c)
    E = np.array(res.energies)
    assert np.all(np.diff(E) <= 0)
    H = np.array(res.helicities)
    assert np.max(np.abs(np.diff(H))) <= 1e-8
    assert np.max(np.abs(H - c)) <= 1e-8


def test_descent_zero_helicity(grid32):
    B0 = mixed_start(0.0, grid32)
    res = constrained_descent(B0, 0.0)
    assert res.converged
    E = np.array(res.energies)
    assert np.all(np.diff(E) <= 0)
    assert E[-1] <= 1e-8 * E[0]


def test_descent_random_start(grid32, rng):
    B = random_solenoidal(grid32, rng, kmax=3)
    c = helicity(B)
    res = constrained_descent(B, c)
    assert res.converged
    assert energy(res.field) == pytest.approx(grid32.lambda1 * abs(c), rel=1e-6)


def test_descent_rejects_wrong_helicity(grid32):
    with pytest.raises(ValueError, match="does not match"):
        constrained_descent(mixed_start(1.0, grid32), 2.0)


def test_descent_flags_non_convergence(grid32):
    res = constrained_descent(mixed_start(1.0, grid32), 1.0, DescentOptions(max_steps=3))
    assert not res.converged
    assert res.steps == 3
    assert energy(res.field) < energy(mixed_start(1.0, grid32))
