import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from dirackg.dirac import (ALPHA, BETA, apply_symbol, beta_form, check_clifford,
                           covariant_nonlinearity, dirac_symbol, free_step, gaussian_spinor,
                           nonlinearity_values, propagate_hat)
from dirackg.errors import ConfigurationError
from dirackg.grid import SpinorField, fft
from dirackg.norms import sobolev_norm

from conftest import random_spinor

floats = st.floats(-20, 20, allow_nan=False)
xis = st.tuples(floats, floats, floats)


def test_clifford_relations_exact():
    I4 = np.eye(4)
    for j in range(3):
        for k in range(3):
            anti = ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j]
            assert np.array_equal(anti, 2 * (j == k) * I4)
        assert np.array_equal(ALPHA[j] @ BETA + BETA @ ALPHA[j], np.zeros((4, 4)))
    assert np.array_equal(BETA @ BETA, I4)
    assert np.array_equal(BETA, np.diag([1, 1, -1, -1]))
    check_clifford()


@given(xis, st.floats(0.1, 5))
def test_symbol_squares_to_bracket(xi, m):
    D = dirac_symbol(xi, m)
    assert np.allclose(D @ D, (m * m + np.dot(xi, xi)) * np.eye(4), rtol=1e-12, atol=1e-9)
    assert np.allclose(D, D.conj().T)


@given(xis, st.floats(-10, 10))
def test_single_mode_matches_matrix_exponential(xi, t):
    D = dirac_symbol(xi)
    a = np.sqrt(1 + np.dot(xi, xi))
    closed = np.cos(t * a) * np.eye(4) + 1j * np.sin(t * a) / a * D
    assert np.allclose(closed, expm(1j * t * D), atol=1e-10)


def test_free_step_on_lattice_plane_wave(g16):
    # a lattice plane wave evolves by the 4x4 matrix exponential at its frequency
    k = np.array([2, -1, 3]) * g16.dk
    spin = np.array([1, 0.5j, -0.3, 0.2], dtype=complex)
    X, Y, Z = g16.coords
    wave = np.exp(1j * (k[0] * X + k[1] * Y + k[2] * Z))
    u = SpinorField(g16, spin[:, None, None, None] * wave[None])
    t = 0.7
    expect = (expm(1j * t * dirac_symbol(k)) @ spin)[:, None, None, None] * wave[None]
    assert np.max(np.abs(free_step(u, t).values - expect)) < 1e-12


def test_apply_symbol_matches_matrix_form(g8, rng):
    uh = rng.normal(size=(4,) + g8.shape) + 1j * rng.normal(size=(4,) + g8.shape)
    KX, KY, KZ = np.broadcast_arrays(*g8.freqs)
    D = dirac_symbol(np.stack([KX, KY, KZ]), 1.0)
    ref = np.einsum("...ab,b...->a...", D, uh)
    assert np.allclose(apply_symbol(uh, g8), ref, atol=1e-12)


@pytest.mark.parametrize("s", [0, 1, 2])
def test_free_step_preserves_sobolev_norms(g16, rng, s):
    u = random_spinor(g16, rng, 0.3)
    for t in (0.3, -1.7, 12.0):
        v = free_step(u, t)
        assert abs(sobolev_norm(v, s) / sobolev_norm(u, s) - 1) <= 1e-10


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_group_law(t1, t2):
    from dirackg.grid import Grid3
    g = Grid3(8, 6.0)
    u = random_spinor(g, np.random.default_rng(7), 0.2)
    lhs = free_step(free_step(u, t1), t2).values
    rhs = free_step(u, t1 + t2).values
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(u.values)


def test_time_reversal(g16, rng):
    u = random_spinor(g16, rng, 0.3)
    back = free_step(free_step(u, 2.5), -2.5)
    assert np.allclose(back.values, u.values, atol=1e-13)
    assert np.array_equal(propagate_hat(fft(u.values), g16, 0.0), fft(u.values))


def test_beta_form_and_nonlinearity_pointwise(rng):
    v = rng.normal(size=(4, 3, 3, 3)) + 1j * rng.normal(size=(4, 3, 3, 3))
    p = 5.0
    out = nonlinearity_values(v, p)
    for idx in np.ndindex(3, 3, 3):
        w = v[(slice(None),) + idx]
        form = np.vdot(w, BETA @ w).real
        assert beta_form(v)[idx] == pytest.approx(form, rel=1e-12)
        assert np.allclose(out[(slice(None),) + idx], abs(form) ** 2 * (BETA @ w), rtol=1e-12)


@given(st.floats(0, 2 * np.pi), st.sampled_from([3.5, 4.0, 5.0, 7.0]))
def test_nonlinearity_gauge_covariant(theta, p):
    from dirackg.grid import Grid3
    g = Grid3(4, 4.0)
    u = random_spinor(g, np.random.default_rng(3), 0.1)
    ph = np.exp(1j * theta)
    lhs = covariant_nonlinearity(SpinorField(g, ph * u.values), p).values
    rhs = ph * covariant_nonlinearity(u, p).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


@pytest.mark.parametrize("p", [3.0, 2.0, 1.0])
def test_nonlinearity_rejects_p_at_most_three(p):
    with pytest.raises(ConfigurationError, match="p > 3"):
        nonlinearity_values(np.ones((4, 2, 2, 2)), p)


def test_gaussian_spinor_norm(g32):
    # ||A e^{-r^2/(2w^2)}||_2^2 = A^2 (pi w^2)^{3/2}
    u = gaussian_spinor(g32, 0.3, 1.2, spin=(0, 1, 0, 0))
    assert u.norm() ** 2 == pytest.approx(0.09 * (np.pi * 1.44) ** 1.5, rel=1e-10)
