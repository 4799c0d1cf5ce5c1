from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import zenger_grid

from jointrange.errors import InputError, LinearDependence
from jointrange.zenger import zenger_residuals, zenger_solve

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _instance(rng, m, dim=12):
    while True:
        u = rng.standard_normal((dim, m)) + 1j * rng.standard_normal((dim, m))
        if np.linalg.eigvalsh(u.conj().T @ u)[0] >= 1e-3:
            break
    a = rng.dirichlet(np.ones(m))
    a[-1] = 1.0 - a[:-1].sum()
    return u, a


def test_orthonormal_closed_form():
    u = np.eye(4, 3, dtype=complex)
    a = np.array([0.2, 0.3, 0.5])
    sol = zenger_solve(u, a)
    np.testing.assert_allclose(np.abs(sol.w), np.sqrt(a), atol=1e-12)
    np.testing.assert_allclose(np.abs(sol.u[:3]), np.sqrt(a), atol=1e-12)
    assert sol.max_residual <= 1e-12


def test_single_vector():
    u = np.array([[3.0], [4.0j]])
    sol = zenger_solve(u, [1.0])
    assert abs(np.linalg.norm(sol.u) - 1) <= 1e-14
    np.testing.assert_allclose(sol.u, sol.w[0] * u[:, 0], atol=1e-14)
    assert sol.max_residual <= 1e-12


def test_skewed_pair_against_grid_oracle():
    e1, e2 = np.eye(2, dtype=complex)
    u1, u2 = e1, (e1 + e2) / np.sqrt(2)
    sol = zenger_solve(np.column_stack([u1, u2]), [0.5, 0.5])
    assert sol.max_residual <= 1e-8
    assert np.linalg.norm(sol.u - sol.w[0] * u1 - sol.w[1] * u2) <= 1e-12
    ref = zenger_grid(u1, u2, (0.5, 0.5))
    assert abs(abs(np.vdot(ref, sol.u)) - 1) <= 1e-8


def test_zero_weight_drops_vector():
    rng = np.random.default_rng(0)
    u, _ = _instance(rng, 3)
    sol = zenger_solve(u, [0.5, 0.0, 0.5])
    assert sol.w[1] == 0
    assert sol.max_residual <= 1e-10


def test_rejects_bad_weights_and_dependence():
    u = np.eye(3, 2, dtype=complex)
    with pytest.raises(InputError):
        zenger_solve(u, [0.5, 0.6])
    with pytest.raises(InputError):
        zenger_solve(u, [1.2, -0.2])
    with pytest.raises(LinearDependence):
        zenger_solve(np.column_stack([u[:, 0], 2 * u[:, 0]]), [0.5, 0.5])


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 6))
def test_postcondition_recomputed(seed, m):
    rng = np.random.default_rng(seed)
    u, a = _instance(rng, m)
    sol = zenger_solve(u, a, seed=seed % 97)
    res = zenger_residuals(u, sol.w, sol.u, a)
    assert np.max(res) <= 1e-10
    assert np.linalg.norm(sol.u - u @ sol.w) <= 1e-10
    assert abs(np.linalg.norm(sol.u) - 1) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(2, 5))
def test_scale_invariance(seed, m):
    rng = np.random.default_rng(seed)
    u, a = _instance(rng, m)
    beta = rng.uniform(0.3, 3.0, m) * np.exp(2j * np.pi * rng.random(m))
    s1 = zenger_solve(u, a)
    s2 = zenger_solve(u * beta, a)
    np.testing.assert_allclose(s2.u, s1.u, atol=1e-8)
    np.testing.assert_allclose(s2.w * beta, s1.w, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(2, 5))
def test_permutation_equivariance(seed, m):
    rng = np.random.default_rng(seed)
    u, a = _instance(rng, m)
    perm = rng.permutation(m)
    s1 = zenger_solve(u, a)
    s2 = zenger_solve(u[:, perm], a[perm])
    np.testing.assert_allclose(s2.w, s1.w[perm], atol=1e-8)
    np.testing.assert_allclose(s2.u, s1.u, atol=1e-8)
