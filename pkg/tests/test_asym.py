from __future__ import annotations

import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointrange.asym import (
    OrbitDiagnostics,
    ShiftModel,
    WindowAllocator,
    compressed_powers,
    decay_csv,
    diagonal_compression,
    discretization_budget,
    discretize_unitary,
    first_power_below,
    hamdan_vector,
    match_contraction,
    moment_vector,
    orbit_inner,
    roots_count,
    sup_n_c_power,
    weak_orbit_decay,
)
from jointrange.errors import InputError, NotStrictContraction, NotUnitary, WindowExhausted
from jointrange.opcore import random_unitary

seeds = st.integers(min_value=0, max_value=2**32 - 1)
ROOTS8 = np.exp(2j * np.pi * np.arange(8) / 8)


def _moments(s, x, horizon):
    return orbit_inner(s, x, x[:, None], horizon)[:, 0]


def _contraction(rng, d, norm):
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return norm * m / np.linalg.norm(m, 2)


# the model


def test_shift_model_matches_dense_matrix():
    s = ShiftModel(6, 2, weights=[1, 2, 0.5, 1, 3])
    t = s.matrix()
    x = np.random.default_rng(0).standard_normal(12) + 0j
    np.testing.assert_allclose(s.apply(x), t @ x, atol=1e-14)
    np.testing.assert_allclose(s.apply(x, 3, adjoint=True), np.linalg.matrix_power(t.conj().T, 3) @ x, atol=1e-12)
    assert s.index(1, 2) == 8


def test_shift_model_nilpotent_and_bounded():
    s = ShiftModel(5, 3)
    assert not np.linalg.matrix_power(s.matrix(), 5).any()
    assert s.power_bound(10) == pytest.approx(1.0)
    assert ShiftModel.from_json(s.to_json()).dim == 15


def test_shift_model_rejects_bad_weights():
    with pytest.raises(InputError):
        ShiftModel(4, 1, weights=[1, -1, 1])


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 8), st.integers(1, 3), st.integers(1, 6))
def test_orbit_inner_against_dense(seed, N, m, horizon):
    rng = np.random.default_rng(seed)
    s = ShiftModel(N, m, weights=list(rng.uniform(0.5, 1.5, N - 1)))
    x = rng.standard_normal(s.dim) + 1j * rng.standard_normal(s.dim)
    ys = rng.standard_normal((s.dim, 2)) + 1j * rng.standard_normal((s.dim, 2))
    t = s.matrix()
    got = orbit_inner(s, x, ys, horizon)
    got_adj = orbit_inner(s, x, ys, horizon, adjoint=True)
    for n in range(1, horizon + 1):
        p = np.linalg.matrix_power(t, n)
        np.testing.assert_allclose(got[n - 1], ys.conj().T @ (p @ x), atol=1e-10)
        np.testing.assert_allclose(got_adj[n - 1], ys.conj().T @ (p.conj().T @ x), atol=1e-10)


# moment vectors


def test_moment_vector_zero_is_basis_vector():
    s = ShiftModel(20, 1)
    x = moment_vector(s, 0.0, 4)
    assert np.count_nonzero(x) == 1 and np.linalg.norm(x) == pytest.approx(1.0)
    assert np.abs(_moments(s, x, 4)).max() == 0.0


def test_moment_vector_half_window_forty():
    s = ShiftModel(64, 1)
    x = moment_vector(s, 0.5, 3, window=40)
    np.testing.assert_allclose(_moments(s, x, 3), [0.5, 0.25, 0.125], atol=1e-9)


def test_moment_vector_clears_guard():
    s = ShiftModel(400, 1)
    guard = np.zeros(s.dim)
    guard[:100] = 1.0 / 10
    x = moment_vector(s, 0.3 + 0.2j, 5, guard=guard[:, None])
    assert np.flatnonzero(x)[0] > 99 + 5
    assert np.abs(orbit_inner(s, x, guard[:, None], 5)).max() == 0.0
    assert np.abs(orbit_inner(s, x, guard[:, None], 5, adjoint=True)).max() == 0.0


def test_moment_vector_window_exhausted():
    with pytest.raises(WindowExhausted) as err:
        moment_vector(ShiftModel(10, 1), 0.9, 20)
    assert err.value.demand is not None


def test_allocator_prefers_fresh_copies():
    s = ShiftModel(50, 3)
    a = WindowAllocator(s)
    assert [a.reserve(10, 5) for _ in range(4)] == [(0, 0), (1, 0), (2, 0), (0, 15)]
    assert a.free_copies() == 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.95), st.floats(0, 2 * np.pi), st.integers(1, 8))
def test_moment_identity_property(r, phi, horizon):
    lam = r * np.exp(1j * phi)
    s = ShiftModel(800, 1)
    x = moment_vector(s, lam, horizon)
    dev = np.abs(_moments(s, x, horizon) - lam ** np.arange(1, horizon + 1))
    assert dev.max() <= 1e-9


# Hamdan vectors


def test_first_power_below_examples():
    assert first_power_below(0.5, 0.25 / 5) == 5
    assert first_power_below(0.0, 0.05) == 1
    assert first_power_below(0.8, 0.25 / 16) == 19


def test_hamdan_zero_default_window_count():
    s = ShiftModel(300, 8)
    x, diag = hamdan_vector(s, 0.0, eps=0.3, horizon=60)
    assert diag.extra["n_windows"] == math.ceil(25 / 0.09) + 1 == 279
    assert diag.sup_value <= 0.3
    assert abs(np.linalg.norm(x) - 1) <= 1e-12


def test_hamdan_half_cut_and_exact_regime():
    s = ShiftModel(400, 4)
    x, diag = hamdan_vector(s, 0.5, eps=0.25, horizon=80, n_windows=8)
    assert diag.extra["n0"] == 5
    assert max(diag.per_power[:5]) <= 1e-9
    assert diag.sup_value <= 0.25
    assert list(diag.extra["cut_points"]) == sorted(diag.extra["cut_points"])


def test_hamdan_avoids_a_vector():
    # windows may share a copy with e0; the default window count keeps each contact small
    s = ShiftModel(500, 8)
    e0 = np.zeros(s.dim)
    e0[0] = 1.0
    x, diag = hamdan_vector(s, 0.3j, A=[e0], eps=0.4, horizon=100)
    assert diag.extra["n_windows"] == 158
    cross = np.abs(np.concatenate([orbit_inner(s, x, e0[:, None], 100), orbit_inner(s, x, e0[:, None], 100, True)]))
    assert cross.max() <= 0.4
    assert diag.extra["sup_cross_A"] == pytest.approx(cross.max(), abs=1e-15)


@settings(max_examples=15, deadline=None)
@given(seeds, st.floats(0.0, 0.9), st.floats(0.1, 0.9))
def test_hamdan_exact_regime_property(seed, r, eps):
    lam = r * np.exp(2j * np.pi * np.random.default_rng(seed).random())
    s = ShiftModel(600, 4)
    _, diag = hamdan_vector(s, lam, eps=eps, horizon=60, n_windows=4, seed=seed % 1000)
    n0 = diag.extra["n0"]
    assert max(diag.per_power[:n0]) <= 1e-9
    assert diag.sup_value <= eps


# diagonal compression


def test_diagonal_zeros_gives_small_powers():
    s = ShiftModel(256, 4)
    frame, diag = diagonal_compression(s, [0, 0, 0, 0], eps=0.25, horizon=100)
    assert frame.rank == 4
    assert diag.sup_value <= 0.25


def test_diagonal_single_target_matches_hamdan_scale():
    s = ShiftModel(256, 2)
    frame, diag = diagonal_compression(s, [0.5], eps=0.25, horizon=100)
    assert frame.rank == 1
    assert diag.extra["thresholds"] == [0.25 / 16]
    assert diag.sup_value <= 0.25 / 16


def test_diagonal_eight_roots_on_4096():
    s = ShiftModel(512, 8)
    lam = 0.8 * ROOTS8
    frame, diag = diagonal_compression(s, lam, eps=0.25, horizon=300)
    assert diag.sup_value <= 0.25
    assert diag.extra["exact_regime_max"] <= 1e-9
    assert diag.trend_nonincreasing()
    # independent recheck: shift each copy's coordinates by n with zero fill
    e = frame.columns.T.reshape(8, 8, 512)
    for n in range(1, 301):
        shifted = np.zeros_like(e)
        shifted[:, :, n:] = e[:, :, :-n]
        comp = np.einsum("acn,bcn->ba", shifted, e.conj())
        assert np.linalg.norm(comp - np.diag(lam**n), 2) <= 0.25


def test_diagonal_frame_is_clear_of_its_orbits():
    s = ShiftModel(256, 4)
    frame, diag = diagonal_compression(s, [0.3, -0.4j, 0.2], eps=0.25, horizon=60)
    e = frame.columns
    assert np.linalg.norm(e.conj().T @ e - np.eye(3)) <= 1e-12
    n0 = diag.extra["n0"]
    for n, comp in compressed_powers(s, e, n0):
        assert np.linalg.norm(comp - np.diag(np.array([0.3, -0.4j, 0.2]) ** n), 2) <= 0.25 / 2 + 1e-9


def test_orbit_diagnostics_csv():
    d = OrbitDiagnostics.from_values([0.3, 0.2, 0.1], eps=0.5)
    rows = list(csv.reader(io.StringIO(d.to_csv())))
    assert rows[0] == ["n", "deviation", "threshold_in_force"]
    assert rows[1] == ["1", "0.3", "0.5"]
    assert d.sup_value == 0.3 and d.trend_nonincreasing()


# discretization


def test_discretize_on_grid_is_identity():
    u = np.diag(np.exp(2j * np.pi * np.array([0, 3, 7]) / 16))
    d, bound = discretize_unitary(u, 16)
    np.testing.assert_array_equal(d, u)
    assert bound == 0.0


def test_discretize_worst_case_scalar():
    k = 12
    d, bound = discretize_unitary(np.diag([np.exp(1j * np.pi / k)]), k)
    assert d[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert bound == pytest.approx(abs(np.exp(1j * np.pi / k) - 1), abs=1e-12)
    assert bound <= 2 * np.pi / k


def test_discretize_random_unitary():
    u = random_unitary(8, np.random.default_rng(3))
    d, bound = discretize_unitary(u, 32)
    assert np.linalg.norm(u - d, 2) <= 2 * np.pi / 32 + 1e-10
    assert np.linalg.norm(u - d, 2) == pytest.approx(bound, abs=1e-10)
    w = np.linalg.eigvals(d)
    assert np.abs(w**32 - 1).max() <= 1e-9
    for n in range(1, 6):
        gap = np.linalg.norm(np.linalg.matrix_power(u, n) - np.linalg.matrix_power(d, n), 2)
        assert gap <= 2 * np.pi * n / 32 + 1e-9


def test_discretize_rejects_non_unitary():
    with pytest.raises(NotUnitary):
        discretize_unitary(np.diag([1.0, 0.5]), 4)


# contraction matching


def test_roots_count_for_point_seven():
    sup, n = sup_n_c_power(0.7)
    assert n == 3 and sup == pytest.approx(1.029, abs=1e-12)
    ns = np.arange(1, 200)
    assert sup == pytest.approx(float(np.max(ns * 0.7**ns)), abs=1e-15)
    assert roots_count(0.7, 0.5) == 26
    assert not 1.029 < 25 * 0.5 / (4 * np.pi)


def test_match_zero_scalar():
    s = ShiftModel(256, 4)
    frame, cm, diag = match_contraction(s, np.zeros((1, 1)), eps=0.5, horizon=100)
    assert frame.rank == 1
    assert diag.sup_value <= 0.5


def test_match_random_three_by_three():
    # 21 dilation vectors: enough copies that most windows start fresh
    s = ShiftModel(128, 32)
    cm = _contraction(np.random.default_rng(1), 3, 0.6)
    frame, cm2, diag = match_contraction(s, cm, eps=0.5, horizon=300)
    ex = diag.extra
    assert ex["k"] == 26 and ex["c0"] == pytest.approx(0.7)
    assert diag.sup_value <= 0.5
    assert ex["stage1_budget"] <= 0.25 + 1e-9 and ex["stage2_measured"] <= 0.25 + 1e-9
    assert diag.sup_value <= ex["stage1_budget"] + ex["stage2_measured"] + 1e-9
    f = frame.columns
    for n, comp in compressed_powers(s, f, 10):
        assert np.linalg.norm(comp - np.linalg.matrix_power(cm2, n), 2) <= 0.5


def test_match_budget_is_monotone_in_depth():
    vals = [discretization_budget(0.7, 0.6, 26, h, 300) for h in range(1, 60)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_match_rejects_non_contraction():
    with pytest.raises(NotStrictContraction):
        match_contraction(ShiftModel(16, 1), np.eye(2), eps=0.5)


# weak orbits


def test_weak_orbit_self_pair_vanishes():
    s = ShiftModel(20, 1)
    e0 = np.eye(s.dim)[0]
    rows, flags = weak_orbit_decay(s, [(e0, e0)], 10)
    assert [v for _, n, v in rows if n >= 1] == [0.0] * 10
    assert flags == [True]


def test_weak_orbit_hits_at_five():
    s = ShiftModel(20, 1)
    e = np.eye(s.dim)
    rows, _ = weak_orbit_decay(s, [(e[0], e[5])], 12)
    assert [n for _, n, v in rows if v != 0] == [5]
    assert rows[5][2] == 1.0


def test_weak_orbit_csv_roundtrip():
    rng = np.random.default_rng(0)
    s = ShiftModel(30, 2)
    probes = [(rng.standard_normal(s.dim) + 0j, rng.standard_normal(s.dim) + 0j) for _ in range(2)]
    rows, flags = weak_orbit_decay(s, probes, 40)
    parsed = list(csv.reader(io.StringIO(decay_csv(rows))))
    assert parsed[0] == ["probe", "n", "modulus"] and len(parsed) == 1 + 2 * 41
    assert all(float(r[2]) == 0.0 for r in parsed[1:] if int(r[1]) >= 30)
    assert len(flags) == 2
