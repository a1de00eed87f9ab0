"""Tests for the dense linear-algebra kernels."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dlra.kernels import (
    DimensionError,
    NonFiniteError,
    OrthogonalFlow,
    SkewSymmetryError,
    frobenius_norm,
    skew_orthogonal_path,
    svd,
    thin_qr,
)


def random_skew(rng, n):
    g = rng.uniform(-0.5, 0.5, (n, n))
    return (g - g.T) / 2


# --- thin_qr ---------------------------------------------------------------


def test_thin_qr_identity():
    f = thin_qr(np.eye(3))
    assert np.array_equal(f.q, np.eye(3))
    assert np.array_equal(f.r_factor, np.eye(3))


def test_thin_qr_sign_convention():
    a = np.eye(3)
    a[:, 0] *= -1.0
    f = thin_qr(a)
    assert np.all(np.diagonal(f.r_factor) >= 0.0)
    assert np.allclose(f.q @ f.r_factor, a, atol=1e-15)


def test_thin_qr_residual_and_orthonormality():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.standard_normal((50, 10))
        f = thin_qr(a)
        assert np.linalg.norm(f.q.T @ f.q - np.eye(10)) < 1e-12
        assert np.linalg.norm(f.q @ f.r_factor - a) < 1e-12 * np.linalg.norm(a)
        assert np.all(np.diagonal(f.r_factor) >= 0.0)
        assert np.allclose(f.r_factor, np.triu(f.r_factor))


def test_thin_qr_determinism():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((40, 8))
    f1 = thin_qr(a.copy())
    f2 = thin_qr(a.copy())
    assert f1.q.tobytes() == f2.q.tobytes()
    assert f1.r_factor.tobytes() == f2.r_factor.tobytes()


def test_thin_qr_rank_deficient_input():
    # A single repeated column: q must still be orthonormal.
    a = np.ones((6, 3))
    f = thin_qr(a)
    assert np.linalg.norm(f.q.T @ f.q - np.eye(3)) < 1e-12
    assert np.linalg.norm(f.q @ f.r_factor - a) < 1e-12 * np.linalg.norm(a)


def test_thin_qr_zero_matrix():
    f = thin_qr(np.zeros((5, 2)))
    assert np.linalg.norm(f.q.T @ f.q - np.eye(2)) < 1e-12
    assert np.allclose(f.r_factor, 0.0)


def test_thin_qr_rejects_wide_and_nonfinite():
    with pytest.raises(DimensionError):
        thin_qr(np.zeros((2, 5)))
    with pytest.raises(NonFiniteError):
        thin_qr(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(DimensionError):
        thin_qr(np.zeros(4))


# --- svd -------------------------------------------------------------------


def test_svd_diagonal():
    d = svd(np.diag([3.0, 2.0, 1.0]))
    assert np.allclose(d.sigma, [3.0, 2.0, 1.0])


def test_svd_rank_one():
    x = np.array([1.0, 2.0, 2.0])
    y = np.array([3.0, 4.0])
    d = svd(np.outer(x, y))
    assert abs(d.sigma[0] - np.linalg.norm(x) * np.linalg.norm(y)) < 1e-12
    assert np.all(d.sigma[1:] < 1e-12)


def test_svd_reconstruction_and_truncation_identity():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.standard_normal((20, 15))
        d = svd(a)
        assert np.linalg.norm(
            d.u @ np.diag(d.sigma) @ d.v.T - a
        ) < 1e-12 * np.linalg.norm(a)
        assert np.all(np.diff(d.sigma) <= 1e-14)
        for k in (1, 5, 10):
            approx = d.u[:, :k] @ np.diag(d.sigma[:k]) @ d.v[:, :k].T
            resid = np.linalg.norm(a - approx)
            tail = np.sqrt(np.sum(d.sigma[k:] ** 2))
            assert abs(resid - tail) < 1e-10


def test_svd_truncation_optimality():
    # No randomly perturbed rank-k candidate beats the truncated SVD.
    rng = np.random.default_rng(19)
    a = rng.standard_normal((10, 8))
    d = svd(a)
    for k in (1, 3, 5):
        best = np.linalg.norm(
            a - d.u[:, :k] @ np.diag(d.sigma[:k]) @ d.v[:, :k].T
        )
        for _ in range(1000):
            u = d.u[:, :k] + 1e-3 * rng.standard_normal((10, k))
            s = np.diag(d.sigma[:k]) + 1e-3 * rng.standard_normal((k, k))
            v = d.v[:, :k] + 1e-3 * rng.standard_normal((8, k))
            assert np.linalg.norm(a - u @ s @ v.T) >= best - 1e-12


# --- frobenius_norm --------------------------------------------------------


def test_frobenius_norm_basic():
    assert frobenius_norm(np.zeros((4, 3))) == 0.0
    assert abs(frobenius_norm(np.eye(5)) - np.sqrt(5)) < 1e-15


def test_frobenius_norm_submultiplicative():
    rng = np.random.default_rng(23)
    for _ in range(20):
        a = rng.standard_normal((6, 4))
        b = rng.standard_normal((4, 5))
        assert frobenius_norm(a @ b) <= frobenius_norm(a) * frobenius_norm(b) + 1e-12


# --- skew_orthogonal_path --------------------------------------------------


def test_path_at_zero_is_q0():
    rng = np.random.default_rng(31)
    t = random_skew(rng, 6)
    q0 = thin_qr(rng.standard_normal((6, 6))).q
    assert np.allclose(skew_orthogonal_path(0.0, t, q0), q0, atol=1e-14)


def test_path_planar_rotation():
    omega = 0.7
    gen = np.array([[0.0, -omega], [omega, 0.0]])
    for t in (0.3, 1.0, 2.5):
        q = skew_orthogonal_path(t, gen, np.eye(2))
        c, s = np.cos(omega * t), np.sin(omega * t)
        assert np.allclose(q, [[c, -s], [s, c]], atol=1e-12)


def test_path_matches_reference_ode_solve():
    rng = np.random.default_rng(37)
    gen = random_skew(rng, 100)
    q = skew_orthogonal_path(1.0, gen, np.eye(100))
    assert np.linalg.norm(q.T @ q - np.eye(100)) < 1e-11
    sol = solve_ivp(
        lambda t, y: (gen @ y.reshape(100, 100)).ravel(),
        (0.0, 1.0),
        np.eye(100).ravel(),
        rtol=1e-11,
        atol=1e-13,
    )
    ref = sol.y[:, -1].reshape(100, 100)
    assert np.linalg.norm(q - ref) < 1e-8


def test_path_group_property():
    rng = np.random.default_rng(41)
    gen = random_skew(rng, 8)
    for s, t in ((0.2, 0.5), (1.0, 0.3), (0.7, 0.7)):
        qs = skew_orthogonal_path(s, gen, np.eye(8))
        qt = skew_orthogonal_path(t, gen, np.eye(8))
        qst = skew_orthogonal_path(s + t, gen, np.eye(8))
        assert np.linalg.norm(qst - qs @ qt) < 1e-10


def test_path_rejects_bad_inputs():
    rng = np.random.default_rng(43)
    with pytest.raises(SkewSymmetryError):
        skew_orthogonal_path(1.0, rng.standard_normal((4, 4)), np.eye(4))
    gen = random_skew(rng, 4)
    with pytest.raises(ValueError):
        skew_orthogonal_path(1.0, gen, np.eye(4) * 1.5)
    with pytest.raises(DimensionError):
        skew_orthogonal_path(1.0, random_skew(rng, 3), np.eye(4))


# --- OrthogonalFlow --------------------------------------------------------


def test_flow_chaining_matches_direct():
    rng = np.random.default_rng(47)
    gen = random_skew(rng, 30)
    flow = OrthogonalFlow(gen)
    h = 1e-2
    for i in range(1, 200):
        q = flow(i * h)
    q_direct = OrthogonalFlow(gen)._direct(199 * h)
    assert np.linalg.norm(q - q_direct) < 1e-11


def test_flow_nonmonotone_queries():
    rng = np.random.default_rng(53)
    gen = random_skew(rng, 12)
    flow = OrthogonalFlow(gen)
    times = [0.5, 0.1, 0.9, 0.1, 1.3, 0.0]
    for t in times:
        q = flow(t)
        assert np.linalg.norm(q - OrthogonalFlow(gen)._direct(t)) < 1e-11


def test_flow_increment_is_exponential():
    rng = np.random.default_rng(59)
    gen = random_skew(rng, 10)
    flow = OrthogonalFlow(gen)
    step = flow.increment(0.25)
    # Cached on repeat and equal to a direct evaluation.
    assert step is flow.increment(0.25)
    assert np.linalg.norm(step - OrthogonalFlow(gen)._direct(0.25)) < 1e-13
