"""Time-stepping schemes for dynamical low-rank approximation.

The splitting schemes (KSL and variants) advance the factored state using
only increments of A and thin QR factorizations; there is no inversion of
the small core anywhere, so singular or ill-conditioned cores are legal
inputs. The implicit-midpoint baseline works on the gauged factor system
instead and does invert the core, which is exactly the fragility the
splitting schemes avoid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import DimensionError, _qr_fast, as_matrix, thin_qr
from .paths import MatrixPath
from .state import LowRankState, _trusted_state, assemble


class SchemeId(enum.Enum):
    """Integrators under test."""

    KSL = "ksl"
    KSL2 = "ksl2"
    KLS = "kls"
    KLS2 = "kls2"
    MIDPOINT = "midpoint"


class SingularCoreError(RuntimeError):
    """The core factor is too ill-conditioned to invert.

    Raised by gauged_rhs when the condition number exceeds the cap; this is
    the breakdown mode of the gauged factor system under over-approximation.
    """


class FixedPointDivergedError(RuntimeError):
    """The implicit-midpoint fixed-point iteration failed to converge."""


@dataclass(frozen=True)
class GaugedDerivative:
    """Factor derivatives of the gauged system; u.T @ u_dot = 0 and
    v.T @ v_dot = 0 by construction."""

    u_dot: np.ndarray
    s_dot: np.ndarray
    v_dot: np.ndarray


def _check_increment(y: LowRankState, delta_a) -> np.ndarray:
    delta_a = as_matrix(delta_a, "delta_a")
    if delta_a.shape != y.shape:
        raise DimensionError(
            f"increment shape {delta_a.shape} does not match state {y.shape}"
        )
    return delta_a


def ksl_step(y0: LowRankState, delta_a) -> LowRankState:
    """One first-order splitting step with increment delta_a.

    K-update: QR(U0 S0 + dA V0) -> U1, S_hat; S-update with a minus sign;
    L-update: QR(V0 S_tilde^T + dA^T U1) -> V1, S1^T. Exact on paths of
    rank <= r and immune to singular cores.
    """
    return _ksl_core(y0, _check_increment(y0, delta_a))


def _ksl_core(y0: LowRankState, delta_a: np.ndarray) -> LowRankState:
    dav = delta_a @ y0.v
    k = y0.u @ y0.s + dav
    u1, s_hat = _qr_fast(k)
    s_tilde = s_hat - u1.T @ dav
    l = y0.v @ s_tilde.T + delta_a.T @ u1
    v1, s1t = _qr_fast(l)
    return _trusted_state(u1, s1t.T, v1)


def ksl_symmetric_step(y0: LowRankState, a0, a_half, a1) -> LowRankState:
    """Strang-symmetrized splitting step from three snapshots of A.

    Half K-step with A_half - A0, S correction, full L-step with A1 - A0,
    second S correction, half K-step with A1 - A_half. Second order, and
    time-reversible on assembled matrices.
    """
    a0 = _check_increment(y0, a0)
    a_half = _check_increment(y0, a_half)
    a1 = _check_increment(y0, a1)
    return _ksl2_core(y0, a0, a_half, a1)


def _ksl2_core(y0, a0, a_half, a1) -> LowRankState:
    d_first = a_half - a0
    d_second = a1 - a_half

    d1v = d_first @ y0.v
    k_half = y0.u @ y0.s + d1v
    u_half, s_hat_half = _qr_fast(k_half)
    s_tilde0 = s_hat_half - u_half.T @ d1v
    l1 = y0.v @ s_tilde0.T + (a1 - a0).T @ u_half
    v1, s_hat1t = _qr_fast(l1)
    d2v = d_second @ v1
    s_tilde_half = s_hat1t.T - u_half.T @ d2v
    k1 = u_half @ s_tilde_half + d2v
    u1, s1 = _qr_fast(k1)
    return _trusted_state(u1, s1, v1)


def kls_step(y0: LowRankState, delta_a) -> LowRankState:
    """First-order splitting in the alternative K, L, S order.

    Kept as a foil: it lacks the exactness property and degrades badly
    under over-approximation.
    """
    return _kls_core(y0, _check_increment(y0, delta_a))


def _kls_core(y0: LowRankState, delta_a: np.ndarray) -> LowRankState:
    k = y0.u @ y0.s + delta_a @ y0.v
    u1, s_hat = _qr_fast(k)
    dtu = delta_a.T @ u1
    l = y0.v @ s_hat.T + dtu
    v1, s_bart = _qr_fast(l)
    s1 = s_bart.T - (v1.T @ dtu).T
    return _trusted_state(u1, s1, v1)


def kls_symmetric_step(y0: LowRankState, a0, a_half, a1) -> LowRankState:
    """Symmetrized K, L, S splitting: a KLS half-step followed by a
    half-step of its adjoint (S, L, K order), with the adjacent S-flows
    merged."""
    a0 = _check_increment(y0, a0)
    a_half = _check_increment(y0, a_half)
    a1 = _check_increment(y0, a1)
    return _kls2_core(y0, a0, a_half, a1)


def _kls2_core(y0, a0, a_half, a1) -> LowRankState:
    d_first = a_half - a0
    d_second = a1 - a_half

    k_half = y0.u @ y0.s + d_first @ y0.v
    u_half, s_hat = _qr_fast(k_half)
    l_half = y0.v @ s_hat.T + d_first.T @ u_half
    v_half, s_bart = _qr_fast(l_half)
    # Merged S-flow of both half-steps (same fixed u_half, v_half).
    s_mid = s_bart.T - (u_half.T @ (a1 - a0)) @ v_half
    l1 = v_half @ s_mid.T + d_second.T @ u_half
    v1, s_ct = _qr_fast(l1)
    k1 = u_half @ s_ct.T + d_second @ v1
    u1, s1 = _qr_fast(k1)
    return _trusted_state(u1, s1, v1)


def _core_condition(s: np.ndarray) -> float:
    sig = np.linalg.svd(s, compute_uv=False)
    if sig[-1] == 0.0:
        return np.inf
    return float(sig[0] / sig[-1])


def gauged_rhs(
    y: LowRankState, a_dot, cond_cap: float = 1e12
) -> GaugedDerivative:
    """Right-hand side of the gauged factor system.

    u_dot = (I - U U^T) Adot V S^{-1}, v_dot = (I - V V^T) Adot^T U S^{-T},
    s_dot = U^T Adot V. Requires an invertible core; raises
    SingularCoreError when cond(s) exceeds cond_cap rather than silently
    regularizing.
    """
    a_dot = _check_increment(y, a_dot)
    if _core_condition(y.s) > cond_cap:
        raise SingularCoreError(
            f"core condition number exceeds cap {cond_cap:g}"
        )
    w = a_dot @ y.v
    u_dot = np.linalg.solve(y.s.T, (w - y.u @ (y.u.T @ w)).T).T
    z = a_dot.T @ y.u
    v_dot = np.linalg.solve(y.s, (z - y.v @ (y.v.T @ z)).T).T
    s_dot = y.u.T @ w
    return GaugedDerivative(u_dot, s_dot, v_dot)


def _raw_gauged_rhs(u, s, v, a_dot, cond_cap):
    # Same formulas as gauged_rhs but tolerant of slightly non-orthonormal
    # stage factors arising inside the fixed-point iteration. cond_cap may
    # be None when the caller has already checked the stage core.
    if cond_cap is not None and _core_condition(s) > cond_cap:
        raise SingularCoreError("stage core condition number exceeds cap")
    w = a_dot @ v
    u_dot = np.linalg.solve(s.T, (w - u @ (u.T @ w)).T).T
    z = a_dot.T @ u
    v_dot = np.linalg.solve(s, (z - v @ (v.T @ z)).T).T
    s_dot = u.T @ w
    return u_dot, s_dot, v_dot


def midpoint_step(
    y0: LowRankState,
    path: MatrixPath,
    t0: float,
    h: float,
    tol: float = 1e-12,
    max_iter: int = 100,
    cond_cap: float = 1e12,
    _carry: Optional[list] = None,
) -> LowRankState:
    """Implicit midpoint rule on the gauged factor system, solved by
    fixed-point iteration on the stage value.

    Adot at the interval midpoint comes from the path's analytic derivative
    when available, otherwise from the difference quotient over the step
    (which is centered at the midpoint). Non-convergence or a singular
    stage core raises FixedPointDivergedError. Factors are
    re-orthonormalized after the step.

    _carry is a private one-element scratch list used by integrate to warm
    start the stage iteration with the previous step's converged derivative.
    """
    if path.has_derivative:
        a_dot = path.derivative(t0 + h / 2)
    else:
        a_dot = (path.value(t0 + h) - path.value(t0)) / h
    a_dot = _check_increment(y0, a_dot)

    u0, s0, v0 = y0.u, y0.s, y0.v
    # Warm start: extrapolate the stage derivative from the previous one or
    # two steps; the smooth problems this targets then converge in two to
    # three sweeps instead of four or five.
    prev = _carry[0] if _carry else None
    if prev is not None and prev[0][0].shape == u0.shape:
        d1, d0, dm1 = prev
        if dm1 is not None:
            guess = tuple(
                3.0 * a - 3.0 * b + c for a, b, c in zip(d1, d0, dm1)
            )
        elif d0 is not None:
            guess = tuple(2.0 * a - b for a, b in zip(d1, d0))
        else:
            guess = d1
        u = u0 + (h / 2) * guess[0]
        s = s0 + (h / 2) * guess[1]
        v = v0 + (h / 2) * guess[2]
    else:
        u, s, v = u0, s0, v0
    # The stage core moves O(h) per step, so one condition check per step
    # (on entry, below) is enough to detect breakdown; the divergence guard
    # inside the loop catches anything faster.
    if _core_condition(s0) > cond_cap:
        raise FixedPointDivergedError("core condition number exceeds cap")
    derivs = None
    for _ in range(max_iter):
        try:
            derivs = _raw_gauged_rhs(u, s, v, a_dot, None)
        except np.linalg.LinAlgError as exc:
            raise FixedPointDivergedError(f"singular stage core: {exc}") from exc
        un = u0 + (h / 2) * derivs[0]
        sn = s0 + (h / 2) * derivs[1]
        vn = v0 + (h / 2) * derivs[2]
        diff = np.sqrt(
            np.sum((un - u) ** 2) + np.sum((sn - s) ** 2) + np.sum((vn - v) ** 2)
        )
        u, s, v = un, sn, vn
        if not np.isfinite(diff) or diff > 1e8:
            raise FixedPointDivergedError(
                f"stage iteration diverged (increment {diff:.3e})"
            )
        if diff < tol:
            break
    else:
        raise FixedPointDivergedError(
            f"no convergence in {max_iter} iterations (last increment {diff:.3e})"
        )
    u_dot, s_dot, v_dot = derivs
    if _carry is not None:
        old = _carry[0]
        _carry[0] = (derivs, old[0] if old else None, old[1] if old else None)
    qu, ru = _qr_fast(u0 + h * u_dot)
    qv, rv = _qr_fast(v0 + h * v_dot)
    return _trusted_state(qu, ru @ (s0 + h * s_dot) @ rv.T, qv)


OdeField = Callable[[np.ndarray], np.ndarray]


def ode_ksl_step(y0: LowRankState, f: OdeField, h: float) -> LowRankState:
    """Explicit first-order step for Y' ~ F(Y): one splitting step with the
    Euler-like increment h * F(Y0)."""
    if h <= 0:
        raise ValueError("h must be positive")
    return ksl_step(y0, h * as_matrix(f(assemble(y0)), "F(Y0)"))


def ode_ksl2_step(y0: LowRankState, f: OdeField, h: float) -> LowRankState:
    """Explicit second-order step for Y' ~ F(Y).

    A first-order predictor gives F at the endpoint; the symmetric step is
    then applied to the quadratic interpolant
    A(t0 + theta*h) = Y0 + (h/2) theta (2 - theta) F(Y0)
                         + (h/2) theta^2 F(Y1_pred),
    evaluated in closed form at theta = 1/2 and theta = 1.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    y0_mat = assemble(y0)
    f0 = as_matrix(f(y0_mat), "F(Y0)")
    predictor = ksl_step(y0, h * f0)
    f1 = as_matrix(f(assemble(predictor)), "F(Y1_pred)")
    a_half = y0_mat + (3 * h / 8) * f0 + (h / 8) * f1
    a1 = y0_mat + (h / 2) * f0 + (h / 2) * f1
    return ksl_symmetric_step(y0, y0_mat, a_half, a1)


@dataclass
class IntegrationResult:
    """Final state plus a status record; midpoint failures are recorded
    here rather than raised."""

    state: LowRankState
    status: str  # "ok" or "diverged"
    steps_completed: int
    failed_at: Optional[float] = None
    message: str = ""


Observer = Callable[[float, LowRankState], None]


def integrate(
    scheme: SchemeId,
    y0: LowRankState,
    path: MatrixPath,
    t0: float,
    t_end: float,
    h: float,
    observer: Optional[Observer] = None,
) -> IntegrationResult:
    """Step the chosen scheme uniformly from t0 to t_end.

    (t_end - t0)/h must be an integer to 1e-9. The observer, if given, is
    called with (t_n, Y_n) after every completed step. A midpoint breakdown
    stops the integration and is reported in the result status; splitting
    schemes do not fail.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    n_float = (t_end - t0) / h
    n_steps = round(n_float)
    if abs(n_float - n_steps) > 1e-9:
        raise ValueError(f"(t_end - t0)/h = {n_float} is not an integer")
    if tuple(path.shape) != y0.shape:
        raise DimensionError(
            f"path shape {path.shape} does not match state {y0.shape}"
        )

    y = y0
    carry = [None]
    for i in range(n_steps):
        t = t0 + i * h
        t_next = t0 + (i + 1) * h
        t_mid = t0 + (i + 0.5) * h
        try:
            if scheme is SchemeId.KSL:
                y = _ksl_core(y, path.value(t_next) - path.value(t))
            elif scheme is SchemeId.KLS:
                y = _kls_core(y, path.value(t_next) - path.value(t))
            elif scheme is SchemeId.KSL2:
                y = _ksl2_core(
                    y, path.value(t), path.value(t_mid), path.value(t_next)
                )
            elif scheme is SchemeId.KLS2:
                y = _kls2_core(
                    y, path.value(t), path.value(t_mid), path.value(t_next)
                )
            elif scheme is SchemeId.MIDPOINT:
                y = midpoint_step(y, path, t, h, _carry=carry)
            else:
                raise ValueError(f"unknown scheme {scheme}")
        except FixedPointDivergedError as exc:
            return IntegrationResult(
                state=y,
                status="diverged",
                steps_completed=i,
                failed_at=t,
                message=str(exc),
            )
        if observer is not None:
            observer(t_next, y)
    return IntegrationResult(state=y, status="ok", steps_completed=n_steps)
