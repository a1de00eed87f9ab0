"""Dense linear-algebra kernels: thin QR, SVD, norms, and orthogonal flows.

Everything here is a pure function of its inputs (safe to call from any
thread) and deterministic for identical input bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Operand dimensions are incompatible with the requested operation."""


class NonFiniteError(ValueError):
    """Input contains NaN or Inf entries."""


class SkewSymmetryError(ValueError):
    """Generator is not skew-symmetric within tolerance."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d float array.

    Raises NonFiniteError on NaN/Inf and DimensionError if not 2-d.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-d, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFiniteError(f"{name} contains non-finite entries")
    return a


def frobenius_norm(a) -> float:
    """Frobenius norm, the geometry underlying all error measures here."""
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


@dataclass(frozen=True)
class ThinFactorization:
    """Thin QR factors: q has orthonormal columns, r_factor is upper
    triangular with nonnegative diagonal (sign convention for determinism)."""

    q: np.ndarray
    r_factor: np.ndarray


def _qr_nonneg(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Unvalidated core of thin_qr, for hot loops whose inputs are finite
    # by construction (arithmetic on already-validated matrices).
    q, r = np.linalg.qr(a)
    # Flip column/row pairs so diag(r) >= 0; sign(0) stays +1.
    signs = np.where(np.diagonal(r) < 0.0, -1.0, 1.0)
    return q * signs, r * signs[:, None]


try:
    # Same LAPACK factorization as np.linalg.qr (verified bit-identical on
    # this BLAS) with lower call overhead; used by the integrator cores,
    # where the diagonal sign gauge of R cancels in assembled results.
    from scipy.linalg import qr as _scipy_qr

    def _qr_fast(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _scipy_qr(a, mode="economic", check_finite=False)

except ImportError:  # scipy is an optional accelerator, not a dependency
    _qr_fast = np.linalg.qr


def thin_qr(a) -> ThinFactorization:
    """Thin QR factorization with the nonnegative-diagonal convention.

    Requires rows >= cols. Rank-deficient input is legal: Householder QR
    still produces orthonormal q; r_factor then has zero diagonal entries.
    """
    a = as_matrix(a, "thin_qr input")
    m, n = a.shape
    if m < n:
        raise DimensionError(f"thin_qr needs rows >= cols, got {m}x{n}")
    q, r = _qr_nonneg(a)
    return ThinFactorization(q, r)


@dataclass(frozen=True)
class SvdResult:
    """Compact SVD: u, v with orthonormal columns, sigma nonincreasing."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def svd(a) -> SvdResult:
    """Compact singular value decomposition a = u @ diag(sigma) @ v.T.

    Truncating to the leading k triples gives a best rank-k approximation
    in the Frobenius norm.
    """
    a = as_matrix(a, "svd input")
    u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    return SvdResult(u, sigma, vt.T)


def _check_skew(generator: np.ndarray, tol: float) -> None:
    drift = np.linalg.norm(generator + generator.T)
    scale = max(1.0, np.linalg.norm(generator))
    if drift > tol * scale:
        raise SkewSymmetryError(
            f"generator not skew-symmetric: ||T + T^T|| = {drift:.3e}"
        )


class OrthogonalFlow:
    """Evaluator for Q(t) = exp(t*T) with a constant skew-symmetric T.

    Diagonalizes iT (Hermitian) once, so each evaluation costs two complex
    products. Repeated monotone queries are accelerated by chaining with a
    cached increment matrix exp(d*T); the one-parameter group property makes
    this exact, and a periodic QR polish removes accumulated roundoff.
    """

    _POLISH_EVERY = 512
    _MAX_STEP_CACHE = 32

    def __init__(self, generator, skew_tol: float = 1e-13):
        generator = as_matrix(generator, "generator")
        n, n2 = generator.shape
        if n != n2:
            raise DimensionError("generator must be square")
        _check_skew(generator, skew_tol)
        self.generator = generator
        # iT is Hermitian: T = W diag(-i w) W^H with real w.
        w, vecs = np.linalg.eigh(1j * generator)
        self._eigvals = w
        self._eigvecs = vecs
        self._step_cache: dict[float, np.ndarray] = {}
        self._last_t = 0.0
        self._last_q = np.eye(n)
        self._chain = 0

    def increment(self, dt: float) -> np.ndarray:
        """Step matrix exp(dt*T), cached for reuse across uniform grids."""
        key = round(float(dt), 15)
        step = self._step_cache.get(key)
        if step is None:
            step = self._direct(key)
            if len(self._step_cache) < self._MAX_STEP_CACHE:
                self._step_cache[key] = step
        return step

    def _direct(self, t: float) -> np.ndarray:
        phase = np.exp(-1j * t * self._eigvals)
        q = (self._eigvecs * phase) @ self._eigvecs.conj().T
        # .real is a strided view; downstream products need contiguous data.
        return np.ascontiguousarray(q.real)

    def _polish(self, q: np.ndarray) -> np.ndarray:
        f = thin_qr(q)
        return f.q

    def __call__(self, t: float) -> np.ndarray:
        t = float(t)
        if t == self._last_t:
            return self._last_q
        dt = t - self._last_t
        # Quantize the increment key so ulp-level jitter in t-grids (i*h vs.
        # accumulated differences) reuses one cached exp(dt*T); the induced
        # time error is ~1e-15 per chain link, far below solver tolerances.
        key = round(dt, 15)
        if key > 0 and (key in self._step_cache or len(self._step_cache) < self._MAX_STEP_CACHE):
            step = self._step_cache.get(key)
            if step is None:
                step = self._direct(key)
                self._step_cache[key] = step
            q = step @ self._last_q
            self._chain += 1
            if self._chain % self._POLISH_EVERY == 0:
                q = self._polish(q)
        else:
            q = self._direct(t)
            self._chain = 0
        self._last_t = t
        self._last_q = q
        return q


def skew_orthogonal_path(t: float, generator, q0, skew_tol: float = 1e-13) -> np.ndarray:
    """Closed-form solution exp(t*generator) @ q0 of Q' = T Q, Q(0) = q0.

    generator must be skew-symmetric (to skew_tol) and q0 orthogonal to
    1e-12, so the result is orthogonal up to roundoff; a final QR polish is
    applied if the drift exceeds 1e-11.
    """
    q0 = as_matrix(q0, "q0")
    n = q0.shape[0]
    if np.linalg.norm(q0.T @ q0 - np.eye(q0.shape[1])) > 1e-12:
        raise ValueError("q0 is not orthogonal to 1e-12")
    flow = OrthogonalFlow(generator, skew_tol=skew_tol)
    if flow.generator.shape[0] != n:
        raise DimensionError("generator and q0 dimensions differ")
    q = flow._direct(float(t)) @ q0
    if np.linalg.norm(q.T @ q - np.eye(q.shape[1])) > 1e-11:
        q = thin_qr(q).q
    return q
