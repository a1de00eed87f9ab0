"""Fixed-rank state Y = U S V^T, tangent projector, rank changes, retraction.

The core matrix s is a general r x r matrix and is never assumed (or
required to be) invertible; singular cores are a deliberately supported
regime. States are immutable values after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .kernels import DimensionError, as_matrix, frobenius_norm, svd, thin_qr

#: Orthonormality drift beyond which factors are re-orthonormalized on
#: construction, with the correction absorbed into s.
ORTHONORMALITY_TOL = 1e-11


@dataclass
class LowRankState:
    """Factored rank-r matrix Y = u @ s @ v.T.

    u (m x r) and v (n x r) have orthonormal columns; s (r x r) is a
    general small matrix, possibly singular. If the supplied factors have
    drifted from orthonormality beyond ORTHONORMALITY_TOL they are repaired
    by thin QR and the triangular corrections are folded into s.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = as_matrix(self.u, "u")
        s = as_matrix(self.s, "s")
        v = as_matrix(self.v, "v")
        r = u.shape[1]
        if s.shape != (r, r) or v.shape[1] != r:
            raise DimensionError(
                f"inconsistent factor shapes {u.shape}, {s.shape}, {v.shape}"
            )
        if r > min(u.shape[0], v.shape[0]):
            raise DimensionError("rank exceeds matrix dimensions")
        eye = np.eye(r)
        if np.linalg.norm(u.T @ u - eye) > ORTHONORMALITY_TOL:
            fu = thin_qr(u)
            u, s = fu.q, fu.r_factor @ s
        if np.linalg.norm(v.T @ v - eye) > ORTHONORMALITY_TOL:
            fv = thin_qr(v)
            v, s = fv.q, s @ fv.r_factor.T
        self.u, self.s, self.v = u, s, v

    @property
    def shape(self) -> tuple[int, int]:
        return (self.u.shape[0], self.v.shape[0])

    @property
    def rank(self) -> int:
        return self.u.shape[1]


def _trusted_state(u: np.ndarray, s: np.ndarray, v: np.ndarray) -> LowRankState:
    # Fast internal constructor for factors that are orthonormal by
    # construction (thin QR output); skips validation in hot loops.
    y = object.__new__(LowRankState)
    y.u, y.s, y.v = u, s, v
    return y


@dataclass(frozen=True)
class RankChangeReport:
    """Outcome of a rank change; discarded_weight is the Frobenius norm of
    the truncated part (zero for increases)."""

    old_rank: int
    new_rank: int
    discarded_weight: float


def assemble(y: LowRankState) -> np.ndarray:
    """Dense m x n matrix U S V^T."""
    return y.u @ y.s @ y.v.T


def truncate_to_rank(a, r: int) -> LowRankState:
    """Best Frobenius rank-r approximation of a, via SVD truncation."""
    a = as_matrix(a)
    if not 1 <= r <= min(a.shape):
        raise DimensionError(f"rank {r} invalid for shape {a.shape}")
    d = svd(a)
    return LowRankState(d.u[:, :r], np.diag(d.sigma[:r]), d.v[:, :r])


def tangent_project(y: LowRankState, z) -> np.ndarray:
    """Orthogonal projection of z onto the tangent space of the rank-r
    manifold at y: Z V V^T - U U^T Z V V^T + U U^T Z."""
    z = as_matrix(z, "z")
    if z.shape != y.shape:
        raise DimensionError(f"z has shape {z.shape}, expected {y.shape}")
    zv = z @ y.v
    utz = y.u.T @ z
    return zv @ y.v.T + y.u @ utz - y.u @ (y.u.T @ zv) @ y.v.T


def increase_rank(y: LowRankState, r_new: int, seed: int = 0) -> LowRankState:
    """Pad u, v with orthonormal complements and s with zero blocks.

    The assembled matrix is unchanged; the new core is singular by
    construction, which downstream integrators handle. The complement is a
    seeded Gaussian block orthonormalized against the existing columns, so
    the result is deterministic for a given seed.
    """
    m, n = y.shape
    r = y.rank
    if not r <= r_new <= min(m, n):
        raise DimensionError(f"cannot raise rank {r} to {r_new} in {m}x{n}")
    if r_new == r:
        return LowRankState(y.u, y.s, y.v)
    rng = np.random.default_rng(seed)
    k = r_new - r
    u_new = thin_qr(np.hstack([y.u, rng.standard_normal((m, k))])).q
    v_new = thin_qr(np.hstack([y.v, rng.standard_normal((n, k))])).q
    s_new = np.zeros((r_new, r_new))
    s_new[:r, :r] = y.s
    return LowRankState(u_new, s_new, v_new)


def decrease_rank(y: LowRankState, r_new: int) -> tuple[LowRankState, RankChangeReport]:
    """Truncate to a lower rank via an SVD of the small core s.

    Rotations are absorbed into u and v; the report records the Frobenius
    norm of the dropped singular values.
    """
    r = y.rank
    if not 1 <= r_new < r:
        raise DimensionError(f"r_new must be in [1, {r - 1}], got {r_new}")
    d = svd(y.s)
    discarded = float(np.sqrt(np.sum(d.sigma[r_new:] ** 2)))
    state = LowRankState(
        y.u @ d.u[:, :r_new], np.diag(d.sigma[:r_new]), y.v @ d.v[:, :r_new]
    )
    return state, RankChangeReport(r, r_new, discarded)


def retract(y: LowRankState, delta) -> LowRankState:
    """Map the ambient increment delta back onto the rank-r manifold by one
    projector-splitting step applied to Y + t*delta at t = 1."""
    from .integrators import ksl_step

    return ksl_step(y, delta)


def save_state(y: LowRankState, stream: TextIO) -> None:
    """Write a state as a plain-text container with 17 significant digits."""
    m, n = y.shape
    stream.write(f"lowrank-state {m} {n} {y.rank}\n")
    for block in (y.u, y.s, y.v):
        for row in block:
            stream.write(" ".join(f"{x:.17e}" for x in row) + "\n")


def load_state(stream: TextIO) -> LowRankState:
    """Inverse of save_state; round-trips float64 values exactly."""
    header = stream.readline().split()
    if len(header) != 4 or header[0] != "lowrank-state":
        raise ValueError("not a lowrank-state container")
    m, n, r = (int(x) for x in header[1:])

    def read_block(rows: int) -> np.ndarray:
        data = [
            [float(x) for x in stream.readline().split()] for _ in range(rows)
        ]
        return np.array(data).reshape(rows, r)

    return LowRankState(read_block(m), read_block(r), read_block(n))
