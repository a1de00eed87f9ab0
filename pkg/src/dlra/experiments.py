"""Benchmark harness: problem generation, error curves, order estimation.

The test problem is A(t) = Q1(t) (A1 + e^t A2) Q2(t) with orthogonal
flows Q_i(t) = exp(t T_i) driven by random skew-symmetric generators.
A1, A2 carry a rank-core_rank leading block plus a uniform [0, eps]
perturbation, so for small eps the path is close to rank core_rank and
rank > core_rank runs probe the over-approximation regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .integrators import SchemeId, integrate
from .kernels import OrthogonalFlow
from .paths import MatrixPath
from .state import assemble, truncate_to_rank


@dataclass(frozen=True)
class ProblemSpec:
    """Parameters of the benchmark problem generator.

    The RNG stream order is a contract (reproducibility depends on it):
    leading block of A1, leading block of A2, perturbation of A1,
    perturbation of A2, generator T1, generator T2.
    """

    m: int = 100
    n: int = 100
    core_rank: int = 10
    eps: float = 1e-3
    seed: int = 0
    t_end: float = 1.0

    def __post_init__(self):
        if not 1 <= self.core_rank <= min(self.m, self.n):
            raise ValueError("core_rank must be in [1, min(m, n)]")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")


def _draw_matrices(spec: ProblemSpec):
    rng = np.random.default_rng(spec.seed)
    k = spec.core_rank

    block1 = np.eye(k) + rng.uniform(0.0, 0.5, (k, k))
    block2 = np.eye(k) + rng.uniform(0.0, 0.5, (k, k))
    a1 = np.zeros((spec.m, spec.n))
    a1[:k, :k] = block1
    a2 = np.zeros((spec.m, spec.n))
    a2[:k, :k] = block2
    a1 = a1 + rng.uniform(0.0, spec.eps, (spec.m, spec.n))
    a2 = a2 + rng.uniform(0.0, spec.eps, (spec.m, spec.n))

    g1 = rng.uniform(-0.5, 0.5, (spec.m, spec.m))
    t1 = (g1 - g1.T) / 2
    g2 = rng.uniform(-0.5, 0.5, (spec.n, spec.n))
    t2 = (g2 - g2.T) / 2
    return a1, a2, t1, t2


def generate_problem(
    spec: ProblemSpec, value_cache_bytes: int = 512 * 2**20
) -> MatrixPath:
    """Build the benchmark path with its analytic derivative.

    Deterministic for a given seed. The returned path carries the drawn
    matrices as attributes (a1, a2, t1, t2) for inspection. Evaluated
    values are cached up to value_cache_bytes; convergence studies re-query
    the same nodes across runs (coarse grids nest inside fine ones), so a
    generous cache pays for itself many times over.
    """
    a1, a2, t1, t2 = _draw_matrices(spec)
    flow1 = OrthogonalFlow(t1)
    flow2 = OrthogonalFlow(t2)
    # Work with rotated-frame pairs X(t) = Q1(t) X0 Q2(t). Every such pair
    # satisfies X(t + d) = exp(d T1) X(t) exp(d T2) (the generators commute
    # with their own flows), so on the uniform grids used by the integrators
    # each evaluation is two stacked products with cached step matrices.
    # A periodic fresh evaluation removes accumulated roundoff.
    def _make_chain(fresh):
        chain = {"t": None, "pair": None, "spare": None, "tmp": None, "links": 0}

        def parts(t: float) -> np.ndarray:
            if t == chain["t"]:
                return chain["pair"]
            dt = 0.0 if chain["t"] is None else t - chain["t"]
            if chain["t"] is not None and dt > 0 and chain["links"] < 512:
                e1 = flow1.increment(dt)
                e2 = flow2.increment(dt)
                # Rotate through preallocated buffers; callers copy what
                # they keep.
                if chain["spare"] is None:
                    chain["spare"] = np.empty_like(chain["pair"])
                    chain["tmp"] = np.empty_like(chain["pair"])
                np.matmul(chain["pair"], e2, out=chain["tmp"])
                pair = np.matmul(e1, chain["tmp"], out=chain["spare"])
                chain["spare"] = chain["pair"]
                chain["links"] += 1
            else:
                pair = fresh(flow1(t), flow2(t))
                chain["spare"] = None
                chain["links"] = 0
            chain["t"], chain["pair"] = t, pair
            return pair

        return parts

    # Value representation: A = B + e^t C with B = Q1 a1 Q2, C = Q1 a2 Q2.
    _parts = _make_chain(
        lambda q1, q2: np.stack([q1 @ (a1 @ q2), q1 @ (a2 @ q2)])
    )

    # Derivative representation: dA/dt = T1 A + A T2 + e^t C, regrouped as
    # X + e^t Y with X = T1 B + B T2 and Y = T1 C + C T2 + C; both chain.
    def _fresh_deriv(q1, q2):
        b = q1 @ (a1 @ q2)
        c = q1 @ (a2 @ q2)
        return np.stack([t1 @ b + b @ t2, t1 @ c + c @ t2 + c])

    _dparts = _make_chain(_fresh_deriv)

    # Two-tier value cache: a grow-only store up to the byte budget (node
    # grids of convergence studies nest, so replays are pure hits), plus a
    # small FIFO ring so the step-endpoint re-query pattern stays cheap
    # after the store fills up. Each stored node keeps A(t) and the rotated
    # second part C(t) = Q1 a2 Q2, which also serves the derivative below.
    store_cap = max(8, int(value_cache_bytes) // (16 * spec.m * spec.n))
    store: dict[float, np.ndarray] = {}
    c_store: dict[float, np.ndarray] = {}
    recent: dict[float, np.ndarray] = {}

    def value(t: float) -> np.ndarray:
        # Canonical node key: nested step grids produce the same physical
        # time with ulp-level differences (i*h vs 2i*h/2); rounding merges
        # them, at a time error far below any tolerance used here.
        t = round(t, 12)
        cached = store.get(t)
        if cached is None:
            cached = recent.get(t)
        if cached is not None:
            return cached
        pair = _parts(t)
        a_t = pair[0] + math.exp(t) * pair[1]
        if len(store) < store_cap:
            store[t] = a_t
            c_store[t] = pair[1].copy()
        else:
            if len(recent) >= 8:
                recent.pop(next(iter(recent)))
            recent[t] = a_t
        return a_t

    def derivative(t: float) -> np.ndarray:
        # dA/dt = T1 A + A T2 + e^t C; when A and C sit in the value store
        # this costs two products, else fall back to the chained (X, Y)
        # representation.
        key = round(t, 12)
        a_t = store.get(key)
        if a_t is not None:
            c = c_store[key]
            return t1 @ a_t + a_t @ t2 + math.exp(key) * c
        pair = _dparts(t)
        return pair[0] + math.exp(t) * pair[1]

    path = MatrixPath(value, (spec.m, spec.n), derivative)
    path.a1, path.a2, path.t1, path.t2 = a1, a2, t1, t2
    return path


@dataclass
class ErrorSeries:
    """Per-node errors of one scheme against A(t) and against the best
    rank-r approximation; the latter is a lower bound for the former."""

    scheme: SchemeId
    rank: int
    h: float
    times: np.ndarray
    errors: np.ndarray
    best_errors: np.ndarray
    ok: np.ndarray  # per-node flags; False from the first failed step on
    status: str  # "ok" or "diverged"

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])


def _best_rank_error(a: np.ndarray, rank: int) -> float:
    sigma = np.linalg.svd(a, compute_uv=False)
    return float(np.sqrt(np.sum(sigma[rank:] ** 2)))


def run_error_series(
    scheme: SchemeId,
    spec: ProblemSpec,
    rank: int,
    h: float,
    path: Optional[MatrixPath] = None,
) -> ErrorSeries:
    """Integrate over [0, t_end] from the truncated SVD of A(0), recording
    both error curves at every step node.

    Failures are recorded in the series, never raised; after a midpoint
    breakdown the state is frozen and remaining nodes are flagged.
    A precomputed path may be passed to share its caches; it must come
    from the same spec.
    """
    if path is None:
        path = generate_problem(spec)
    n_steps = round(spec.t_end / h)
    if abs(spec.t_end / h - n_steps) > 1e-9:
        raise ValueError(f"h = {h} does not divide t_end = {spec.t_end}")

    times = np.array([i * h for i in range(n_steps + 1)])
    errors = np.full(n_steps + 1, np.nan)
    best_errors = np.zeros(n_steps + 1)
    ok = np.zeros(n_steps + 1, dtype=bool)

    a0 = path.value(0.0)
    y = truncate_to_rank(a0, rank)
    errors[0] = np.linalg.norm(assemble(y) - a0)
    best_errors[0] = _best_rank_error(a0, rank)
    ok[0] = True

    node = {"i": 0}

    def observer(t, state):
        node["i"] += 1
        i = node["i"]
        a_t = path.value(t)
        errors[i] = np.linalg.norm(assemble(state) - a_t)
        best_errors[i] = _best_rank_error(a_t, rank)
        ok[i] = True

    result = integrate(scheme, y, path, 0.0, spec.t_end, h, observer)
    if result.status != "ok":
        # Flag remaining nodes, keeping the best-rank reference curve.
        for i in range(node["i"] + 1, n_steps + 1):
            best_errors[i] = _best_rank_error(path.value(times[i]), rank)
    return ErrorSeries(
        scheme=scheme,
        rank=rank,
        h=h,
        times=times,
        errors=errors,
        best_errors=best_errors,
        ok=ok,
        status=result.status,
    )


@dataclass
class OrderEstimate:
    """Runge-rule order estimate from runs at h, h/2 and h/4."""

    scheme: SchemeId
    p: Optional[float]
    stepsizes: tuple[float, float, float]
    errors: tuple[float, float, float]  # final error vs A(t_end) per run
    final_error: float  # at the base stepsize
    status: str  # "ok" or "failed"


def runge_exponent(diff_coarse: float, diff_fine: float) -> Optional[float]:
    """p with ||y(h) - y(h/2)|| / ||y(h/2) - y(h/4)|| ~ 2^p; None when a
    difference norm is degenerate."""
    if diff_coarse <= 0 or diff_fine <= 0:
        return None
    return float(np.log2(diff_coarse / diff_fine))


def estimate_order(
    scheme: SchemeId,
    spec: ProblemSpec,
    rank: int,
    h: float,
    path: Optional[MatrixPath] = None,
) -> OrderEstimate:
    """Run the scheme at h, h/2, h/4 from identical initial data and apply
    the Runge rule on the assembled final matrices."""
    if path is None:
        path = generate_problem(spec)
    y0 = truncate_to_rank(path.value(0.0), rank)
    a_end = path.value(spec.t_end)

    finals = []
    errors = []
    stepsizes = (h, h / 2, h / 4)
    for hk in stepsizes:
        n_steps = round(spec.t_end / hk)
        if abs(spec.t_end / hk - n_steps) > 1e-9:
            raise ValueError(f"stepsize {hk} does not divide t_end")
        result = integrate(scheme, y0, path, 0.0, spec.t_end, hk)
        if result.status != "ok":
            return OrderEstimate(
                scheme=scheme,
                p=None,
                stepsizes=stepsizes,
                errors=tuple(errors + [np.nan] * (3 - len(errors))),
                final_error=np.nan,
                status="failed",
            )
        mat = assemble(result.state)
        finals.append(mat)
        errors.append(float(np.linalg.norm(mat - a_end)))

    d1 = float(np.linalg.norm(finals[0] - finals[1]))
    d2 = float(np.linalg.norm(finals[1] - finals[2]))
    return OrderEstimate(
        scheme=scheme,
        p=runge_exponent(d1, d2),
        stepsizes=stepsizes,
        errors=tuple(errors),
        final_error=errors[0],
        status="ok",
    )


@dataclass
class SweepCell:
    """Final-time error of one (scheme, stepsize) pair."""

    scheme: SchemeId
    h: float  # requested stepsize
    h_effective: float  # adjusted so an integer number of steps reaches t_end
    final_error: float
    status: str


def sweep_stepsizes(
    schemes: Sequence[SchemeId],
    spec: ProblemSpec,
    rank: int,
    stepsizes: Sequence[float],
    path: Optional[MatrixPath] = None,
) -> list[SweepCell]:
    """Final-time error per (scheme, h), for the stability-versus-stepsize
    plot. Stepsizes that do not divide t_end are nudged to the nearest
    value that does. Cells are ordered by (scheme, h) as given."""
    if path is None:
        path = generate_problem(spec)
    y0 = truncate_to_rank(path.value(0.0), rank)
    a_end = path.value(spec.t_end)

    cells = []
    for scheme in schemes:
        for h in stepsizes:
            n_steps = max(1, round(spec.t_end / h))
            h_eff = spec.t_end / n_steps
            result = integrate(scheme, y0, path, 0.0, spec.t_end, h_eff)
            if result.status == "ok":
                err = float(np.linalg.norm(assemble(result.state) - a_end))
            else:
                err = np.nan
            cells.append(
                SweepCell(
                    scheme=scheme,
                    h=h,
                    h_effective=h_eff,
                    final_error=err,
                    status=result.status,
                )
            )
    return cells
