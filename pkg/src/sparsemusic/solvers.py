"""Complex basis pursuit denoising and orthogonal matching pursuit.

The BPDN solver minimizes the l1 norm subject to an l2 residual ball, in
complex arithmetic, with a first-order primal-dual splitting: both proximal
maps (complex soft threshold, residual-ball projection via its conjugate)
are closed form, and the step sizes are rebalanced adaptively from the
primal and dual residuals.  OMP is the greedy baseline with deterministic
tie breaking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .scene import _freeze

__all__ = [
    "SparseProblem",
    "SparseSolution",
    "BpdnConstants",
    "normalize_columns",
    "bpdn_solve",
    "omp_solve",
    "bpdn_error_constants",
    "best_sparse_approximation",
    "verify_bpdn_bound",
    "problem_to_json",
    "problem_from_json",
    "solution_to_json",
    "solution_from_json",
]

SUPPORT_FLOOR = 1e-6            # reporting floor relative to the largest entry
_FEAS_SLACK = 1e-6


@dataclass(frozen=True)
class SparseProblem:
    """One-column sparse recovery problem with unit-norm dictionary."""

    matrix: np.ndarray      # (n, N) complex, unit columns
    data: np.ndarray        # (n,) complex
    epsilon: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=np.complex128)
        y = np.asarray(self.data, dtype=np.complex128).ravel()
        if a.ndim != 2 or a.shape[0] != y.size:
            raise ValueError("matrix/data shape mismatch")
        norms = np.linalg.norm(a, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("dictionary columns must have unit norm (see normalize_columns)")
        if self.epsilon < 0:
            raise ValueError("feasibility radius must be nonnegative")
        object.__setattr__(self, "matrix", _freeze(a))
        object.__setattr__(self, "data", _freeze(y))


@dataclass(frozen=True)
class SparseSolution:
    """Solver output: iterate, objective, residual and reported support."""

    z: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    support: np.ndarray
    tie_broken: bool = False

    def __post_init__(self):
        object.__setattr__(self, "z", _freeze(np.asarray(self.z, dtype=np.complex128)))
        object.__setattr__(self, "support", _freeze(np.asarray(self.support, dtype=np.int64)))


@dataclass(frozen=True)
class BpdnConstants:
    """Error-bound constants; defined only when the isometry condition holds."""

    c1: float | None
    c2: float | None
    condition_value: float
    condition_met: bool


def normalize_columns(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (unit-column matrix, original column norms)."""
    a = np.asarray(a, dtype=np.complex128)
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms == 0):
        raise ValueError("matrix has a zero column")
    return a / norms, norms


def _soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    # complex shrinkage: scales magnitudes, preserves phases
    mag = np.abs(z)
    scale = np.maximum(mag - t, 0.0)
    return np.where(mag > 0, z * (scale / np.where(mag > 0, mag, 1.0)), 0.0)


def _operator_norm(a: np.ndarray, iters: int = 80) -> float:
    if min(a.shape) <= 128:
        return float(np.linalg.norm(a, 2))
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    ah = a.conj().T
    est = 0.0
    for _ in range(iters):
        w = ah @ (a @ v)
        est = np.linalg.norm(w)
        if est == 0:
            return 0.0
        v = w / est
    return float(np.sqrt(est)) * 1.02     # safety margin over the power estimate


def _reported_support(z: np.ndarray) -> np.ndarray:
    peak = np.abs(z).max() if z.size else 0.0
    if peak == 0:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero(np.abs(z) > SUPPORT_FLOOR * peak)


def bpdn_solve(problem: SparseProblem, *, tol: float = 1e-8, max_iters: int = 50_000,
               x0: np.ndarray | None = None, check_every: int = 20,
               adaptive: bool = True, support_exit: int | None = None,
               support_patience: int = 5) -> SparseSolution:
    """Minimize the l1 norm subject to an l2 residual ball.

    Primal-dual iteration with step product fixed below the stability limit;
    adaptive rebalancing keeps the primal and dual residuals comparable.
    Converged means both residuals fell below ``tol`` (relative) and the
    iterate is feasible within a small slack.

    ``support_exit`` is a Monte Carlo convenience: when the set of that many
    largest entries is unchanged for ``support_patience`` consecutive checks
    and the iterate is feasible, iteration stops early (flagged not
    converged; the support is what sweep scoring consumes).
    """
    a, y, eps = problem.matrix, problem.data, problem.epsilon
    n, big_n = a.shape
    ah = np.ascontiguousarray(a.conj().T)
    lip = _operator_norm(a)
    if lip == 0:
        z = np.zeros(big_n, dtype=np.complex128)
        return SparseSolution(z=z, objective=0.0, residual=float(np.linalg.norm(y)),
                              iterations=0, converged=bool(np.linalg.norm(y) <= eps + _FEAS_SLACK),
                              support=_reported_support(z))
    tau = sigma = 0.99 / lip
    z = np.zeros(big_n, dtype=np.complex128) if x0 is None else np.asarray(x0, dtype=np.complex128).copy()
    w = np.zeros(n, dtype=np.complex128)
    zbar = z.copy()
    ah_w = ah @ w
    adapt_step = 0.5
    feas_scale = max(1.0, float(np.linalg.norm(y)))
    last_support = None
    stable_checks = 0
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        u = w + sigma * (a @ zbar)
        v = u - sigma * y
        if eps > 0:
            nv = np.linalg.norm(v)
            w_new = v * max(0.0, 1.0 - sigma * eps / nv) if nv > 0 else np.zeros_like(v)
        else:
            w_new = v
        ah_w_new = ah @ w_new
        z_new = _soft_threshold(z - tau * ah_w_new, tau)
        zbar = 2.0 * z_new - z
        if it % check_every == 0 or it == max_iters:
            p_res = np.linalg.norm((z - z_new) / tau - (ah_w - ah_w_new))
            d_res = np.linalg.norm((w - w_new) / sigma - a @ (z - z_new))
            p_rel = p_res / max(1.0, np.linalg.norm(z_new))
            d_rel = d_res / max(1.0, np.linalg.norm(w_new))
            resid = float(np.linalg.norm(a @ z_new - y))
            feasible = resid <= eps * (1.0 + _FEAS_SLACK) + _FEAS_SLACK * feas_scale
            if p_rel < tol and d_rel < tol and feasible:
                z, w, ah_w = z_new, w_new, ah_w_new
                converged = True
                break
            if support_exit is not None and feasible:
                top = frozenset(np.argsort(-np.abs(z_new), kind="stable")[:support_exit].tolist())
                if top == last_support:
                    stable_checks += 1
                    if stable_checks >= support_patience:
                        z, w, ah_w = z_new, w_new, ah_w_new
                        break
                else:
                    stable_checks = 0
                    last_support = top
            if adaptive and adapt_step > 1e-3:
                # bounded residual balancing, keeping tau*sigma fixed
                if p_rel > 10.0 * d_rel:
                    tau /= 1.0 - adapt_step
                    sigma *= 1.0 - adapt_step
                    adapt_step *= 0.9
                elif d_rel > 10.0 * p_rel:
                    tau *= 1.0 - adapt_step
                    sigma /= 1.0 - adapt_step
                    adapt_step *= 0.9
        z, w, ah_w = z_new, w_new, ah_w_new
    residual = float(np.linalg.norm(a @ z - y))
    return SparseSolution(z=z, objective=float(np.abs(z).sum()), residual=residual,
                          iterations=it, converged=converged, support=_reported_support(z))


def omp_solve(problem: SparseProblem, s: int) -> SparseSolution:
    """Greedy support selection with orthogonal re-projection each step.

    Runs ``s`` steps or stops once the residual enters the feasibility ball.
    Correlation ties are broken toward the lowest column index and flagged.
    """
    a, y, eps = problem.matrix, problem.data, problem.epsilon
    if not (0 < s <= a.shape[0]):
        raise ValueError("target sparsity must lie in [1, n]")
    chosen: list[int] = []
    r = y.copy()
    tie = False
    coeffs = np.empty(0, dtype=np.complex128)
    for _ in range(s):
        if np.linalg.norm(r) <= eps:
            break
        corr = np.abs(a.conj().T @ r)
        corr[chosen] = -1.0
        k = int(np.argmax(corr))
        if np.count_nonzero(corr == corr[k]) > 1:
            tie = True
        chosen.append(k)
        sub = a[:, chosen]
        coeffs, *_ = np.linalg.lstsq(sub, y, rcond=None)
        r = y - sub @ coeffs
    z = np.zeros(a.shape[1], dtype=np.complex128)
    if chosen:
        z[chosen] = coeffs
    residual = float(np.linalg.norm(r))
    return SparseSolution(z=z, objective=float(np.abs(z).sum()), residual=residual,
                          iterations=len(chosen), converged=True,
                          support=np.sort(np.asarray(chosen, dtype=np.int64)),
                          tie_broken=tie)


def omp_guarantee(mu: float, s: int, noise_to_min: float) -> tuple[float, bool]:
    """Greedy exact-support guarantee margin.

    Support recovery by matching pursuit is guaranteed when the noise over
    the smallest nonzero component stays below ``1/2 + mu (1/2 - s)``; the
    margin is positive only for ``s < 1/2 + 1/(2 mu)``.  Returns the margin
    and whether the guarantee applies.
    """
    margin = 0.5 + mu * (0.5 - s)
    return margin, bool(noise_to_min <= margin and margin > 0)


_SQ2H = math.sqrt(2.0) / 2.0


def bpdn_error_constants(delta_plus_2s, delta_minus_2s: float | None = None) -> BpdnConstants:
    """Error-bound constants from the order-2s isometry constants.

    The bound applies when ``(sqrt2/2) d+ + (sqrt2/2 + 1) d- < 1``; the
    constants are undefined (None) otherwise.  Accepts a
    :class:`~sparsemusic.analysis.RicEstimate` or the two constants.
    """
    if delta_minus_2s is None:
        est = delta_plus_2s
        delta_plus_2s, delta_minus_2s = est.delta_plus, est.delta_minus
    dp, dm = float(delta_plus_2s), float(delta_minus_2s)
    lhs = _SQ2H * dp + (_SQ2H + 1.0) * dm
    if lhs >= 1.0:
        return BpdnConstants(c1=None, c2=None, condition_value=lhs, condition_met=False)
    denom = 1.0 - lhs
    c1 = (2.0 + (math.sqrt(2.0) - 2.0) * dm + math.sqrt(2.0) * dp) / denom
    c2 = 4.0 * math.sqrt(1.0 + dp) / denom
    return BpdnConstants(c1=c1, c2=c2, condition_value=lhs, condition_met=True)


def best_sparse_approximation(z: np.ndarray, s: int) -> np.ndarray:
    """Keep the s largest-magnitude entries of z, zero elsewhere."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.zeros_like(z)
    if s > 0:
        keep = np.argsort(-np.abs(z), kind="stable")[:s]
        out[keep] = z[keep]
    return out


def verify_bpdn_bound(problem: SparseProblem, solution: SparseSolution,
                      truth: np.ndarray, constants: BpdnConstants, s: int) -> dict:
    """Check the recovery error against the sparse-defect plus noise bound."""
    if not constants.condition_met:
        raise ValueError("error constants are undefined; isometry condition unmet")
    z = np.asarray(truth, dtype=np.complex128)
    defect = float(np.abs(z - best_sparse_approximation(z, s)).sum())
    sparse_term = constants.c1 * defect / math.sqrt(s)
    noise_term = constants.c2 * problem.epsilon
    error = float(np.linalg.norm(solution.z - z))
    bound = sparse_term + noise_term
    return {
        "error": error,
        "bound": bound,
        "sparse_term": sparse_term,
        "noise_term": noise_term,
        "satisfied": bool(error <= bound + 1e-9),
    }


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

def _carray(a: np.ndarray):
    return [[float(v.real), float(v.imag)] for v in np.asarray(a).ravel()]


def _carray_back(pairs, shape=None):
    z = np.array([complex(re, im) for re, im in pairs])
    return z if shape is None else z.reshape(shape)


def problem_to_json(problem: SparseProblem) -> str:
    return json.dumps({
        "format": "sparse-problem/v1",
        "shape": list(problem.matrix.shape),
        "matrix": _carray(problem.matrix),
        "data": _carray(problem.data),
        "epsilon": problem.epsilon,
    })


def problem_from_json(text: str) -> SparseProblem:
    doc = json.loads(text)
    if doc.get("format") != "sparse-problem/v1":
        raise ValueError("not a sparse-problem/v1 document")
    shape = tuple(doc["shape"])
    return SparseProblem(matrix=_carray_back(doc["matrix"], shape),
                         data=_carray_back(doc["data"]), epsilon=doc["epsilon"])


def solution_to_json(solution: SparseSolution) -> str:
    return json.dumps({
        "format": "sparse-solution/v1",
        "z": _carray(solution.z),
        "objective": solution.objective,
        "residual": solution.residual,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "support": [int(i) for i in solution.support],
        "tie_broken": solution.tie_broken,
    })


def solution_from_json(text: str) -> SparseSolution:
    doc = json.loads(text)
    if doc.get("format") != "sparse-solution/v1":
        raise ValueError("not a sparse-solution/v1 document")
    return SparseSolution(z=_carray_back(doc["z"]), objective=doc["objective"],
                          residual=doc["residual"], iterations=doc["iterations"],
                          converged=doc["converged"],
                          support=np.asarray(doc["support"], dtype=np.int64),
                          tie_broken=doc.get("tie_broken", False))
