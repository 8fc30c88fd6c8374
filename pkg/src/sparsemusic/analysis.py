"""Compressed-sensing and perturbation analysis.

Everything needed to certify thresholded subspace recovery: mutual
coherence, exact (brute-force) and coherence-bounded restricted isometry
constants, the off-support independence margin and its neighborhood
variant, the perturbation budget and critical perturbation ratio, spectral
bounds on the data Gram matrix, admissible noise-to-object and
noise-to-scatterer levels, and a direct check of the invariant-subspace
perturbation bounds.

Measured quantities and their closed-form bounds are kept side by side; the
stability budget report pairs them up as (name, measured, bound, satisfied)
entries.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, EnumerationCapError
from .forward import DataMatrix, SensingPair
from .scene import Grid, Scene, _freeze
from .seeding import make_rng

__all__ = [
    "CoherenceReport",
    "RicEstimate",
    "MarginReport",
    "SubspacePerturbationReport",
    "StabilityBudget",
    "mutual_coherence",
    "ric_bruteforce",
    "ric_restricted",
    "ric_coherence_bound",
    "off_support_margin",
    "margin_lower_bound",
    "perturbation_budget",
    "critical_perturbation_ratio",
    "gram_perturbation_bound",
    "gram_floor_bound",
    "admissible_noise_bound",
    "nsr_admissible",
    "superresolution_limit",
    "subspace_perturbation_report",
    "object_factor_extremes",
    "stability_budget",
    "budget_to_json",
    "empirical_restricted_ric",
    "empirical_coherence_quantile",
]

DEFAULT_ENUMERATION_CAP = 2_000_000


# ---------------------------------------------------------------------------
# Report types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoherenceReport:
    """Largest cosine between distinct columns, with the attaining pair."""

    mu: float
    pair: tuple[int, int]


@dataclass(frozen=True)
class RicEstimate:
    """Restricted isometry constants of one order.

    ``delta_minus`` bounds the loss of norm on sparse vectors,
    ``delta_plus`` the gain.  ``method`` records how the values were
    obtained; brute-force and set-restricted estimates carry the witness
    subsets attaining them.
    """

    order: int
    delta_minus: float
    delta_plus: float
    method: str
    witness_minus: tuple[int, ...] | None = None
    witness_plus: tuple[int, ...] | None = None


@dataclass(frozen=True)
class MarginReport:
    """Off-support independence margin and the worst off-support column."""

    margin: float
    worst_index: int
    residuals: np.ndarray        # residual norms per grid column (nan on excluded set)

    def __post_init__(self):
        object.__setattr__(self, "residuals", _freeze(np.asarray(self.residuals)))


@dataclass(frozen=True)
class SubspacePerturbationReport:
    """Measured invariant-subspace perturbation against its closed bounds.

    ``rho`` is the ratio of the Gram perturbation norm to the smallest
    nonzero signal singular value of the clean Gram.  Bounds are only
    asserted applicable when the corresponding smallness condition holds.
    """

    block_norms: dict
    sigma_min: float
    calE_norm: float
    rho: float
    condition_205: bool
    condition_206: bool
    f_norm: float
    f_bound: float | None
    subspace_distance: float
    subspace_distance_bound: float | None
    signal_gap: float


@dataclass
class StabilityBudget:
    """Measured stability quantities and their closed-form counterparts."""

    sparsity: int
    dynamic_range: float | None = None
    amp_min: float | None = None
    amp_max: float | None = None
    zeta_min: float | None = None
    zeta_max: float | None = None
    margin: float | None = None
    margin_ell: float | None = None
    margin_lower_bound: float | None = None
    budget: float | None = None         # perturbation budget from the margin
    budget_ell: float | None = None
    rho: float | None = None
    rho_star: float | None = None
    sigma_min: float | None = None
    sigma_min_bound: float | None = None
    epsilon: float | None = None
    calE_norm: float | None = None
    calE_bound: float | None = None
    nsr_measured: float | None = None
    nsr_bound: float | None = None
    nsr_satisfied: bool | None = None
    nor_measured: float | None = None
    nor_bound: float | None = None
    nor_satisfied: bool | None = None
    delta_plus_s: float | None = None
    delta_minus_s: float | None = None
    delta_minus_s1: float | None = None
    ric_method: str | None = None
    thresholds: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Coherence and restricted isometry
# ---------------------------------------------------------------------------

def mutual_coherence(m: np.ndarray) -> CoherenceReport:
    """Maximum cosine of the angle between any two distinct columns."""
    a = np.asarray(m, dtype=np.complex128)
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms == 0):
        raise ValueError("matrix has a zero column")
    g = np.abs((a / norms).conj().T @ (a / norms))
    np.fill_diagonal(g, 0.0)
    flat = int(np.argmax(g))
    i, j = divmod(flat, g.shape[1])
    return CoherenceReport(mu=float(g[i, j]), pair=(i, j))


def _gram(m: np.ndarray) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    return a.conj().T @ a


def _extremes_over_subsets(gram: np.ndarray, subsets: np.ndarray):
    """Extremal eigenvalues of all principal submatrices listed in ``subsets``."""
    sub = gram[subsets[:, :, None], subsets[:, None, :]]
    ev = np.linalg.eigvalsh(sub)
    return ev[:, 0], ev[:, -1]


def ric_bruteforce(m: np.ndarray, r: int, cap: int = DEFAULT_ENUMERATION_CAP,
                   batch: int = 20_000) -> RicEstimate:
    """Exact restricted isometry constants by subset enumeration.

    Scans all r-subsets of columns, so it is only feasible at verification
    scale; the combination count is capped.  Expects (near) unit-norm
    columns, as the constants are defined relative to the identity.
    """
    a = np.asarray(m, dtype=np.complex128)
    n_cols = a.shape[1]
    if not (1 <= r <= n_cols):
        raise ValueError("order out of range")
    total = math.comb(n_cols, r)
    if total > cap:
        raise EnumerationCapError(
            f"C({n_cols}, {r}) = {total} exceeds the enumeration cap {cap}; "
            "use the coherence bound or a set-restricted estimate")
    gram = _gram(a)
    best_minus, best_plus = 0.0, 0.0
    wit_minus = wit_plus = None
    combos = itertools.combinations(range(n_cols), r)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        idx = np.asarray(chunk, dtype=np.int64)
        lmin, lmax = _extremes_over_subsets(gram, idx)
        k = int(np.argmin(lmin))
        if 1.0 - lmin[k] > best_minus:
            best_minus, wit_minus = float(1.0 - lmin[k]), tuple(chunk[k])
        k = int(np.argmax(lmax))
        if lmax[k] - 1.0 > best_plus:
            best_plus, wit_plus = float(lmax[k] - 1.0), tuple(chunk[k])
    return RicEstimate(order=r, delta_minus=max(best_minus, 0.0),
                       delta_plus=max(best_plus, 0.0), method="bruteforce",
                       witness_minus=wit_minus, witness_plus=wit_plus)


def ric_restricted(m: np.ndarray, subset) -> RicEstimate:
    """Restricted isometry constants of one particular column subset."""
    idx = np.asarray(subset, dtype=np.int64)
    a = np.asarray(m, dtype=np.complex128)[:, idx]
    ev = np.linalg.eigvalsh(_gram(a))
    return RicEstimate(order=idx.size,
                       delta_minus=max(float(1.0 - ev[0]), 0.0),
                       delta_plus=max(float(ev[-1] - 1.0), 0.0),
                       method="set-restricted",
                       witness_minus=tuple(idx), witness_plus=tuple(idx))


def ric_coherence_bound(mu, r: int) -> RicEstimate:
    """Elementary coherence bound mu * (r - 1) on both constants."""
    if r < 1:
        raise ValueError("order must be positive")
    mu_val = mu.mu if isinstance(mu, CoherenceReport) else float(mu)
    val = mu_val * (r - 1)
    return RicEstimate(order=r, delta_minus=val, delta_plus=val, method="coherence-bound")


# ---------------------------------------------------------------------------
# Off-support independence margin
# ---------------------------------------------------------------------------

def off_support_margin(phi_ext: np.ndarray, support, *, grid: Grid | None = None,
                       ell: float | None = None) -> MarginReport:
    """Minimal normalized distance of off-support columns to the support range.

    Columns are renormalized to unit length, an orthonormal basis of the
    span of the support columns is formed, and each remaining column is
    scored by the norm of its residual.  With a neighborhood radius ``ell``
    the minimum runs only over columns farther than ``ell`` from every
    support point (the gridless variant).
    """
    a = np.asarray(phi_ext, dtype=np.complex128)
    sup = np.asarray(support, dtype=np.int64)
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms == 0):
        raise ValueError("matrix has a zero column")
    cols = a / norms
    phi = cols[:, sup]
    u, sv, _ = np.linalg.svd(phi, full_matrices=False)
    if sv.size == 0 or sv[-1] <= sv[0] * 1e-12:
        raise ConditioningError("support columns are rank deficient")
    q = u
    resid = cols - q @ (q.conj().T @ cols)
    res_norms = np.linalg.norm(resid, axis=0)
    excluded = np.zeros(a.shape[1], dtype=bool)
    excluded[sup] = True
    if ell is not None:
        if grid is None:
            raise ValueError("neighborhood margin requires the grid")
        d = np.linalg.norm(grid.points[:, None, :] - grid.points[sup][None, :, :], axis=2)
        excluded |= d.min(axis=1) <= ell
    res_norms = res_norms.copy()
    res_norms[excluded] = np.nan
    if np.all(excluded):
        raise ValueError("no off-support columns left to score")
    worst = int(np.nanargmin(res_norms))
    return MarginReport(margin=float(res_norms[worst]), worst_index=worst,
                        residuals=res_norms)


def _margin_quotient(delta_minus_s1: float, delta_plus_s: float) -> float:
    return delta_minus_s1 * (1.0 + delta_plus_s) / (2.0 + delta_plus_s - delta_minus_s1)


def margin_lower_bound(delta_minus_s1: float, delta_plus_s: float) -> float:
    """Isometry-constant lower bound on the off-support margin.

    Returns ``1 - d-(1+d+)/(2+d+-d-)``.  Nonpositive values mean the bound
    is vacuous (the order-(s+1) lower constant reached 1).
    """
    return 1.0 - _margin_quotient(delta_minus_s1, delta_plus_s)


# ---------------------------------------------------------------------------
# Perturbation budget and spectral bounds
# ---------------------------------------------------------------------------

def perturbation_budget(margin: float) -> float:
    """Largest tolerable Gram perturbation ratio for a given margin.

    Evaluates ``1/2 - 1/(2 sqrt(sqrt(2) margin + 1))``; this is always below
    1/5, hence below the critical perturbation ratio.
    """
    if not (0.0 <= margin <= 1.0 + 1e-12):
        raise ValueError("margin must lie in [0, 1]")
    return 0.5 - 0.5 / math.sqrt(math.sqrt(2.0) * margin + 1.0)


def _cubic(rho: float) -> float:
    return 1.0 - 8.0 * rho + 20.0 * rho * rho - 20.0 * rho ** 3


_RHO_STAR_CACHE: float | None = None


def critical_perturbation_ratio() -> float:
    """Unique real root of 1 - 8 r + 20 r^2 - 20 r^3, by bisection to 1e-12.

    Below this ratio of Gram perturbation norm to smallest signal singular
    value, the perturbed top singular subspace is still the signal subspace.
    """
    global _RHO_STAR_CACHE
    if _RHO_STAR_CACHE is None:
        lo, hi = 0.2, 0.25
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if _cubic(mid) > 0:
                lo = mid
            else:
                hi = mid
        _RHO_STAR_CACHE = 0.5 * (lo + hi)
    return _RHO_STAR_CACHE


def gram_perturbation_bound(epsilon: float, delta_plus: float, amp_max: float,
                            case: str = "general") -> float:
    """Upper bound on the spectral norm of the data-Gram perturbation.

    ``general`` uses the largest singular value of the object factor
    (amp_max = zeta_max); ``scattering`` uses the largest object amplitude
    with the incidence side obeying the same isometry bound (amp_max =
    xi_max).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if case == "general":
        return epsilon ** 2 + 2.0 * amp_max * math.sqrt(1.0 + delta_plus) * epsilon
    if case == "scattering":
        return epsilon ** 2 + 2.0 * amp_max * (1.0 + delta_plus) * epsilon
    raise ValueError(f"unknown case {case!r}")


def gram_floor_bound(delta_minus: float, amp_min: float, case: str = "general") -> float:
    """Lower bound on the smallest nonzero singular value of the data Gram.

    ``general``: (1 - d-) zeta_min^2;  ``scattering``: (1 - d-)^2 xi_min^2.
    Returns 0 when the constant reaches 1 (vacuous bound).
    """
    slack = 1.0 - delta_minus
    if slack <= 0:
        return 0.0
    if case == "general":
        return slack * amp_min ** 2
    if case == "scattering":
        return slack ** 2 * amp_min ** 2
    raise ValueError(f"unknown case {case!r}")


def admissible_noise_bound(case: str, *, budget: float, dynamic_range: float,
                           delta_plus: float | None = None,
                           delta_minus: float | None = None) -> float:
    """Admissible noise ratio for thresholded support recovery.

    Cases: ``nor`` bounds noise over the smallest object-factor singular
    value, ``nsr`` bounds noise over the weakest scatterer, ``half-ric`` is
    the nsr bound specialized to isometry constants of one half.
    """
    r = float(dynamic_range)
    if r < 1:
        raise ValueError("dynamic range is at least 1")
    if case == "half-ric":
        return math.sqrt(2.25 * r * r + budget / 4.0) - 1.5 * r
    if delta_plus is None or delta_minus is None:
        raise ValueError("nor/nsr cases need both isometry constants")
    if case == "nor":
        return math.sqrt((1.0 + delta_plus) * r * r + (1.0 - delta_minus) * budget) \
            - r * math.sqrt(1.0 + delta_plus)
    if case == "nsr":
        b = (1.0 + delta_plus) * r
        return math.sqrt(b * b + (1.0 - delta_minus) ** 2 * budget) - b
    raise ValueError(f"unknown case {case!r}")


def nsr_admissible(case: str, measured_ratio: float, *, budget: float,
                   dynamic_range: float, delta_plus: float | None = None,
                   delta_minus: float | None = None) -> tuple[float, bool]:
    """Evaluate an admissible-noise bound and compare a measured ratio."""
    bound = admissible_noise_bound(case, budget=budget, dynamic_range=dynamic_range,
                                   delta_plus=delta_plus, delta_minus=delta_minus)
    return bound, bool(measured_ratio < bound)


def superresolution_limit(delta_plus: float, delta_minus: float, budget: float,
                          dynamic_range: float) -> float:
    """Small-slack asymptote of the nsr bound.

    As the lower isometry constant approaches 1 the admissible
    noise-to-scatterer ratio behaves like
    ``(1 - d-)^2 budget / (2 (1 + d+) dynamic_range)``: tiny but positive,
    which is what makes under-resolved recovery possible at low noise.
    """
    return (1.0 - delta_minus) ** 2 * budget / (2.0 * (1.0 + delta_plus) * dynamic_range)


# ---------------------------------------------------------------------------
# Invariant-subspace perturbation check
# ---------------------------------------------------------------------------

def _spectral_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def subspace_perturbation_report(y, e: np.ndarray, s: int) -> SubspacePerturbationReport:
    """Measure the noise-subspace rotation caused by a data perturbation.

    Works on the Gram matrices of the clean and perturbed data.  The
    perturbation blocks are expressed in the clean eigenbasis; the subspace
    distance is the sine of the largest principal angle (basis independent),
    and the alignment factor norm is its tangent.  The closed-form bounds
    are reported only when their smallness conditions hold.
    """
    ym = y.y if isinstance(y, DataMatrix) else np.asarray(y, dtype=np.complex128)
    e = np.asarray(e, dtype=np.complex128)
    if e.shape != ym.shape:
        raise ValueError("perturbation shape mismatch")
    n = ym.shape[0]
    if not (1 <= s < n):
        raise ValueError("rank must leave a nonempty noise subspace")
    gram = ym @ ym.conj().T
    gram_eps = (ym + e) @ (ym + e).conj().T
    cal_e = gram_eps - gram
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    q1, q2 = evecs[:, :s], evecs[:, s:]
    sigma_min = float(evals[s - 1])
    b = evecs.conj().T @ cal_e @ evecs
    blocks = {
        "e11": _spectral_norm(b[:s, :s]),
        "e12": _spectral_norm(b[:s, s:]),
        "e21": _spectral_norm(b[s:, :s]),
        "e22": _spectral_norm(b[s:, s:]),
    }
    cal_e_norm = _spectral_norm(cal_e)
    rho = cal_e_norm / sigma_min if sigma_min > 0 else np.inf
    denom = sigma_min - blocks["e11"] - blocks["e22"]
    cond205 = bool(denom > 0 and math.sqrt(blocks["e12"] * blocks["e21"]) / denom < 0.5)
    cond206 = bool(rho < critical_perturbation_ratio())

    evals_eps, evecs_eps = np.linalg.eigh(gram_eps)
    order_eps = np.argsort(evals_eps)[::-1]
    evals_eps, evecs_eps = evals_eps[order_eps], evecs_eps[:, order_eps]
    q2_eps = evecs_eps[:, s:]
    sin_dist = _spectral_norm(q1.conj().T @ q2_eps)
    sin_dist = min(sin_dist, 1.0)
    f_norm = math.tan(math.asin(sin_dist)) if sin_dist < 1.0 else np.inf
    f_bound = 2.0 * blocks["e21"] / denom if cond205 else None
    dist_bound = 2.0 * rho * (1.0 - rho) / (1.0 - 2.0 * rho) ** 2 if cond206 else None
    signal_gap = float(evals_eps[s - 1] - evals_eps[s])
    return SubspacePerturbationReport(
        block_norms=blocks, sigma_min=sigma_min, calE_norm=cal_e_norm, rho=rho,
        condition_205=cond205, condition_206=cond206, f_norm=f_norm, f_bound=f_bound,
        subspace_distance=sin_dist, subspace_distance_bound=dist_bound,
        signal_gap=signal_gap)


# ---------------------------------------------------------------------------
# Budget assembly
# ---------------------------------------------------------------------------

def object_factor_extremes(scene: Scene, pair: SensingPair) -> tuple[float, float]:
    """Extreme singular values of the object factor Z = X Psi_S^*."""
    psi_ext = pair.phi_ext if pair.psi_ext is None else pair.psi_ext
    psi = psi_ext[:, scene.support]
    z = scene.amplitudes[:, None] * psi.conj().T
    sv = np.linalg.svd(z, compute_uv=False)
    return float(sv[-1]), float(sv[0])


def stability_budget(pair: SensingPair, scene: Scene, data: DataMatrix | None = None,
                     *, ric: dict | None = None, ric_method: str = "coherence",
                     enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> StabilityBudget:
    """Assemble measured stability quantities and their closed-form bounds.

    ``ric`` may carry precomputed constants (keys ``delta_plus_s``,
    ``delta_minus_s``, ``delta_minus_s1``); otherwise they are estimated by
    the requested method on the sampling side.  When ``data`` carries a
    perturbation the noise ratios are measured against it.
    """
    s = scene.sparsity
    if s == 0:
        raise ValueError("empty scene has no budget")
    budget = StabilityBudget(sparsity=s)
    budget.amp_min, budget.amp_max = scene.amp_min, scene.amp_max
    budget.dynamic_range = scene.dynamic_range
    budget.zeta_min, budget.zeta_max = object_factor_extremes(scene, pair)
    budget.rho_star = critical_perturbation_ratio()

    margin_rep = off_support_margin(pair.phi_ext, scene.support)
    budget.margin = margin_rep.margin
    budget.budget = perturbation_budget(min(margin_rep.margin, 1.0))

    if ric is not None:
        dp_s = ric["delta_plus_s"]
        dm_s = ric["delta_minus_s"]
        dm_s1 = ric["delta_minus_s1"]
        budget.ric_method = ric.get("method", "supplied")
    elif ric_method == "bruteforce":
        est_s = ric_bruteforce(pair.phi_ext, s, cap=enumeration_cap)
        est_s1 = ric_bruteforce(pair.phi_ext, s + 1, cap=enumeration_cap)
        dp_s, dm_s, dm_s1 = est_s.delta_plus, est_s.delta_minus, est_s1.delta_minus
        budget.ric_method = "bruteforce"
    else:
        mu = mutual_coherence(pair.phi_ext)
        dp_s = dm_s = ric_coherence_bound(mu, s).delta_plus
        dm_s1 = ric_coherence_bound(mu, s + 1).delta_minus
        budget.ric_method = "coherence"
    budget.delta_plus_s, budget.delta_minus_s, budget.delta_minus_s1 = dp_s, dm_s, dm_s1
    budget.margin_lower_bound = margin_lower_bound(dm_s1, dp_s)
    budget.sigma_min_bound = gram_floor_bound(dm_s, budget.amp_min, case="scattering")

    y = None
    if data is not None:
        y = data.clean
        gram_sv = np.linalg.svd(y @ y.conj().T, compute_uv=False)
        budget.sigma_min = float(gram_sv[s - 1])
        if data.noise is not None:
            budget.epsilon = data.epsilon_realized
            cal_e = data.y @ data.y.conj().T - y @ y.conj().T
            budget.calE_norm = float(np.linalg.norm(cal_e, 2))
            budget.calE_bound = gram_perturbation_bound(
                budget.epsilon, dp_s, budget.amp_max, case="scattering")
            budget.rho = budget.calE_norm / budget.sigma_min
            budget.nsr_measured = budget.epsilon / budget.amp_min
            budget.nsr_bound, budget.nsr_satisfied = nsr_admissible(
                "nsr", budget.nsr_measured, budget=budget.budget,
                dynamic_range=budget.dynamic_range, delta_plus=dp_s, delta_minus=dm_s)
            budget.nor_measured = budget.epsilon / budget.zeta_min
            budget.nor_bound, budget.nor_satisfied = nsr_admissible(
                "nor", budget.nor_measured,
                budget=budget.budget,
                dynamic_range=budget.zeta_max / budget.zeta_min,
                delta_plus=dp_s, delta_minus=dm_s)

    thresholds = {"fixed": 128.0 / 25.0}
    if budget.margin > 0:
        thresholds["gamma"] = 2.0 / budget.margin ** 2
    level = margin_lower_bound(dm_s1, dp_s)
    if level > 0:
        thresholds["ric"] = 2.0 / level ** 2
    budget.thresholds = thresholds
    return budget


def budget_to_json(budget: StabilityBudget) -> str:
    """Serialize a budget as labelled (measured, bound, satisfied) entries."""
    def entry(name, measured, bound, satisfied=None):
        if satisfied is None and measured is not None and bound is not None:
            satisfied = bool(measured >= bound) if name == "sigma_min" else bool(measured <= bound)
        return {"name": name, "measured": measured, "bound": bound, "satisfied": satisfied}

    entries = [
        entry("margin", budget.margin, budget.margin_lower_bound,
              None if budget.margin is None or budget.margin_lower_bound is None
              else bool(budget.margin >= budget.margin_lower_bound)),
        entry("sigma_min", budget.sigma_min, budget.sigma_min_bound),
        entry("gram_perturbation", budget.calE_norm, budget.calE_bound),
        entry("nsr", budget.nsr_measured, budget.nsr_bound, budget.nsr_satisfied),
        entry("nor", budget.nor_measured, budget.nor_bound, budget.nor_satisfied),
        entry("rho", budget.rho, budget.rho_star,
              None if budget.rho is None else bool(budget.rho < budget.rho_star)),
    ]
    doc = {
        "format": "budget/v1",
        "sparsity": budget.sparsity,
        "dynamic_range": budget.dynamic_range,
        "zeta": [budget.zeta_min, budget.zeta_max],
        "perturbation_budget": budget.budget,
        "ric": {
            "method": budget.ric_method,
            "delta_plus_s": budget.delta_plus_s,
            "delta_minus_s": budget.delta_minus_s,
            "delta_minus_s1": budget.delta_minus_s1,
        },
        "thresholds": budget.thresholds,
        "entries": entries,
    }
    return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# Empirical checkers for the probabilistic bounds
# ---------------------------------------------------------------------------

def empirical_restricted_ric(m: np.ndarray, s: int, n_subsets: int, seed=0,
                             quantile: float = 0.5) -> float:
    """Empirical quantile of set-restricted isometry constants.

    Draws random s-subsets of columns and reports the requested quantile of
    ``max(delta_minus, delta_plus)`` over them.  This is the verification
    stand-in for the probabilistic isometry statements, whose absolute
    constants are not tracked.
    """
    a = np.asarray(m, dtype=np.complex128)
    rng = make_rng(seed)
    vals = np.empty(n_subsets)
    for i in range(n_subsets):
        sub = rng.choice(a.shape[1], size=s, replace=False)
        est = ric_restricted(a, sub)
        vals[i] = max(est.delta_minus, est.delta_plus)
    return float(np.quantile(vals, quantile))


def empirical_coherence_quantile(matrix_factory, draws: int, seed=0,
                                 quantile: float = 0.5) -> float:
    """Empirical quantile of mutual coherence over seeded matrix draws."""
    vals = np.empty(draws)
    for i in range(draws):
        vals[i] = mutual_coherence(matrix_factory(make_rng((seed, i)))).mu
    return float(np.quantile(vals, quantile))
