"""Seeded Monte Carlo sweeps: success curves and recoverable sparsity.

A trial draws transceivers and a scene, synthesizes data with the exact
kernel, perturbs it, runs one reconstruction method and scores exact
support recovery.  Seeds are derived from (master seed, sweep point, trial
index) only, never from the method, so methods can be compared on
identical draws.  Reductions are counts, so results do not depend on
execution order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .forward import assemble_data, exact_green_pair, paraxial_pair
from .music import decompose, imaging_function, top_peaks
from .scene import (
    KIND_PARAXIAL,
    NoiseSpec,
    apply_noise,
    build_planar_grid,
    draw_directions,
    draw_scene,
)
from .seeding import subseed
from .solvers import SparseProblem, bpdn_solve, omp_solve

__all__ = [
    "ExperimentConfig",
    "TrialOutcome",
    "SuccessCurve",
    "SparsityCurve",
    "wilson_interval",
    "run_trial",
    "success_curve",
    "recoverable_sparsity",
    "export",
    "config_hash",
    "preset",
    "PRESETS",
]

METHODS = ("music", "bpdn-full-matrix", "bpdn-single-column", "omp")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one trial needs, plus sweep bookkeeping.

    Tail parameters ``tail_k``, ``tail_alpha``, ``tail_gamma`` configure the
    empirical quantile checkers of the probabilistic coherence/isometry
    statements; they do not influence trials.
    """

    # geometry
    z0: float = 10000.0
    wavelength: float = 0.1
    spacing: float = 10.0
    grid_side: int = 51
    grid_centered: bool = True
    aperture: float = 100.0
    kernel: str = "exact-green"            # "exact-green" or "paraxial"
    # counts and amplitudes
    n_sensors: int = 100
    sparsity: int = 10
    amp_lo: float = 1.0
    amp_hi: float = 2.0
    # noise
    sigma: float = 0.0
    # method and trial bookkeeping
    method: str = "music"
    trials: int = 100
    seed: int = 0
    threads: int = 1
    # solver knobs (Monte Carlo scale)
    solver_tol: float = 1e-6
    solver_max_iters: int = 3000
    solver_support_exit: bool = True
    # empirical-checker tail parameters
    tail_k: float = 1.0
    tail_alpha: float = 0.05
    tail_gamma: float = 0.1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        for name in ("z0", "wavelength", "spacing", "aperture"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def n_grid(self) -> int:
        return self.grid_side ** 2

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class TrialOutcome:
    recovered: np.ndarray | None
    true_support: np.ndarray
    exact: bool
    failure: str | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SuccessCurve:
    axis: str
    values: tuple
    successes: tuple
    trials: tuple
    rate: tuple
    lo: tuple
    hi: tuple
    degenerate: bool = False


@dataclass(frozen=True)
class SparsityCurve:
    method: str
    n_values: tuple
    s_star: tuple
    target: float
    trials: tuple


_GRID_CACHE: dict = {}


def _grid_for(config: ExperimentConfig):
    key = (config.grid_side, config.spacing, config.grid_centered)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = build_planar_grid(config.grid_side, config.spacing,
                                             centered=config.grid_centered)
    return _GRID_CACHE[key]


def wilson_interval(successes: int, trials: int, z: float = 1.96):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        return 0.0, 1.0
    p = successes / trials
    zz = z * z
    den = 1.0 + zz / trials
    center = (p + zz / (2.0 * trials)) / den
    half = z * math.sqrt(p * (1.0 - p) / trials + zz / (4.0 * trials * trials)) / den
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------------------
# One trial
# ---------------------------------------------------------------------------

def _vectorized_dictionary(phi_ext: np.ndarray, psi_ext: np.ndarray):
    # column j of the stacked dictionary is phi_j outer conj(psi_j), row
    # index k + n*l matching column-major vectorization of the data matrix
    n = phi_ext.shape[0]
    m = psi_ext.shape[0]
    a = phi_ext[:, None, :] * psi_ext.conj()[None, :, :]
    return a.transpose(1, 0, 2).reshape(n * m, phi_ext.shape[1])


def run_trial(config: ExperimentConfig, trial: int = 0, point: str = "") -> TrialOutcome:
    """Run one end-to-end draw and score exact support recovery.

    Stage failures are captured in the outcome rather than raised, so a
    sweep never aborts on a degenerate draw.
    """
    s = config.sparsity
    grid = _grid_for(config)
    try:
        scheme = draw_directions(
            config.n_sensors, KIND_PARAXIAL,
            seed=subseed(config.seed, "sensors", point, config.n_sensors, trial),
            omega=config.omega, aperture=config.aperture, z0=config.z0)
        scene = draw_scene(grid, s, (config.amp_lo, config.amp_hi),
                           seed=subseed(config.seed, "scene", point, s, trial))
        if config.kernel == "exact-green":
            pair = exact_green_pair(grid, scheme, scene)
        elif config.kernel == "paraxial":
            pair = paraxial_pair(grid, scheme).with_support(scene.support)
        else:
            raise ValueError(f"unknown kernel {config.kernel!r}")
        data = assemble_data(pair, scene)
        if config.sigma > 0:
            data = apply_noise(data, NoiseSpec(sigma=config.sigma),
                               seed=subseed(config.seed, "noise", point, trial))
        diagnostics = {"epsilon": data.epsilon_realized}
        recovered = _reconstruct(config, pair, data, s, diagnostics)
    except Exception as exc:  # noqa: BLE001  (trial isolation by contract)
        return TrialOutcome(recovered=None,
                            true_support=np.empty(0, dtype=np.int64) if "scene" not in locals()
                            else scene.support,
                            exact=False, failure=f"{type(exc).__name__}: {exc}")
    exact = recovered.size == s and np.array_equal(np.sort(recovered), scene.support)
    return TrialOutcome(recovered=recovered, true_support=scene.support,
                        exact=bool(exact), diagnostics=diagnostics)


def _reconstruct(config: ExperimentConfig, pair, data, s: int, diagnostics: dict) -> np.ndarray:
    method = config.method
    if method == "music":
        dec = decompose(data, s=s)
        img = imaging_function(dec, pair.phi_ext)
        peaks, ties = top_peaks(img, s)
        diagnostics["ties_broken"] = ties
        return peaks
    support_exit = s if config.solver_support_exit else None
    if method == "bpdn-full-matrix":
        psi_ext = pair.phi_ext if pair.psi_ext is None else pair.psi_ext
        a = _vectorized_dictionary(pair.phi_ext, psi_ext)
        y = data.y.ravel(order="F")
        eps = float(np.linalg.norm(data.noise)) if data.noise is not None else 0.0
        problem = SparseProblem(matrix=a, data=y, epsilon=eps)
        sol = bpdn_solve(problem, tol=config.solver_tol, max_iters=config.solver_max_iters,
                         support_exit=support_exit)
        diagnostics["iterations"] = sol.iterations
        return np.sort(np.argsort(-np.abs(sol.z), kind="stable")[:s])
    if method in ("bpdn-single-column", "omp"):
        y = data.y[:, 0]
        eps = float(np.linalg.norm(data.noise[:, 0])) if data.noise is not None else 0.0
        problem = SparseProblem(matrix=pair.phi_ext, data=y, epsilon=eps)
        if method == "omp":
            sol = omp_solve(problem, s)
            diagnostics["iterations"] = sol.iterations
            return sol.support
        sol = bpdn_solve(problem, tol=config.solver_tol, max_iters=config.solver_max_iters,
                         support_exit=support_exit)
        diagnostics["iterations"] = sol.iterations
        return np.sort(np.argsort(-np.abs(sol.z), kind="stable")[:s])
    raise ValueError(f"unknown method {method!r}")


def _run_batch(config: ExperimentConfig, point: str, trials: int,
               stop_pass: int | None = None, stop_fail: int | None = None) -> tuple[int, int]:
    """Count successes, optionally stopping once the verdict is decided."""
    successes = failures = 0
    if config.threads > 1 and stop_pass is None and stop_fail is None:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(lambda t: run_trial(config, t, point), range(trials)))
        successes = sum(o.exact for o in outcomes)
        return successes, trials
    for t in range(trials):
        if run_trial(config, t, point).exact:
            successes += 1
            if stop_pass is not None and successes >= stop_pass:
                return successes, t + 1
        else:
            failures += 1
            if stop_fail is not None and failures >= stop_fail:
                return successes, t + 1
    return successes, trials


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def success_curve(config: ExperimentConfig, axis: str, values) -> SuccessCurve:
    """Success probability along one config axis, with Wilson intervals."""
    values = list(values)
    if len(values) < 2:
        raise ValueError("a sweep needs at least two points")
    successes, rates, los, his, trials = [], [], [], [], []
    degenerate = config.trials < 2
    for v in values:
        cfg = config.replace(**{axis: v})
        point = f"{axis}={v}"
        k, t = _run_batch(cfg, point, cfg.trials)
        successes.append(k)
        trials.append(t)
        rates.append(k / t)
        if degenerate:
            lo, hi = 0.0, 1.0
        else:
            lo, hi = wilson_interval(k, t)
        los.append(lo)
        his.append(hi)
    return SuccessCurve(axis=axis, values=tuple(values), successes=tuple(successes),
                        trials=tuple(trials), rate=tuple(rates), lo=tuple(los),
                        hi=tuple(his), degenerate=degenerate)


def _probe_success(config: ExperimentConfig, n: int, s: int, trials: int,
                   target: float) -> bool:
    need = math.ceil(target * trials)
    cfg = config.replace(n_sensors=n, sparsity=s, trials=trials)
    point = f"n={n}"
    k, _ = _run_batch(cfg, point, trials, stop_pass=need, stop_fail=trials - need + 1)
    return k >= need


def _sparsity_cap(config: ExperimentConfig, n: int, s_cap: int | None) -> int:
    if config.method == "music":
        cap = n - 1
    elif config.method == "bpdn-full-matrix":
        cap = min(config.n_grid - 1, n * n)
    else:
        cap = min(config.n_grid - 1, n)
    return cap if s_cap is None else min(cap, s_cap)


def _search_one(config: ExperimentConfig, n: int, cap: int, target: float,
                screen_trials: int | None, resolution: float) -> int:
    memo: dict[int, bool] = {}

    def full(s: int) -> bool:
        if s not in memo:
            memo[s] = _probe_success(config, n, s, config.trials, target)
        return memo[s]

    def gap(lo: int) -> int:
        return max(1, int(resolution * max(lo, 1)))

    # cheap screen to bracket the transition before paying for full probes
    hi = cap + 1
    lo = 0
    if screen_trials:
        probe, last_pass = 1, 0
        while probe <= cap:
            if _probe_success(config, n, probe, screen_trials, target):
                last_pass = probe
                probe *= 2
            else:
                break
        if last_pass:
            if probe <= cap:
                hi = probe                 # screen-failing probe above a passing one
            if full(last_pass):
                lo = last_pass
            else:
                hi = min(hi, last_pass)    # screen was optimistic; certify below it
    if lo == 0:
        if not full(1):
            return 0
        lo = 1
    if hi > cap:
        if full(cap):
            return cap
        hi = cap
    if hi <= lo:
        return lo
    # doubling from the certified bound when the screen was skipped or weak
    probe = max(lo * 2, 2)
    while probe < hi:
        if full(probe):
            lo = probe
            probe *= 2
        else:
            hi = probe
            break
    while hi - lo > gap(lo):
        mid = (lo + hi) // 2
        if mid == lo:
            break
        if full(mid):
            lo = mid
        else:
            hi = mid
    return lo


def recoverable_sparsity(config: ExperimentConfig, n_values, *, target: float = 0.9,
                         s_cap: int | None = None, screen_trials: int | None = None,
                         resolution: float = 0.0) -> SparsityCurve:
    """Largest sparsity with at least ``target`` success rate, per sensor count.

    Galloping search plus integer bisection; each probe stops as soon as its
    verdict is decided.  ``screen_trials`` enables a cheap low-trial screen
    that brackets the transition before the full-trial probes run; the
    returned value is always certified at the full trial count.  A nonzero
    ``resolution`` stops the bisection once the bracket is relatively that
    small (the result then underestimates by at most that fraction).  Seeds
    depend on (n, s, trial) only, so the same scenes are replayed for every
    method.
    """
    n_values = list(n_values)
    s_stars = [
        _search_one(config, n, _sparsity_cap(config, n, s_cap), target,
                    screen_trials, resolution)
        for n in n_values
    ]
    return SparsityCurve(method=config.method, n_values=tuple(n_values),
                         s_star=tuple(s_stars), target=target,
                         trials=tuple([config.trials] * len(n_values)))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def config_hash(config: ExperimentConfig) -> str:
    doc = json.dumps(dataclasses.asdict(config), sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:12]


def _curve_rows(result):
    if isinstance(result, SuccessCurve):
        header = "axis,success,lo,hi,trials"
        rows = [f"{v!r},{r!r},{lo!r},{hi!r},{t}" for v, r, lo, hi, t in
                zip(result.values, result.rate, result.lo, result.hi, result.trials)]
        return header, rows
    if isinstance(result, SparsityCurve):
        header = "n,s_star,target,trials"
        rows = [f"{n},{s},{result.target!r},{t}" for n, s, t in
                zip(result.n_values, result.s_star, result.trials)]
        return header, rows
    raise ValueError(f"cannot export {type(result).__name__}")


def export(result, out_dir, *, formats=("csv", "json"), stem: str = "results") -> list[str]:
    """Write a sweep result deterministically; returns the paths written."""
    if result is None or (hasattr(result, "values") and len(result.values) == 0):
        raise ValueError("refusing to export an empty result set")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for fmt in formats:
        path = os.path.join(out_dir, f"{stem}.{'svg' if fmt == 'svg-plot' else fmt}")
        if fmt == "csv":
            header, rows = _curve_rows(result)
            with open(path, "w") as fh:
                fh.write(header + "\n")
                fh.write("\n".join(rows) + "\n")
        elif fmt == "json":
            with open(path, "w") as fh:
                json.dump(dataclasses.asdict(result), fh, indent=2, default=list)
                fh.write("\n")
        elif fmt == "svg-plot":
            _plot_curve(result, path)
        else:
            raise ValueError(f"unknown export format {fmt!r}")
        written.append(path)
    return written


def _plot_curve(result, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.4))
    if isinstance(result, SuccessCurve):
        x = np.asarray(result.values, dtype=float)
        ax.plot(x, result.rate, "o-", lw=1.2)
        ax.fill_between(x, result.lo, result.hi, alpha=0.25, lw=0)
        ax.set_xlabel(result.axis)
        ax.set_ylabel("success probability")
        ax.set_ylim(-0.02, 1.02)
    else:
        ax.plot(result.n_values, result.s_star, "s-", lw=1.2)
        ax.set_xlabel("sensors n")
        ax.set_ylabel(f"recoverable sparsity ({result.method})")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# Named presets mirroring the studies being reproduced
# ---------------------------------------------------------------------------

def _base(**kw) -> ExperimentConfig:
    return ExperimentConfig(**kw)


PRESETS = {
    # sparsity-vs-sensors comparisons on a mid-size grid (full data matrix)
    "sparsity-well-resolved": dict(
        study="recoverable-sparsity",
        config=_base(aperture=100.0, grid_side=35, sigma=0.0, trials=100,
                     solver_max_iters=1500, solver_tol=1e-5),
        n_values=[10, 15, 20, 25, 30],
        search=dict(screen_trials=20, resolution=0.05)),
    "sparsity-under-resolved": dict(
        study="recoverable-sparsity",
        config=_base(aperture=10.0, grid_side=35, sigma=0.0, trials=100,
                     solver_max_iters=1000, solver_tol=1e-5),
        n_values=[10, 15, 20, 25, 30],
        search=dict(screen_trials=20, resolution=0.05)),
    # aperture sweeps at three (n, s) corners
    "aperture-few-sensors": dict(
        study="success-curve", axis="aperture",
        config=_base(n_sensors=10, sparsity=9, sigma=0.0, trials=100),
        values=[20, 40, 60, 80, 100, 140, 200]),
    "aperture-many-sensors": dict(
        study="success-curve", axis="aperture",
        config=_base(n_sensors=100, sparsity=9, sigma=0.0, trials=100),
        values=[5, 10, 20, 30, 50, 80]),
    "aperture-dense-scene": dict(
        study="success-curve", axis="aperture",
        config=_base(n_sensors=60, sparsity=59, sigma=0.0, trials=100),
        values=[40, 80, 120, 200, 300, 400]),
    # noise sweeps, well and under resolved
    "noise-well-resolved": dict(
        study="success-curve", axis="sigma",
        config=_base(aperture=100.0, n_sensors=100, sparsity=10, trials=200),
        values=[0.25, 0.5, 1.0, 1.5, 2.0, 3.0]),
    "noise-under-resolved": dict(
        study="success-curve", axis="sigma",
        config=_base(aperture=10.0, n_sensors=100, sparsity=10, trials=200),
        values=[0.0125, 0.025, 0.05, 0.1, 0.2]),
    # sensor sweep showing the noisy under-resolved plateau
    "plateau-under-resolved": dict(
        study="success-curve", axis="n_sensors",
        config=_base(aperture=10.0, sparsity=10, sigma=0.05, trials=150),
        values=[50, 100, 150, 200, 250, 300]),
}


def preset(name: str):
    """Fetch a named study preset (copied, safe to modify)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    spec = PRESETS[name]
    out = dict(spec)
    out["config"] = spec["config"].replace()
    return out
