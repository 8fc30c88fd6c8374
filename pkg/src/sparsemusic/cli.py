"""Command-line front end.

Thin adapters only: every subcommand parses arguments, loads inputs, calls
the library and writes artifacts.  Exit codes: 0 success, 1 domain error,
2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import difflib
import json
import os
import sys

import numpy as np

from . import analysis, harness, music, solvers, spectral
from .errors import DomainError
from .forward import (
    assemble_data,
    exact_green_pair,
    load_matrix,
    paraxial_pair,
    save_matrix,
)
from .scene import (
    KIND_PARAXIAL,
    NoiseSpec,
    apply_noise,
    build_planar_grid,
    draw_directions,
    draw_scene,
    scene_to_json,
    scheme_to_json,
)

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

DEFAULT_THREADS_ENV = "SPARSEMUSIC_THREADS"

_SUBCOMMANDS = ("simulate", "music", "bpdn", "omp", "analyze", "spectral", "experiment")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # append a suggestion when an unknown subcommand looks like a typo
        words = message.split("'")
        if "invalid choice" in message and len(words) >= 2:
            close = difflib.get_close_matches(words[1], _SUBCOMMANDS, n=1)
            if close:
                message += f" (did you mean {close[0]!r}?)"
        self.exit(2, f"{self.prog}: error: {message}\n")


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(DEFAULT_THREADS_ENV, "1")))
    except ValueError:
        return 1


def _load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise DomainError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        if path.endswith(".toml"):
            return tomllib.load(fh)
        return json.loads(fh.read().decode())


def _apply_overrides(doc: dict, pairs) -> dict:
    for pair in pairs or ():
        if "=" not in pair:
            raise DomainError(f"override {pair!r} is not key=value")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return doc


def _build_instance(doc: dict, seed_override=None):
    """Instantiate grid, scheme, scene, pair and data from a simulate config."""
    grid_doc = doc.get("grid", {})
    scene_doc = doc.get("scene", {})
    scheme_doc = doc.get("scheme", {})
    noise_doc = doc.get("noise", {})
    seed = seed_override if seed_override is not None else doc.get("seed", 0)
    grid = build_planar_grid(int(grid_doc.get("side", 51)),
                             float(grid_doc.get("spacing", 10.0)),
                             centered=bool(grid_doc.get("centered", True)))
    wavelength = float(scheme_doc.get("wavelength", 0.1))
    omega = 2.0 * np.pi / wavelength
    scheme = draw_directions(int(scheme_doc.get("n", 100)), KIND_PARAXIAL,
                             seed=(seed, 1), omega=omega,
                             aperture=float(scheme_doc.get("aperture", 100.0)),
                             z0=float(scheme_doc.get("z0", 10000.0)))
    scene = draw_scene(grid, int(scene_doc.get("sparsity", 10)),
                       tuple(scene_doc.get("amp_range", (1.0, 2.0))), seed=(seed, 2))
    kernel = scheme_doc.get("kernel", "exact-green")
    if kernel == "paraxial":
        pair = paraxial_pair(grid, scheme).with_support(scene.support)
    else:
        pair = exact_green_pair(grid, scheme, scene)
    data = assemble_data(pair, scene)
    sigma = float(noise_doc.get("sigma", 0.0))
    if sigma > 0:
        data = apply_noise(data, NoiseSpec(sigma=sigma), seed=(seed, 3))
    effective = {"grid": {"side": grid.side, "spacing": grid.spacing,
                          "centered": grid.offset != 0.0},
                 "scene": {"sparsity": scene.sparsity,
                           "amp_range": list(scene_doc.get("amp_range", (1.0, 2.0)))},
                 "scheme": {"kind": KIND_PARAXIAL, "n": scheme.n_sampling,
                            "aperture": scheme.aperture, "z0": scheme.z0,
                            "wavelength": wavelength, "kernel": kernel},
                 "noise": {"sigma": sigma}, "seed": seed}
    return grid, scheme, scene, pair, data, effective


def _write(path: str, text: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    doc = _apply_overrides(_load_config(args.config), args.set)
    grid, scheme, scene, pair, data, effective = _build_instance(doc, args.seed)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "scene.json"), scene_to_json(scene, grid))
    _write(os.path.join(out, "scheme.json"), scheme_to_json(scheme))
    save_matrix(os.path.join(out, "data.bin"), data.y)
    save_matrix(os.path.join(out, "steering.bin"), pair.phi_ext)
    meta = {"effective_config": effective, "epsilon_realized": data.epsilon_realized,
            "shape": list(data.shape)}
    _write(os.path.join(out, "meta.json"), json.dumps(meta, indent=2))
    print(json.dumps(meta, indent=2))
    return 0


def _imaging_csv(grid, img) -> str:
    sup = set() if img.recovered_support is None else set(int(i) for i in img.recovered_support)
    lines = ["x,y,z,J,in_support"]
    for j, p in enumerate(grid.points):
        x, y, z = (float(v) for v in p)
        lines.append(f"{x!r},{y!r},{z!r},{float(img.values[j])!r},{int(j in sup)}")
    return "\n".join(lines)


def _cmd_music(args) -> int:
    doc = _apply_overrides(_load_config(args.config), args.set)
    grid, scheme, scene, pair, data, effective = _build_instance(doc, args.seed)
    dec = music.decompose(data, s=scene.sparsity)
    img = music.imaging_function(dec, pair.phi_ext)
    if args.threshold == "gamma":
        margin = analysis.off_support_margin(pair.phi_ext, scene.support).margin
        support = music.threshold_support(img, "gamma", margin=margin)
        tau = music.margin_threshold(margin)
    elif args.threshold == "ric":
        if args.ric == "bruteforce":
            dm = analysis.ric_bruteforce(pair.phi_ext, scene.sparsity + 1).delta_minus
            dp = analysis.ric_bruteforce(pair.phi_ext, scene.sparsity).delta_plus
        else:
            mu = analysis.mutual_coherence(pair.phi_ext)
            dm = analysis.ric_coherence_bound(mu, scene.sparsity + 1).delta_minus
            dp = analysis.ric_coherence_bound(mu, scene.sparsity).delta_plus
        support = music.threshold_support(img, "ric", delta_minus_s1=dm, delta_plus_s=dp)
        tau = music.ric_threshold(dm, dp)
    else:
        support = music.threshold_support(img, "fixed")
        tau = music.FIXED_THRESHOLD
    img = img.with_recovery(support, rule=args.threshold, threshold_value=tau)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "imaging.csv"), _imaging_csv(grid, img))
    if grid.side is not None:
        _heatmap(grid, img, os.path.join(out, "imaging.png"))
    summary = {
        "effective_config": effective, "threshold_rule": args.threshold,
        "threshold_value": tau,
        "recovered_support": [int(i) for i in support],
        "true_support": [int(i) for i in scene.support],
        "exact": bool(set(int(i) for i in support) == set(int(i) for i in scene.support)),
    }
    _write(os.path.join(out, "summary.json"), json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return 0


def _heatmap(grid, img, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    field = np.log10(img.values).reshape(grid.side, grid.side)
    lo, hi = grid.extent
    fig, ax = plt.subplots(figsize=(4.4, 4))
    im = ax.imshow(field.T, origin="lower", extent=(lo[0], hi[0], lo[1], hi[1]),
                   cmap="viridis")
    fig.colorbar(im, ax=ax, label="log10 J")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _load_vector(path: str) -> np.ndarray:
    m = load_matrix(path)
    if m.ndim == 2 and 1 not in m.shape:
        raise DomainError(f"{path}: expected a vector container, got shape {m.shape}")
    return m.ravel()


def _cmd_bpdn(args) -> int:
    a = load_matrix(args.matrix)
    y = _load_vector(args.data)
    a, _ = solvers.normalize_columns(a)
    problem = solvers.SparseProblem(matrix=a, data=y, epsilon=args.epsilon)
    sol = solvers.bpdn_solve(problem, tol=args.tol, max_iters=args.max_iters)
    text = solvers.solution_to_json(sol)
    if args.out:
        _write(args.out, text)
    print(text)
    return 0


def _cmd_omp(args) -> int:
    a = load_matrix(args.matrix)
    y = _load_vector(args.data)
    a, _ = solvers.normalize_columns(a)
    problem = solvers.SparseProblem(matrix=a, data=y, epsilon=args.epsilon)
    sol = solvers.omp_solve(problem, args.sparsity)
    text = solvers.solution_to_json(sol)
    if args.out:
        _write(args.out, text)
    print(text)
    return 0


def _cmd_analyze(args) -> int:
    m = load_matrix(args.matrix)
    mu = analysis.mutual_coherence(m)
    doc = {"format": "analysis/v1", "shape": list(m.shape),
           "coherence": {"mu": mu.mu, "pair": list(mu.pair)}}
    if args.order:
        if args.ric == "bruteforce":
            est = analysis.ric_bruteforce(m, args.order)
        else:
            est = analysis.ric_coherence_bound(mu, args.order)
        doc["ric"] = {"order": est.order, "delta_minus": est.delta_minus,
                      "delta_plus": est.delta_plus, "method": est.method}
    if args.support:
        support = np.array([int(v) for v in args.support.split(",")], dtype=np.int64)
        rep = analysis.off_support_margin(m, support)
        doc["margin"] = {"value": rep.margin, "worst_index": int(rep.worst_index),
                         "threshold_gamma": music.margin_threshold(rep.margin)
                         if rep.margin > 0 else None}
    text = json.dumps(doc, indent=2)
    if args.out:
        _write(args.out, text)
    print(text)
    return 0


def _cmd_spectral(args) -> int:
    successes = 0
    last = None
    for t in range(args.trials):
        model = spectral.make_signal_model(args.tones, args.sparsity, args.samples,
                                           seed=(args.seed, t))
        if args.mode == "exact":
            triple = spectral.exact_covariance(model, noise_var=args.noise ** 2)
        else:
            samples, amps = spectral.synthesize(model, noise_var=args.noise ** 2,
                                                realizations=args.realizations,
                                                seed=(args.seed, t, 1))
            triple = spectral.empirical_covariance(samples, noise_var=args.noise ** 2,
                                                   amplitudes=amps, support=model.support,
                                                   n_tones=args.tones)
        peaks, _ = spectral.covariance_music(triple, model.sensing_matrix(), args.sparsity)
        ok = np.array_equal(np.sort(peaks), model.support)
        successes += ok
        last = {"true_tones": [int(i) for i in model.support],
                "recovered": [int(i) for i in peaks], "exact": bool(ok)}
    doc = {"format": "spectral/v1", "mode": args.mode, "trials": args.trials,
           "success_rate": successes / args.trials, "last_trial": last}
    text = json.dumps(doc, indent=2)
    if args.out:
        _write(args.out, text)
    print(text)
    return 0


def _cmd_experiment(args) -> int:
    doc = _apply_overrides(_load_config(args.config), args.set)
    if "preset" in doc:
        spec = harness.preset(doc["preset"])
        study = spec["study"]
        cfg = spec["config"]
        axis = spec.get("axis")
        values = spec.get("values")
        n_values = spec.get("n_values")
        search = spec.get("search", {})
    else:
        study = doc.get("study", "success-curve")
        cfg = harness.ExperimentConfig(**doc.get("config", {}))
        axis = doc.get("axis")
        values = doc.get("values")
        n_values = doc.get("n_values")
        search = doc.get("search", {})
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    overrides["threads"] = args.threads if args.threads is not None else _default_threads()
    if args.method:
        overrides["method"] = args.method
    cfg = cfg.replace(**overrides)
    print(json.dumps({"study": study, "config": dataclasses.asdict(cfg)}, indent=2))
    if study == "success-curve":
        if axis is None or values is None:
            raise DomainError("success-curve study needs 'axis' and 'values'")
        result = harness.success_curve(cfg, axis, values)
    elif study == "recoverable-sparsity":
        if n_values is None:
            raise DomainError("recoverable-sparsity study needs 'n_values'")
        result = harness.recoverable_sparsity(cfg, n_values, **search)
    else:
        raise DomainError(f"unknown study {study!r}")
    out_root = args.out or "results"
    out_dir = os.path.join(out_root, harness.config_hash(cfg))
    paths = harness.export(result, out_dir, formats=("csv", "json", "svg-plot"))
    print(json.dumps({"written": paths}, indent=2))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsemusic",
                     description="Sparse-object localization by subspace imaging, "
                                 "with compressed-sensing diagnostics and solver baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON (or TOML) config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry (dotted keys allowed)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("simulate", help="draw a scene and synthesize data")
    common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("music", help="run subspace imaging end to end")
    common(p)
    p.add_argument("--threshold", choices=("gamma", "ric", "fixed"), default="fixed")
    p.add_argument("--ric", choices=("bruteforce", "coherence"), default="coherence")
    p.set_defaults(fn=_cmd_music)

    p = sub.add_parser("bpdn", help="basis pursuit denoising on a stored problem")
    p.add_argument("--matrix", required=True, help="dictionary (matrix container)")
    p.add_argument("--data", required=True, help="data vector (matrix container)")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=50_000)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bpdn)

    p = sub.add_parser("omp", help="orthogonal matching pursuit on a stored problem")
    p.add_argument("--matrix", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_omp)

    p = sub.add_parser("analyze", help="coherence / isometry / margin report")
    p.add_argument("matrix", help="matrix container to analyze")
    p.add_argument("--ric", choices=("bruteforce", "coherence"), default="bruteforce")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--support", default=None, help="comma-separated support indices")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("spectral", help="frequency identification trials")
    p.add_argument("--tones", type=int, default=64)
    p.add_argument("--sparsity", type=int, default=4)
    p.add_argument("--samples", type=int, default=24)
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--mode", choices=("exact", "empirical"), default="exact")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_spectral)

    p = sub.add_parser("experiment", help="run a configured Monte Carlo study")
    common(p)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default ${DEFAULT_THREADS_ENV} or 1)")
    p.add_argument("--method", choices=harness.METHODS, default=None)
    p.set_defaults(fn=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
