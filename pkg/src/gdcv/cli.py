"""Config-driven experiment runner and acceptance-suite entry point.

``gdcv run config.json`` reproduces a figure-style experiment at desk scale
and writes CSV artifacts plus a manifest; ``gdcv accept <suite>`` runs a
named acceptance suite and exits nonzero on failure.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error,
3 numerical failure inside an experiment.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance, io
from .asymptotics import MPLaw, limit_curves
from .data import StepSchedule, spectral_decompose
from .exceptions import GdcvError, InvalidConfig
from .gd import run_gd
from .intervals import IntervalSpec, error_distribution_distance, loo_error_quantiles
from .loo import loocv_fast, loo_predictions_fast
from .risk import (
    gcv_risk,
    loo_predictions_naive,
    true_risk_closed_form,
    true_risk_monte_carlo,
)
from .sim import (
    AR,
    Gaussian,
    Isotropic,
    Linear,
    LinearPlusQuadratic,
    RandomSphere,
    SimModel,
    StudentT,
    TopEigenvector,
    generate,
    sample_pairs,
)

KINDS = (
    "fig1",
    "fig2-coverage",
    "fig3-distributions",
    "limits-mismatch",
    "shortcut-bench",
    "custom",
)

# experiment defaults mirror the source experiments: constant step 0.01,
# AR parameter 0.25, standardized t(5) noise, top-eigenvector energy 50
PRESETS: dict[str, dict] = {
    "fig1": {
        "model": {
            "n": 1000,
            "p": 2000,
            "covariance": {"kind": "isotropic"},
            "signal": {"kind": "random_sphere", "norm": 5.0},
            "response": {"kind": "linear"},
            "noise": {"kind": "gaussian", "variance": 1.0},
        },
        "schedule": {"step_size": 0.01, "n_steps": 200},
        "seeds": [0],
    },
    "fig2-coverage": {
        "model": {
            "n": 500,
            "p": 1000,
            "covariance": {"kind": "ar", "rho": 0.25},
            "signal": {"kind": "top_eigenvector", "energy": 50.0},
            "response": {"kind": "linear_plus_quadratic"},
            "noise": {"kind": "student_t", "dof": 5.0},
        },
        "schedule": {"step_size": 0.01, "n_steps": 400},
        "record_every": 50,
        "n_test": 5000,
        "levels": [0.8, 0.9, 0.95],
        "seeds": [0],
    },
    "fig3-distributions": {
        "model": {
            "n": 500,
            "p": 1000,
            "covariance": {"kind": "ar", "rho": 0.25},
            "signal": {"kind": "top_eigenvector", "energy": 50.0},
            "response": {"kind": "linear_plus_quadratic"},
            "noise": {"kind": "student_t", "dof": 5.0},
        },
        "schedule": {"step_size": 0.01, "n_steps": 400},
        "n_test": 5000,
        "seeds": [0],
    },
    "limits-mismatch": {
        "grid": {
            "time": [round(0.05 * j, 2) for j in range(61)],
            "zeta": [0.5, 1.0, 1.5, 2.0],
            "signal_energy": 1.0,
            "noise_variance": 1.0,
        },
        "seeds": [0],
    },
    "shortcut-bench": {
        "bench": {"n": 300, "k_values": [100, 200, 400], "step_size": 0.01},
        "seeds": [0],
    },
    "custom": {
        "schedule": {"step_size": 0.01, "n_steps": 100},
        "n_test": 2000,
        "seeds": [0],
    },
}


def _parse_model(block: dict) -> SimModel:
    try:
        cov_block = block.get("covariance", {"kind": "isotropic"})
        if cov_block["kind"] == "isotropic":
            cov = Isotropic()
        elif cov_block["kind"] == "ar":
            cov = AR(rho=float(cov_block.get("rho", 0.25)))
        else:
            raise InvalidConfig(f"unknown covariance kind {cov_block['kind']!r}")

        sig_block = block.get("signal", {"kind": "random_sphere", "norm": 5.0})
        if sig_block["kind"] == "random_sphere":
            sig = RandomSphere(norm=float(sig_block.get("norm", 5.0)))
        elif sig_block["kind"] == "top_eigenvector":
            sig = TopEigenvector(energy=float(sig_block.get("energy", 50.0)))
        else:
            raise InvalidConfig(f"unknown signal kind {sig_block['kind']!r}")

        resp_block = block.get("response", {"kind": "linear"})
        if resp_block["kind"] == "linear":
            resp = Linear()
        elif resp_block["kind"] == "linear_plus_quadratic":
            resp = LinearPlusQuadratic()
        else:
            raise InvalidConfig(f"unknown response kind {resp_block['kind']!r}")

        noise_block = block.get("noise", {"kind": "gaussian", "variance": 1.0})
        if noise_block["kind"] == "gaussian":
            noise = Gaussian(variance=float(noise_block.get("variance", 1.0)))
        elif noise_block["kind"] == "student_t":
            noise = StudentT(dof=float(noise_block.get("dof", 5.0)))
        else:
            raise InvalidConfig(f"unknown noise kind {noise_block['kind']!r}")

        return SimModel(
            n=int(block["n"]), p=int(block["p"]),
            covariance=cov, signal=sig, response=resp, noise=noise,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad model block: {exc}") from exc


def _parse_schedule(block: dict) -> StepSchedule:
    try:
        if "deltas" in block:
            return StepSchedule(np.asarray(block["deltas"], dtype=float))
        return StepSchedule.constant(
            float(block["step_size"]), int(block["n_steps"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad schedule block: {exc}") from exc


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidConfig("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise InvalidConfig(f"config 'kind' must be one of {KINDS}, got {kind!r}")
    merged = json.loads(json.dumps(PRESETS[kind]))  # deep copy of preset
    for key, value in raw.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value
    merged["kind"] = kind
    return merged


def _with_seed(model: SimModel, seed: int) -> SimModel:
    return SimModel(
        n=model.n, p=model.p, covariance=model.covariance, signal=model.signal,
        response=model.response, noise=model.noise, seed=int(seed),
    )


# -- per-kind experiment bodies (each returns a list of artifact paths) ------

def _run_fig1(cfg, out_dir, pool):
    sched = _parse_schedule(cfg["schedule"])

    def one(seed):
        model = _with_seed(_parse_model(cfg["model"]), seed)
        data, _, truth = generate(model)
        cache = spectral_decompose(data)
        trajectory = run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
        risk = true_risk_closed_form(trajectory, truth).values
        gcv = gcv_risk(data, trajectory, cache).values
        loocv = loocv_fast(data, sched, cache=cache)[0].values
        rows = [
            {"k": k, "true_risk": risk[k], "gcv": gcv[k], "loocv": loocv[k]}
            for k in range(sched.n_steps + 1)
        ]
        return io.write_csv(
            out_dir / f"fig1_seed{seed}.csv",
            ["k", "true_risk", "gcv", "loocv"],
            rows,
        )

    return list(pool.map(one, cfg["seeds"]))


def _coverage_state(cfg, seed):
    model = _with_seed(_parse_model(cfg["model"]), seed)
    sched = _parse_schedule(cfg["schedule"])
    ks = np.arange(0, sched.n_steps + 1, int(cfg.get("record_every", 50)))
    data, _, truth = generate(model)
    cache = spectral_decompose(data)
    trajectory = run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
    loo_preds = loo_predictions_fast(data, sched, cache=cache, trajectory=trajectory)
    loo_errors = data.response[:, None] - loo_preds
    X0, y0 = sample_pairs(model, truth, int(cfg["n_test"]), seed=seed + 10_000)
    test_errors = y0[:, None] - X0 @ trajectory.iterates[ks].T
    return ks, loo_errors, test_errors


def _run_fig2(cfg, out_dir, pool):
    def one(seed):
        ks, loo_errors, test_errors = _coverage_state(cfg, seed)
        rows = []
        for level in cfg["levels"]:
            spec = IntervalSpec.central(float(level))
            ks_arr, bounds = loo_error_quantiles(loo_errors, spec, ks)
            inside = (test_errors >= bounds[None, :, 0]) & (
                test_errors <= bounds[None, :, 1]
            )
            coverage = inside.mean(axis=0)
            stderr = np.sqrt(coverage * (1 - coverage) / test_errors.shape[0])
            for j, k in enumerate(ks_arr):
                rows.append(
                    {
                        "k": int(k),
                        "nominal": spec.nominal,
                        "coverage": coverage[j],
                        "stderr": stderr[j],
                        "mean_length": bounds[j, 1] - bounds[j, 0],
                    }
                )
        return io.write_csv(
            out_dir / f"coverage_seed{seed}.csv",
            ["k", "nominal", "coverage", "stderr", "mean_length"],
            rows,
        )

    return list(pool.map(one, cfg["seeds"]))


def _run_fig3(cfg, out_dir, pool):
    n_steps = _parse_schedule(cfg["schedule"]).n_steps

    def one(seed):
        cfg_local = dict(cfg)
        cfg_local.setdefault("record_every", max(1, n_steps // 4))
        ks, loo_errors, test_errors = _coverage_state(cfg_local, seed)
        err_rows, ks_rows = [], []
        for j, k in enumerate(ks):
            err_rows.extend(
                {"k": int(k), "kind": "loo", "error": v} for v in loo_errors[:, k]
            )
            err_rows.extend(
                {"k": int(k), "kind": "test", "error": v} for v in test_errors[:, j]
            )
            ks_rows.append(
                {
                    "k": int(k),
                    "ks_statistic": error_distribution_distance(
                        loo_errors[:, k], test_errors[:, j]
                    ),
                }
            )
        return [
            io.write_csv(out_dir / f"errors_seed{seed}.csv",
                         ["k", "kind", "error"], err_rows),
            io.write_csv(out_dir / f"ks_seed{seed}.csv",
                         ["k", "ks_statistic"], ks_rows),
        ]

    return [p for paths in pool.map(one, cfg["seeds"]) for p in paths]


def _run_limits(cfg, out_dir, pool):
    grid = cfg["grid"]
    times = [float(t) for t in grid["time"]]
    curves = [
        limit_curves(
            MPLaw(float(z)),
            float(grid["signal_energy"]),
            float(grid["noise_variance"]),
            times,
        )
        for z in grid["zeta"]
    ]
    return [io.write_limit_curves(out_dir / "limit_curves.csv", curves)]


def _run_bench(cfg, out_dir, pool):
    from .loo import cost_model

    bench = cfg["bench"]
    n = int(bench["n"])
    model = SimModel(n=n, p=n, signal=RandomSphere(norm=1.0), seed=cfg["seeds"][0])
    data, _, _ = generate(model)
    rows = []
    for k in bench["k_values"]:
        sched = StepSchedule.constant(float(bench["step_size"]), int(k))
        t0 = time.perf_counter()
        loo_predictions_naive(data, sched)
        t_naive = time.perf_counter() - t0
        t0 = time.perf_counter()
        loocv_fast(data, sched)
        t_fast = time.perf_counter() - t0
        flops_naive, flops_fast = cost_model(n, n, int(k))
        rows.append(
            {
                "n": n,
                "k": int(k),
                "naive_seconds": t_naive,
                "shortcut_seconds": t_fast,
                "naive_flops": flops_naive,
                "shortcut_flops": flops_fast,
            }
        )
    return [
        io.write_csv(
            out_dir / "bench.csv",
            ["n", "k", "naive_seconds", "shortcut_seconds",
             "naive_flops", "shortcut_flops"],
            rows,
        )
    ]


def _run_custom(cfg, out_dir, pool):
    sched = _parse_schedule(cfg["schedule"])

    def one(seed):
        model = _with_seed(_parse_model(cfg["model"]), seed)
        data, _, truth = generate(model)
        cache = spectral_decompose(data)
        trajectory = run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
        loocv_curve, loo_preds = loocv_fast(data, sched, cache=cache)
        curves = [gcv_risk(data, trajectory, cache), loocv_curve]
        if truth.is_linear:
            curves.append(true_risk_closed_form(trajectory, truth))
        elif int(cfg.get("n_test", 0)) > 0:
            curves.append(
                true_risk_monte_carlo(
                    trajectory, model, int(cfg["n_test"]), seed=seed + 10_000,
                    truth=truth,
                )
            )
        paths = [io.write_risk_curves(out_dir / f"risk_curves_seed{seed}.csv", curves)]
        if cfg.get("dump_loo_predictions"):
            paths.append(
                io.write_loo_predictions(
                    out_dir / f"loo_predictions_seed{seed}.csv",
                    data.response, loo_preds,
                )
            )
        if cfg.get("dump_data"):
            paths.append(io.write_dataset(out_dir / f"dataset_seed{seed}.csv", data))
        return paths

    return [p for paths in pool.map(one, cfg["seeds"]) for p in paths]


RUNNERS = {
    "fig1": _run_fig1,
    "fig2-coverage": _run_fig2,
    "fig3-distributions": _run_fig3,
    "limits-mismatch": _run_limits,
    "shortcut-bench": _run_bench,
    "custom": _run_custom,
}


def resolve_out_dir(cfg: dict, flag_value: str | None) -> Path:
    """Output directory precedence: --out flag, then GDCV_OUT, then config."""
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("GDCV_OUT")
    if env:
        return Path(env)
    return Path(cfg.get("out_dir", "gdcv-out"))


def run_experiment(config_path, out: str | None = None, seeds: str | None = None,
                   threads: int = 1) -> int:
    try:
        cfg = load_config(config_path)
        if seeds:
            cfg["seeds"] = [int(s) for s in seeds.split(",")]
        cfg["seeds"] = [int(s) for s in cfg.get("seeds", [0])]
        if not cfg["seeds"]:
            raise InvalidConfig("need at least one seed")
        if cfg["kind"] in ("fig1", "fig2-coverage", "fig3-distributions", "custom"):
            _parse_model(cfg.get("model", {}))  # fail fast on bad blocks
            _parse_schedule(cfg.get("schedule", {}))
        out_dir = resolve_out_dir(cfg, out)
        out_dir.mkdir(parents=True, exist_ok=True)
        runner = RUNNERS[cfg["kind"]]
    except (InvalidConfig, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    t0 = time.perf_counter()
    try:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            artifacts = runner(cfg, out_dir, pool)
    except GdcvError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - t0
    manifest = io.write_manifest(
        out_dir / "manifest.json", cfg, cfg["seeds"], wall, artifacts
    )
    print(f"wrote {len(artifacts)} artifact(s) and {manifest}")
    return 0


def run_acceptance(suite: str, out: str | None = None) -> int:
    if suite not in acceptance.SUITES:
        print(
            f"unknown suite {suite!r}; choose from {sorted(acceptance.SUITES)}",
            file=sys.stderr,
        )
        return 2
    results = acceptance.run_criteria(acceptance.SUITES[suite])
    if out or os.environ.get("GDCV_OUT"):
        out_dir = Path(out or os.environ["GDCV_OUT"])
        out_dir.mkdir(parents=True, exist_ok=True)
        report = out_dir / f"acceptance_{suite}.json"
        report.write_text(
            json.dumps([r.to_dict() for r in results], indent=2) + "\n",
            encoding="utf-8",
        )
        print(f"report: {report}")
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gdcv",
        description="GD-path risk estimation experiments and acceptance suites",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config-driven experiment")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seeds", default=None, help="comma-separated seed list")
    p_run.add_argument("--threads", type=int, default=1,
                       help="parallel seeds (never changes numeric output)")

    p_acc = sub.add_parser("accept", help="run an acceptance suite")
    p_acc.add_argument("suite", help="|".join(sorted(acceptance.SUITES)))
    p_acc.add_argument("--out", default=None, help="directory for the JSON report")

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_experiment(args.config, args.out, args.seeds, args.threads)
    return run_acceptance(args.suite, args.out)


if __name__ == "__main__":
    sys.exit(main())
