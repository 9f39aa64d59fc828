"""Command-line surface: simulate quantized data, evaluate likelihoods, fit
estimators, run the claim suite, and emit reference point clouds.

All input goes through a JSON config (flags override the basics); data are
CSV, reports are JSON, and every output is written atomically so repeated
runs with the same config are byte-identical.

Exit codes: 0 success, 1 usage or input error, 2 solver hit max iterations.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from typing import Optional, Sequence

import numpy as np

from . import geometry
from .estimate import FitConfig, FitMode, FitReport, fit, fit_ignoring_quantization
from .likelihood import (
    LocationScaleModel,
    MonteCarlo,
    Scale,
    ScaleDiagonal,
    ScaleFixed,
    ScaleScalar,
    dataset_loglik,
)
from .noise import make_noise
from .quantizer import Code, load_quantizer, quantizer_from_json, quantizer_to_json
from .verify import VerifyConfig, run_suite


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# atomic I/O helpers
# ---------------------------------------------------------------------------

def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj) -> None:
    _write_atomic(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _codes_to_csv_text(codes: list[Code]) -> str:
    width = len(codes[0])
    lines = [",".join(f"code{j}" for j in range(width))]
    for z in codes:
        lines.append(",".join(str(int(v)) for v in z))
    return "\n".join(lines) + "\n"


def _read_codes_csv(path: str) -> list[Code]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise UsageError(f"empty data file: {path}")
        codes = [tuple(int(v) for v in row) for row in reader if row]
    if not codes:
        raise UsageError(f"no observations in data file: {path}")
    return codes


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed config JSON: {exc}") from None


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _scale_from_config(obj) -> Scale:
    if isinstance(obj, (int, float)):
        return ScaleScalar(float(obj))
    if not isinstance(obj, dict) or "kind" not in obj:
        raise UsageError('scale must be a number or {"kind": ..., "value": ...}')
    kind = obj["kind"]
    if kind == "scalar":
        return ScaleScalar(float(obj["value"]))
    if kind == "diagonal":
        return ScaleDiagonal(np.asarray(obj["value"], dtype=float))
    if kind == "fixed":
        return ScaleFixed(np.asarray(obj["value"], dtype=float))
    raise UsageError(f"unknown scale kind {kind!r}")


def _scale_to_config(scale: Scale):
    if isinstance(scale, ScaleScalar):
        return {"kind": "scalar", "value": scale.value}
    if isinstance(scale, ScaleDiagonal):
        return {"kind": "diagonal", "value": [float(v) for v in scale.values]}
    return {"kind": "fixed", "value": [[float(v) for v in row] for row in scale.matrix_value]}


def _matrix_from_config(obj, base_dir: str) -> np.ndarray:
    if isinstance(obj, str):
        return np.loadtxt(os.path.join(base_dir, obj), delimiter=",", ndmin=2)
    return np.asarray(obj, dtype=float)


def _quantizer_from_config(cfg: dict, base_dir: str):
    spec = cfg.get("quantizer")
    if spec is None:
        raise UsageError("config needs a 'quantizer' entry (path or inline object)")
    if isinstance(spec, str):
        path = os.path.join(base_dir, spec)
        if not os.path.exists(path):
            raise UsageError(f"quantizer file not found: {path}")
        return load_quantizer(path)
    return quantizer_from_json(spec)


def _model_from_config(cfg: dict, base_dir: str) -> LocationScaleModel:
    mc = cfg.get("model")
    if mc is None:
        raise UsageError("config needs a 'model' entry with S, x, and scale")
    S = _matrix_from_config(mc["S"], base_dir)
    x = np.asarray(mc["x"], dtype=float)
    scale = _scale_from_config(mc["scale"])
    return LocationScaleModel(S, x, scale)


def _noise_from_config(cfg: dict, dim: int):
    name = cfg.get("noise")
    if name is None:
        raise UsageError("config needs a 'noise' entry (gaussian|laplace|logistic)")
    return make_noise(name, dim)


def _require_seed(cfg: dict, override: Optional[int]) -> int:
    seed = override if override is not None else cfg.get("seed")
    if seed is None:
        raise UsageError("a seed is required (config 'seed' or --seed); no ambient randomness")
    return int(seed)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: dict, args: argparse.Namespace) -> int:
    base = os.path.dirname(os.path.abspath(args.config)) if args.config else os.getcwd()
    seed = _require_seed(cfg, args.seed)
    count = int(cfg.get("count", 0))
    if count < 1:
        raise UsageError("config needs a positive 'count'")
    model = _model_from_config(cfg, base)
    noise = _noise_from_config(cfg, model.n)
    quantizer = _quantizer_from_config(cfg, base)
    out = args.out or cfg.get("out")
    if out is None:
        raise UsageError("an output path is required (config 'out' or --out)")

    W = noise.sample(count, seed)
    Y = model.scale.solve_rows(W + model.shift())
    if hasattr(quantizer, "quantize_rows"):
        rows = quantizer.quantize_rows(Y)
        codes = [tuple(int(v) for v in np.atleast_1d(row)) for row in rows]
    else:
        codes = [quantizer.quantize(y) for y in Y]
    _write_atomic(out, _codes_to_csv_text(codes))
    sidecar = {
        "command": "simulate",
        "count": count,
        "seed": seed,
        "noise": cfg["noise"],
        "quantizer": quantizer_to_json(quantizer),
        "model": {
            "S": [[float(v) for v in row] for row in model.S],
            "x": [float(v) for v in model.x],
            "scale": _scale_to_config(model.scale),
        },
    }
    _write_json(out + ".meta.json", sidecar)
    print(f"wrote {count} observations to {out}")
    return 0


def cmd_eval(cfg: dict, args: argparse.Namespace) -> int:
    base = os.path.dirname(os.path.abspath(args.config)) if args.config else os.getcwd()
    model = _model_from_config(cfg, base)
    noise = _noise_from_config(cfg, model.n)
    quantizer = _quantizer_from_config(cfg, base)
    data = cfg.get("data")
    if data is None:
        raise UsageError("config needs a 'data' entry (codes CSV path)")
    codes = _read_codes_csv(os.path.join(base, data))
    mc = None
    mc_cfg = cfg.get("mc")
    if args.mc_count is not None or mc_cfg is not None:
        count = args.mc_count if args.mc_count is not None else int(mc_cfg["count"])
        seed = _require_seed(mc_cfg or {}, args.seed)
        mc = MonteCarlo(count, seed)
    value = dataset_loglik(model, noise, quantizer, codes, mc=mc)
    report = {
        "log_value": value.log_value,
        "std_error": value.std_error,
        "method": value.method.value,
        "underflow": value.underflow,
        "observations": len(codes),
    }
    if args.out:
        _write_json(args.out, report)
    print(json.dumps(report, sort_keys=True))
    return 0


def _fit_report_json(report: FitReport) -> dict:
    return {
        "x_hat": [float(v) for v in report.x_hat],
        "scale_hat": _scale_to_config(report.scale_hat),
        "final_loglik": report.final_loglik,
        "iterations": report.iterations,
        "gradient_norm": report.gradient_norm,
        "converged": report.converged,
        "trajectory": [[it, float(lv)] for it, lv in report.trajectory],
        "x_se": None if report.x_se is None else [float(v) for v in report.x_se],
        "scale_se": None if report.scale_se is None else [float(v) for v in report.scale_se],
        "se_approximate": report.se_approximate,
        "notes": report.notes,
    }


def cmd_fit(cfg: dict, args: argparse.Namespace) -> int:
    base = os.path.dirname(os.path.abspath(args.config)) if args.config else os.getcwd()
    data = cfg.get("data")
    if data is None:
        raise UsageError("config needs a 'data' entry (codes CSV path)")
    codes = _read_codes_csv(os.path.join(base, data))

    S = _matrix_from_config(cfg.get("S", [[1.0]]), base)
    quantizer = _quantizer_from_config(cfg, base)
    noise = _noise_from_config(cfg, S.shape[0] if S.ndim == 2 else 1)
    try:
        mode = FitMode(cfg.get("mode", "location"))
    except ValueError:
        raise UsageError(f"unknown fit mode {cfg.get('mode')!r}") from None
    x0 = np.asarray(cfg.get("x0", np.zeros(S.shape[1] if S.ndim == 2 else 1)), dtype=float)
    scale0 = _scale_from_config(cfg.get("scale0", 1.0))
    try:
        fit_cfg = FitConfig(
            mode=mode,
            x0=x0,
            scale0=scale0,
            grad_tol=float(cfg.get("grad_tol", 1e-8)),
            max_iters=int(cfg.get("max_iters", 500)),
        )
        report = fit(S, noise, quantizer, codes, fit_cfg)
    except (ValueError, RuntimeError) as exc:
        raise UsageError(str(exc)) from None

    out = {"estimate": _fit_report_json(report)}
    if args.ignore_quantization:
        baseline = fit_ignoring_quantization(S, noise, quantizer, codes, fit_cfg)
        out["baseline_ignoring_quantization"] = _fit_report_json(baseline)
    if args.out:
        _write_json(args.out, out)
    print(json.dumps(out, sort_keys=True))
    return 0 if report.converged else 2


def cmd_verify(cfg: dict, args: argparse.Namespace) -> int:
    seed = _require_seed(cfg, args.seed)
    vcfg = VerifyConfig(
        seed=seed,
        midpoint_trials=int(cfg.get("midpoint_trials", 1000)),
        concavity_trials=int(cfg.get("concavity_trials", 10000)),
        prekopa_pairs=int(cfg.get("prekopa_pairs", 20)),
        prekopa_mc=int(args.mc_count or cfg.get("prekopa_mc", 100000)),
        hull_samples=int(cfg.get("hull_samples", 10000)),
        mc_compare_configs=int(cfg.get("mc_compare_configs", 40)),
        mc_compare_count=int(cfg.get("mc_compare_count", 100000)),
        gradient_points=int(cfg.get("gradient_points", 200)),
    )
    only = args.only or cfg.get("only")
    try:
        report = run_suite(vcfg, only=only)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for r in report.results:
        status = "PASS" if r.passed else "FAIL"
        kind = " [expected-violation]" if r.expect_violation else ""
        margin = "" if r.margin is None else f" margin={r.margin:.3e}"
        print(f"{status} {r.claim_id}{kind}:{margin} {r.description}")
    print(f"suite: {len(report.results)} claims, ok={report.ok}")
    if args.out:
        _write_json(args.out, report.to_json())
    return 0 if report.ok else 1


def cmd_figures(cfg: dict, args: argparse.Namespace) -> int:
    seed = _require_seed(cfg, args.seed) if (args.seed is not None or "seed" in cfg) else 0
    samples = int(cfg.get("samples", 2000))
    outdir = args.out or cfg.get("out", ".")
    os.makedirs(outdir, exist_ok=True)
    rng = np.random.default_rng(seed)

    # two planar sets and their half-weight Minkowski combination
    sq = geometry.SampledSet(rng.uniform(0.0, 1.0, size=(samples, 2)), "set0")
    theta = np.pi / 4.0
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    rotated = rng.uniform(-0.5, 0.5, size=(samples, 2)) @ R.T + np.array([3.0, 0.5])
    rot = geometry.SampledSet(rotated, "set1")
    combined = geometry.minkowski_combine(sq, rot, 0.5, samples, seed + 1)
    geometry.write_point_cloud(
        os.path.join(outdir, "minkowski_points.csv"),
        [sq, rot, geometry.SampledSet(combined.points, "combined")],
    )

    y0 = np.array([-1.0, 0.5])
    y1 = np.array([1.0, -0.5])
    C = rng.uniform(0.0, 1.0, size=(samples, 2))
    diag_pts = C * y0 + (1.0 - C) * y1
    geometry.write_point_cloud(
        os.path.join(outdir, "diag_hull_points.csv"),
        [geometry.SampledSet(diag_pts, "diag-hull")],
    )

    Cs = geometry.sample_psd_bounded(2, samples, rng)
    psd_pts = Cs @ y0 + (np.eye(2) - Cs) @ y1
    geometry.write_point_cloud(
        os.path.join(outdir, "psd_hull_points.csv"),
        [geometry.SampledSet(psd_pts, "psd-hull")],
    )
    print(f"wrote point clouds to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantlik",
        description="Quantization-aware likelihood evaluation, fitting, and verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("simulate", "draw quantized observations from a generative config"),
        ("eval", "evaluate the dataset log-likelihood of recorded codes"),
        ("fit", "maximum-likelihood fit on recorded codes"),
        ("verify", "run the numerical claim suite"),
        ("figures", "emit reference point-cloud CSVs"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="path to a JSON run config")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--mc-count", type=int, dest="mc_count", help="Monte-Carlo sample count")
        p.add_argument("--only", help="run a single claim id (verify)")
        p.add_argument("--out", help="output path (or directory for figures)")
        p.add_argument(
            "--ignore-quantization",
            action="store_true",
            dest="ignore_quantization",
            help="also run the midpoint baseline estimator (fit)",
        )
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "eval": cmd_eval,
    "fit": cmd_fit,
    "verify": cmd_verify,
    "figures": cmd_figures,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
