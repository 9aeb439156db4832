"""Command-line driver: end-to-end runs, benchmarks, and analysis reports.

Subcommands: run-gpr, bench-exp, bench-matinv, analyze-leakage,
validate-params, gen-offline. Configuration is a flat key=value file;
every key can be overridden by a command-line flag. Metrics are emitted
as JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .analysis import expected_rounds, leakage_enumerate, validate_exp_params
from .data import Dataset, ScenarioSplit, ingest_csv, read_matrix, split_scenario, standardize
from .gpr import (KernelConfig, Predictions, gpr_predict_plaintext, kernel_matrix_plaintext,
                  loss_metrics, pp_gpr_construct, pp_gpr_predict)
from .offline import fill_pools
from .protocols import ExpParams, pp_exp, pp_matinv
from .ring import FixedPointCodec, RingParams
from .session import DivisionConfig, run_session
from .sharing import reconstruct, share_reals
from .transport import P0, P1

DEFAULTS = {
    "l": 64,
    "lf": 26,
    "u_min": -4.0,
    "r_max": 1.25,
    "kernel": "se",
    "length_scale": 1.0,
    "signal_variance": 1.0,
    "noise_variance": 0.1,
    "scenario": "hds",
    "backend": "inproc",
    "seeds": [0],
    "div_lo": 0.1,
    "div_hi": 100.0,
    "div_iterations": 8,
    "sqrt_lo": 0.002,
    "sqrt_hi": 16.0,
    "sqrt_iterations": 25,
    "normalize": True,
    "exp_policy": "clamp",
    "trunc": "assistant",
    "test_size": 0,
    "has_header": False,
}


def load_config(path: str | None) -> dict:
    """Flat key=value configuration with '#' comments."""
    cfg = dict(DEFAULTS)
    if path is None:
        return cfg
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in cfg:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = _coerce(key, value)
    return cfg


def _coerce(key: str, value: str):
    ref = DEFAULTS[key]
    if isinstance(ref, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(ref, int):
        return int(value)
    if isinstance(ref, float):
        return float(value)
    if isinstance(ref, list):
        return [int(v) for v in value.replace(",", " ").split()]
    return value


def session_pieces(cfg: dict):
    codec = FixedPointCodec(RingParams(cfg["l"], cfg["lf"]))
    exp_params = ExpParams(u_min=cfg["u_min"], r_max=cfg["r_max"])
    div = DivisionConfig(lo=cfg["div_lo"], hi=cfg["div_hi"],
                         iterations=cfg["div_iterations"],
                         sqrt_lo=cfg["sqrt_lo"], sqrt_hi=cfg["sqrt_hi"],
                         sqrt_iterations=cfg["sqrt_iterations"])
    kernel = KernelConfig(kind=cfg["kernel"], length_scale=cfg["length_scale"],
                          signal_variance=cfg["signal_variance"],
                          noise_variance=cfg["noise_variance"])
    report = validate_exp_params(exp_params, codec.params)
    if not report.accepted:
        raise ValueError("exponentiation parameters fail the correctness bound: "
                         f"required l_f >= {report.required_lf:.2f}")
    return codec, exp_params, div, kernel


def run_gpr(dataset: Dataset, x_star, cfg: dict) -> dict:
    """One full model construction + prediction per seed, with metrics."""
    codec, exp_params, div, kernel = session_pieces(cfg)
    ds, prep = standardize(dataset, cfg["normalize"])
    xs = prep.apply_x(x_star)
    oracle = gpr_predict_plaintext(ds.X, ds.y, xs, kernel)
    oracle = Predictions(oracle.mean + prep.y_shift, oracle.variance)
    split = ScenarioSplit(scenario=cfg["scenario"])

    runs = []
    for seed in cfg["seeds"]:
        bundles = split_scenario(ds, xs, split, codec, seed)

        def job(rt, bundles=bundles):
            b = bundles[rt.party]
            t0 = time.perf_counter()
            model = pp_gpr_construct(rt, b["X"], b["y"], kernel, exp_params,
                                     policy=cfg["exp_policy"], y_shift=prep.y_shift)
            t1 = time.perf_counter()
            mean, var = pp_gpr_predict(rt, model, b["x_star"], exp_params,
                                       policy=cfg["exp_policy"])
            t2 = time.perf_counter()
            return mean, var, t1 - t0, t2 - t1

        result = run_session(job, codec, seed=seed ^ 0x5EED, backend=cfg["backend"],
                             div=div, trunc=cfg["trunc"])
        mean = reconstruct(result.outputs[P0][0], result.outputs[P1][0])
        var = reconstruct(result.outputs[P0][1], result.outputs[P1][1])
        losses = loss_metrics(oracle, Predictions(mean, var))
        stats = result.stats[P0].summary()
        matinv_rounds = stats["per_protocol"].get("pp_matinv", {}).get("rounds", 0)
        runs.append({
            "seed": seed,
            **losses,
            "construction_seconds": result.outputs[P0][2],
            "prediction_seconds": result.outputs[P0][3],
            "rounds": stats["rounds"],
            "per_protocol": stats["per_protocol"],
            "matinv_rounds_expected": expected_rounds("matinv", ds.n),
            "matinv_rounds_recorded": matinv_rounds,
            "predictions_mean": mean.tolist(),
            "predictions_variance": var.tolist(),
        })
        if matinv_rounds != expected_rounds("matinv", ds.n):
            raise RuntimeError("recorded matrix-inversion rounds diverge from the "
                               "closed form")

    mus = [r["loss_mu"] for r in runs]
    vars_ = [r["loss_var"] for r in runs]
    return {
        "n": ds.n, "d": ds.d, "n_test": int(np.atleast_2d(xs).shape[0]),
        "kernel": kernel.kind, "scenario": cfg["scenario"],
        "loss_mu_mean": float(np.mean(mus)), "loss_mu_std": float(np.std(mus)),
        "loss_var_mean": float(np.mean(vars_)), "loss_var_std": float(np.std(vars_)),
        "runs": runs,
    }


def bench_exp(cfg: dict, sizes) -> dict:
    """Accuracy and communication of the exponentiation on random inputs."""
    codec, exp_params, div, _ = session_pieces(cfg)
    rng = np.random.default_rng(cfg["seeds"][0])
    results = []
    for n in sizes:
        u = rng.uniform(exp_params.u_min, 0.0, int(n))
        s0, s1 = share_reals(u, codec, rng)

        def job(rt, shares=(s0, s1)):
            t0 = time.perf_counter()
            out = pp_exp(rt, shares[rt.party], exp_params, policy="strict")
            return out, time.perf_counter() - t0

        result = run_session(job, codec, seed=int(n), backend=cfg["backend"],
                             div=div, trunc=cfg["trunc"])
        got = reconstruct(result.outputs[P0][0], result.outputs[P1][0])
        err = float(np.max(np.abs(got - np.exp(u))))
        stats0 = result.stats[P0].summary()
        stats1 = result.stats[P1].summary()
        scoped = stats0["per_protocol"]["pp_exp"]
        volume_bits = 8 * 8 * (scoped["words_sent"]
                               + stats1["per_protocol"]["pp_exp"]["words_sent"])
        results.append({
            "n": int(n),
            "rounds": scoped["rounds"],
            "rounds_expected": expected_rounds("ppexp"),
            "volume_bits": volume_bits,
            "volume_bits_expected": 2 * int(n) * codec.params.l,
            "max_abs_error": err,
            "seconds": result.outputs[P0][1],
        })
    return {"op": "exp", "results": results}


def bench_matinv(cfg: dict, sizes, runs: int = 10) -> dict:
    """Loss_MI and communication of the matrix inversion on SE gram matrices."""
    codec, _, div, _ = session_pieces(cfg)
    kernel = KernelConfig(kind="se", length_scale=1.0, signal_variance=1.0,
                          noise_variance=0.1)
    results = []
    for n in sizes:
        losses = []
        entry = None
        for run in range(runs):
            rng = np.random.default_rng((int(n) << 20) + run + cfg["seeds"][0])
            x = rng.uniform(-10.0, 10.0, (int(n), 2))
            mat = kernel_matrix_plaintext(x, x, kernel)
            mat += kernel.noise_variance * np.eye(int(n))
            s0, s1 = share_reals(mat, codec, rng)

            def job(rt, shares=(s0, s1)):
                t0 = time.perf_counter()
                out = pp_matinv(rt, shares[rt.party], pivot_domain=kernel.pivot_domain)
                return out, time.perf_counter() - t0

            result = run_session(job, codec, seed=int(n) * 1000 + run,
                                 backend=cfg["backend"], div=div, trunc=cfg["trunc"])
            lam = reconstruct(result.outputs[P0][0], result.outputs[P1][0])
            losses.append(float(np.linalg.norm(mat @ lam - np.eye(int(n)), 2) ** 2))
            if entry is None:
                stats = result.stats[P0].summary()
                entry = {
                    "n": int(n),
                    "rounds": stats["per_protocol"]["pp_matinv"]["rounds"],
                    "rounds_expected": expected_rounds("matinv", int(n)),
                    "volume_words_per_direction":
                        stats["per_protocol"]["pp_matinv"]["words_sent"],
                    "seconds": result.outputs[P0][1],
                }
        entry["loss_mi_mean"] = float(np.mean(losses))
        entry["loss_mi_std"] = float(np.std(losses))
        results.append(entry)
    return {"op": "matinv", "runs": runs, "results": results}


def gen_offline(cfg: dict, out_prefix: str, triples: int, triple_shape,
                matrix_dims, masks: int) -> dict:
    """Pre-generate offline pools for both parties and persist them."""
    codec, exp_params, _, _ = session_pieces(cfg)
    rng = np.random.default_rng(np.random.Philox(cfg["seeds"][0]))
    rmax_enc = exp_params.rmax_enc(codec.params.lf)
    pool0, pool1 = fill_pools(
        rng, codec.params,
        triples=[tuple(triple_shape)] * triples,
        matrix_triples=list(matrix_dims),
        exp_masks=[(tuple(triple_shape), rmax_enc)] * masks,
    )
    paths = (f"{out_prefix}.party0.npz", f"{out_prefix}.party1.npz")
    pool0.save(paths[0])
    pool1.save(paths[1])
    return {"files": list(paths), "triples": triples, "masks": masks,
            "matrix_triples": len(list(matrix_dims))}


def _emit(report: dict, out: str | None):
    text = json.dumps(report, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssgpr",
                                     description="Three-party secret-sharing GPR engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--scenario", choices=["hds", "vds", "pds"])
        p.add_argument("--kernel", choices=["se", "matern32"])
        p.add_argument("--seed", help="comma-separated seed list")
        p.add_argument("--backend", choices=["inproc", "sockets"])
        p.add_argument("--out", help="write the JSON report here")

    p = sub.add_parser("run-gpr", help="end-to-end model construction and prediction")
    common(p)
    p.add_argument("--data", required=True, help="training CSV (features..., target)")
    p.add_argument("--test", help="test-input CSV (features only)")
    p.add_argument("--test-size", type=int, help="hold out the last k rows as test inputs")

    p = sub.add_parser("bench-exp", help="exponentiation accuracy/communication bench")
    common(p)
    p.add_argument("--sizes", default="1000,10000")

    p = sub.add_parser("bench-matinv", help="matrix inversion accuracy/communication bench")
    common(p)
    p.add_argument("--sizes", default="8,16,32")
    p.add_argument("--runs", type=int, default=10)

    p = sub.add_parser("analyze-leakage", help="Theorem 2 leakage enumeration")
    common(p)
    p.add_argument("--m-u", type=int, required=True)
    p.add_argument("--m-r", type=int, required=True)

    p = sub.add_parser("validate-params", help="Theorem 1 parameter check")
    common(p)

    p = sub.add_parser("gen-offline", help="pre-generate offline material files")
    common(p)
    p.add_argument("--prefix", required=True)
    p.add_argument("--triples", type=int, default=0)
    p.add_argument("--triple-shape", default="1")
    p.add_argument("--matrix-dims", default="", help="semicolon-separated m,n,k triples")
    p.add_argument("--masks", type=int, default=0)
    return parser


def _apply_flags(cfg: dict, args) -> dict:
    if args.scenario:
        cfg["scenario"] = args.scenario
    if args.kernel:
        cfg["kernel"] = args.kernel
    if args.seed:
        cfg["seeds"] = [int(s) for s in args.seed.replace(",", " ").split()]
    if args.backend:
        cfg["backend"] = args.backend
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_flags(load_config(args.config), args)
        if args.command == "run-gpr":
            dataset = ingest_csv(args.data, has_header=cfg["has_header"])
            if args.test:
                x_star = read_matrix(args.test, has_header=cfg["has_header"])
            else:
                k = args.test_size or cfg["test_size"] or max(1, dataset.n // 5)
                x_star = dataset.X[-k:]
                dataset = Dataset(dataset.X[:-k], dataset.y[:-k])
            report = run_gpr(dataset, x_star, cfg)
        elif args.command == "bench-exp":
            sizes = [int(s) for s in args.sizes.replace(",", " ").split()]
            report = bench_exp(cfg, sizes)
        elif args.command == "bench-matinv":
            sizes = [int(s) for s in args.sizes.replace(",", " ").split()]
            report = bench_matinv(cfg, sizes, runs=args.runs)
        elif args.command == "analyze-leakage":
            rep = leakage_enumerate(args.m_u, args.m_r)
            report = {
                "m_u": rep.m_u, "m_r": rep.m_r,
                "p_secure": str(rep.p_secure),
                "expected_leakage": str(rep.expected_leakage),
                "p_exact_exposure": str(rep.p_exact_exposure),
                "matches_closed_form": rep.matches_closed_form,
            }
        elif args.command == "validate-params":
            ring = RingParams(cfg["l"], cfg["lf"])
            rep = validate_exp_params(ExpParams(u_min=cfg["u_min"],
                                                r_max=cfg["r_max"]), ring)
            report = {
                "accepted": rep.accepted,
                "required_lf": rep.required_lf,
                "precision_slack_bits": rep.precision_slack_bits,
                "overflow_slack_bits": rep.overflow_slack_bits,
            }
        elif args.command == "gen-offline":
            shape = tuple(int(s) for s in args.triple_shape.replace(",", " ").split())
            dims = [tuple(int(v) for v in grp.replace(",", " ").split())
                    for grp in args.matrix_dims.split(";") if grp.strip()]
            report = gen_offline(cfg, args.prefix, args.triples, shape, dims, args.masks)
        else:  # pragma: no cover - argparse enforces the choices
            raise ValueError(f"unknown command {args.command}")
    except Exception as exc:  # noqa: BLE001 - single CLI error funnel
        print(f"ssgpr: {args.command} failed: {exc}", file=sys.stderr)
        return 2
    _emit(report, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
