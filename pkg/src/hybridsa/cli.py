"""Reproducible experiment runner.

Subcommands: ``run`` (execute a JSON config: simulate seeds, run analyses,
write manifest + CSV/JSON/.dat artifacts), ``verify`` (check a serialized
chain against a preset system), ``list-presets``. The output root defaults
to $HYBRIDSA_OUT. Re-running a config reproduces every non-timestamp byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analyze import (
    build_reach_graph,
    chain_recurrent_estimate,
    load_chain,
    omega_estimate,
    save_reach_graph,
    tail_closeness_diagnostic,
    verify_chain,
)
from .hybrid_time import HybridTime
from .presets import PRESET_NAMES, critical_set_distance, make_preset
from .simulate import (
    AdmissibilityError,
    EscapeError,
    Horizon,
    JumpPolicy,
    PREFER_JUMP,
    StepSchedule,
    benaim_sup,
    euler_simulate,
    interpolate,
    result_to_csv,
)
from .stochastic import NoiseModel, noisy_simulate
from .system import box_region

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_INVALID = 3

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _require_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def _parse_schedule(cfg: dict) -> StepSchedule:
    _require_keys(cfg, {"kind", "a", "h", "values"}, "schedule")
    kind = cfg.get("kind", "power")
    try:
        if kind == "power":
            return StepSchedule.power(float(cfg["a"]))
        if kind == "constant":
            return StepSchedule.constant(float(cfg["h"]))
        if kind == "custom":
            return StepSchedule.custom([float(v) for v in cfg["values"]])
    except AdmissibilityError as exc:
        raise ConfigError(f"inadmissible schedule: {exc}") from exc
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _parse_policy(cfg: Optional[dict]) -> JumpPolicy:
    if cfg is None:
        return PREFER_JUMP
    _require_keys(cfg, {"kind", "p", "seed"}, "policy")
    return JumpPolicy(cfg.get("kind", "jump"), float(cfg.get("p", 0.5)),
                      int(cfg.get("seed", 0)))


def _parse_noise(cfg: Optional[dict]) -> NoiseModel:
    if cfg is None:
        return NoiseModel.none()
    _require_keys(cfg, {"kind", "radius", "sigma", "p"}, "noise")
    kind = cfg.get("kind", "bounded")
    if kind == "bounded":
        return NoiseModel.bounded(float(cfg.get("radius", 0.0)), float(cfg.get("p", 1.0)))
    if kind == "gaussian":
        return NoiseModel.gaussian(float(cfg.get("sigma", 0.0)), float(cfg.get("p", 1.0)))
    raise ConfigError(f"unknown noise kind {kind!r}")


def _parse_horizon(cfg: dict) -> Horizon:
    _require_keys(cfg, {"max_k", "max_j", "max_length"}, "horizon")
    try:
        return Horizon(
            max_k=None if cfg.get("max_k") is None else int(cfg["max_k"]),
            max_j=None if cfg.get("max_j") is None else int(cfg["max_j"]),
            max_length=None if cfg.get("max_length") is None else float(cfg["max_length"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_config(path: Path) -> dict:
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    allowed = {"system", "schedule", "noise", "horizon", "seeds", "x0", "policy",
               "analyses", "out"}
    _require_keys(cfg, allowed, "config")
    for key in ("system", "schedule", "horizon", "seeds"):
        if key not in cfg:
            raise ConfigError(f"config is missing {key!r}")
    _require_keys(cfg["system"], {"preset", "params"}, "system")
    return cfg


def _seed_list(cfg) -> list[int]:
    if isinstance(cfg, list):
        return [int(s) for s in cfg]
    _require_keys(cfg, {"count", "base"}, "seeds")
    base = int(cfg.get("base", 0))
    return [base + i for i in range(int(cfg["count"]))]


def _run_one_seed(bundle, cfg, schedule_cfg, horizon, policy, noise, seed):
    schedule = _parse_schedule(schedule_cfg)  # fresh cache per thread
    if cfg.get("x0") is not None:
        x0 = np.asarray([float(v) for v in cfg["x0"]])
    else:
        x0 = bundle.x0_sampler(np.random.Generator(np.random.Philox(key=[seed, 7 << 56])))
    if bundle.jump_rule_stochastic or not noise.is_null:
        run = noisy_simulate(
            bundle.system, x0, schedule, noise, seed, horizon, policy=policy,
            jump_rule=bundle.jump_rule if bundle.jump_rule_stochastic else None,
        )
        return seed, run.result
    result = euler_simulate(bundle.system, x0, schedule, policy, horizon,
                            jump_rule=bundle.jump_rule)
    return seed, result


def _analysis_omega(results, bundle, params, outdir):
    _require_keys(params, {"kind", "eps"}, "analysis omega")
    eps = float(params.get("eps", 0.05))
    rows = []
    for seed, result in results:
        est = omega_estimate(result, eps=eps)
        entry = {
            "seed": seed,
            "converged": est.converged,
            "tail_threshold": est.tail_threshold,
            "n_points": int(est.points.shape[0]),
            "hausdorff_trace": [[t, d] for t, d in est.hausdorff_trace],
        }
        if bundle.name in ("cubic_reset", "cubic"):
            entry["z_distance_to_0"] = float(np.max(np.abs(est.points[:, 0])))
        if bundle.objective is not None:
            m = bundle.objective.dim
            entry["critical_distance"] = float(
                max(critical_set_distance(p[:m], bundle.objective) for p in est.points)
            )
        rows.append(entry)
    return {"kind": "omega", "eps": eps, "per_seed": rows}


def _analysis_benaim(results, bundle, params, outdir):
    _require_keys(params, {"kind", "T", "checkpoints"}, "analysis benaim")
    T = float(params.get("T", 1.0))
    checkpoints = [int(k) for k in params.get("checkpoints", [10, 100, 1000])]
    table = []
    for seed, result in results:
        table.append([seed] + [benaim_sup(result, T, k) for k in checkpoints])
    dat = ["# k " + " ".join(f"seed_{row[0]}" for row in table)]
    for idx, k in enumerate(checkpoints):
        dat.append(" ".join([str(k)] + [repr(row[1 + idx]) for row in table]))
    (outdir / "plots").mkdir(exist_ok=True)
    (outdir / "plots" / "benaim.dat").write_text("\n".join(dat) + "\n")
    return {"kind": "benaim", "T": T, "checkpoints": checkpoints,
            "per_seed": [{"seed": row[0], "values": row[1:]} for row in table]}


def _analysis_recurrent(results, bundle, params, outdir):
    _require_keys(params, {"kind", "box", "net_radius", "tau", "eps", "internal"},
                  "analysis recurrent")
    lo, hi = params["box"]
    region = box_region(lo, hi, name="analysis-box")
    graph = build_reach_graph(
        bundle.system, region, float(params["net_radius"]), float(params["tau"]),
        float(params["eps"]), internal=bool(params.get("internal", False)),
        jump_rule=None if bundle.jump_rule_stochastic else bundle.jump_rule,
    )
    est = chain_recurrent_estimate(graph)
    save_reach_graph(graph, outdir / "reach_graph")
    return {
        "kind": "recurrent",
        "n_nodes": int(graph.nodes.shape[0]),
        "recurrent_nodes": [int(i) for i in est.nodes],
        "classes": [[int(i) for i in cls] for cls in est.classes],
        "recurrent_points": graph.nodes[list(est.nodes)].tolist() if est.nodes else [],
    }


def _analysis_tail(results, bundle, params, outdir):
    _require_keys(params, {"kind", "T", "starts", "step"}, "analysis tail")
    T = float(params.get("T", 3.0))
    starts = [HybridTime(float(s), 0) for s in params.get("starts", [1.0, 3.0, 5.0])]
    rows_out = []
    for seed, result in results:
        arc = interpolate(result)
        usable = [s for s in starts if s.total < arc.length - T]
        if not usable:
            continue
        table = tail_closeness_diagnostic(
            arc, bundle.system, T, usable, step=float(params.get("step", 0.01)),
        )
        rows_out.append({
            "seed": seed,
            "rows": [
                {"start": [r.start.t, r.start.j], "eps_fit": r.eps_fit,
                 "inconclusive": r.inconclusive}
                for r in table.rows
            ],
            "decaying": table.is_decaying,
        })
    return {"kind": "tail", "T": T, "per_seed": rows_out}


_ANALYSES = {
    "omega": _analysis_omega,
    "benaim": _analysis_benaim,
    "recurrent": _analysis_recurrent,
    "tail": _analysis_tail,
}


def cmd_run(args) -> int:
    try:
        cfg = _load_config(Path(args.config))
        bundle = make_preset(cfg["system"]["preset"], cfg["system"].get("params"))
        _parse_schedule(cfg["schedule"])  # validate early
        horizon = _parse_horizon(cfg["horizon"])
        policy = _parse_policy(cfg.get("policy"))
        noise = _parse_noise(cfg.get("noise"))
        seeds = _seed_list(cfg["seeds"])
        if args.seed_override is not None:
            seeds = [int(args.seed_override)]
        analyses = cfg.get("analyses", [])
        for a in analyses:
            if a.get("kind") not in _ANALYSES:
                raise ConfigError(f"unknown analysis kind {a.get('kind')!r}")
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_root = args.out or cfg.get("out") or os.environ.get("HYBRIDSA_OUT", "hybridsa_out")
    outdir = Path(out_root) / Path(args.config).stem
    (outdir / "runs").mkdir(parents=True, exist_ok=True)
    (outdir / "analysis").mkdir(parents=True, exist_ok=True)

    status = EXIT_OK
    results = []

    def work(seed):
        return _run_one_seed(bundle, cfg, cfg["schedule"], horizon, policy, noise, seed)

    try:
        if args.jobs > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(work, seeds))
        else:
            results = [work(s) for s in seeds]
    except EscapeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        results.append((seeds[len(results)], exc.partial))
        status = EXIT_RUNTIME

    for seed, result in results:
        (outdir / "runs" / f"seed_{seed}.csv").write_text(result_to_csv(result))

    reports = []
    for params in analyses:
        fn = _ANALYSES[params["kind"]]
        try:
            reports.append(fn(results, bundle, params, outdir))
        except Exception as exc:
            reports.append({"kind": params["kind"], "error": str(exc)})
            status = max(status, EXIT_RUNTIME)
    for report in reports:
        (outdir / "analysis" / f"{report['kind']}.json").write_text(
            json.dumps(report, indent=2, sort_keys=True)
        )

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg,
        "seeds": seeds,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(str(outdir))
    return status


def cmd_verify(args) -> int:
    try:
        bundle = make_preset(args.system, json.loads(args.params) if args.params else None)
        chain = load_chain(args.chain)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    verdict = verify_chain(chain, bundle.system, internal=False,
                           sol_tol=float(args.sol_tol))
    print(json.dumps({
        "valid": verdict.valid,
        "failures": [
            {"link": f.link, "kind": f.kind, "detail": f.detail}
            for f in verdict.failures
        ],
    }, indent=2, sort_keys=True))
    return EXIT_OK if verdict.valid else EXIT_INVALID


def cmd_list_presets(_args) -> int:
    for name in sorted(PRESET_NAMES):
        print(f"{name:15s} {PRESET_NAMES[name]}")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="hybridsa")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a JSON experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output root (default $HYBRIDSA_OUT)")
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--seed-override", default=None)
    p_run.set_defaults(fn=cmd_run)

    p_ver = sub.add_parser("verify", help="verify a serialized chain against a preset")
    p_ver.add_argument("chain")
    p_ver.add_argument("--system", required=True)
    p_ver.add_argument("--params", default=None, help="preset params as JSON")
    p_ver.add_argument("--sol-tol", default="1e-6")
    p_ver.set_defaults(fn=cmd_verify)

    p_list = sub.add_parser("list-presets", help="list built-in systems")
    p_list.set_defaults(fn=cmd_list_presets)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
