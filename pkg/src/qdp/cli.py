"""Command-line driver: train, certify, attack, sweep and report.

One JSON config document drives every subcommand; command-line flags
override individual fields. Every random choice is derived from the
single root seed through named substreams, so any subcommand can be
re-run on its own and reproduce byte-identical outputs. The effective
(defaults-resolved) config is echoed into the output directory and is
itself a valid --config.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import attack as attack_mod
from . import report as report_mod
from .certify import certify_finite, certify_infinite
from .circuits import compose_noise
from .classify import predict
from .seeding import stream_seed, substream
from .train import (
    ModelArtifact,
    TrainingConfig,
    bundled_iris_path,
    load_iris,
    load_model,
    model_from_dict,
    model_to_dict,
    preprocess,
    save_loss_trace,
    save_model,
    train,
    write_text_atomic,
)

CONFIG_VERSION = 1

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "dataset": None,  # null -> bundled Iris CSV
    "model": None,  # null -> <out_dir>/model.json
    "out_dir": "out",
    "seed": 0,
    "jobs": 1,
    "train": {
        "epochs": 50,
        "learning_rate": 0.01,
        "layers": 5,
        "grad_step": 0.01,
        "per_example": True,
    },
    "noise": {"p": 0.5, "p_list": None},
    "certify": {
        "mode": "infinite",
        "tau_d": 0.02,
        "d_meas": 2,
        "zeta": None,
        "shots": None,
        "settings": None,  # optional list of {p | p_list, tau_d}
    },
    "attack": {"radius": 0.1, "steps": 50, "n_samp": None, "dump_traces": False},
    "sweep": {
        "p_values": [0.0, 0.5, 0.8],
        "radii": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
        "n_samp": 300,
        "steps": 50,
    },
}


class ConfigError(Exception):
    """Invalid or inconsistent run configuration (exit code 2)."""


def _float_list(text: str, flag: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"{flag}: expected comma-separated numbers, got {text!r}") from exc


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(doc) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"{path}: unknown config fields {sorted(unknown)}")
    return _deep_merge(DEFAULT_CONFIG, doc)


def _apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    top = {
        "dataset": args.dataset,
        "model": args.model,
        "out_dir": args.out_dir,
        "seed": args.seed,
        "jobs": args.jobs,
    }
    for key, val in top.items():
        if val is not None:
            cfg[key] = val
    sections = {
        "train": ("epochs", "learning_rate", "layers", "grad_step"),
        "certify": ("mode", "tau_d", "zeta", "shots", "d_meas"),
        "attack": ("radius", "steps", "n_samp"),
    }
    for section, keys in sections.items():
        for key in keys:
            val = getattr(args, key, None)
            if val is not None:
                cfg[section][key] = val
    if getattr(args, "full_batch", False):
        cfg["train"]["per_example"] = False
    if getattr(args, "dump_traces", False):
        cfg["attack"]["dump_traces"] = True
    if getattr(args, "p", None) is not None and getattr(args, "p_list", None):
        raise ConfigError("--p and --p-list are mutually exclusive")
    if getattr(args, "p", None) is not None:
        cfg["noise"] = {"p": args.p, "p_list": None}
    if getattr(args, "p_list", None):
        cfg["noise"] = {"p": None, "p_list": [float(v) for v in args.p_list.split(",")]}
    if getattr(args, "p_values", None) is not None:
        cfg["sweep"]["p_values"] = _float_list(args.p_values, "--p-values")
    if getattr(args, "radii", None) is not None:
        cfg["sweep"]["radii"] = _float_list(args.radii, "--radii")
    if getattr(args, "sweep_n_samp", None) is not None:
        cfg["sweep"]["n_samp"] = args.sweep_n_samp
    return cfg


def resolve_noise(noise_cfg: dict) -> float:
    p, p_list = noise_cfg.get("p"), noise_cfg.get("p_list")
    if p is not None and p_list is not None:
        raise ConfigError("config: noise.p and noise.p_list are mutually exclusive")
    if p_list is not None:
        return compose_noise(p_list)
    if p is None:
        raise ConfigError("config: one of noise.p or noise.p_list is required")
    return float(p)


def _load_dataset(cfg: dict):
    path = cfg["dataset"] or bundled_iris_path()
    try:
        features, labels = load_iris(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"dataset file not found: {path}") from exc
    return preprocess(features, labels, stream_seed(cfg["seed"], "data-split"))


def _model_path(cfg: dict) -> str:
    return cfg["model"] or os.path.join(cfg["out_dir"], "model.json")


def _echo_config(cfg: dict, subcommand: str) -> None:
    echo = copy.deepcopy(cfg)
    echo["model"] = _model_path(cfg)
    echo["dataset"] = cfg["dataset"] or bundled_iris_path()
    path = os.path.join(cfg["out_dir"], f"effective_config.{subcommand}.json")
    write_text_atomic(path, json.dumps(echo, indent=2) + "\n")


def _require_model(cfg: dict) -> ModelArtifact:
    path = _model_path(cfg)
    if not os.path.exists(path):
        raise ConfigError(f"model file not found: {path} (run `qdp train` first)")
    return load_model(path)


def cmd_train(cfg: dict) -> int:
    dataset = _load_dataset(cfg)
    tcfg = TrainingConfig(
        epochs=int(cfg["train"]["epochs"]),
        learning_rate=float(cfg["train"]["learning_rate"]),
        layers=int(cfg["train"]["layers"]),
        grad_step=float(cfg["train"]["grad_step"]),
        seed=stream_seed(cfg["seed"], "train"),
        per_example=bool(cfg["train"]["per_example"]),
    )
    model = train(dataset, tcfg)
    os.makedirs(cfg["out_dir"], exist_ok=True)
    save_model(model, _model_path(cfg))
    save_loss_trace(model, os.path.join(cfg["out_dir"], "loss_trace.csv"))
    _echo_config(cfg, "train")
    final = model.loss_trace[-1]
    print(f"model written to {_model_path(cfg)}")
    print(
        f"final loss {final.loss:.6f}, train accuracy {final.train_accuracy:.4f}, "
        f"test accuracy {final.test_accuracy:.4f}"
    )
    return 0


def _certify_settings(cfg: dict) -> list[dict]:
    section = cfg["certify"]
    settings = section["settings"]
    if settings is None:
        settings = [{"p": None, "p_list": None, "tau_d": section["tau_d"]}]
        settings[0].update(
            {k: cfg["noise"][k] for k in ("p", "p_list") if cfg["noise"][k] is not None}
        )
    resolved = []
    for s in settings:
        noise = {"p": s.get("p"), "p_list": s.get("p_list")}
        resolved.append(
            {"p": resolve_noise(noise), "tau_d": float(s.get("tau_d", section["tau_d"]))}
        )
    return resolved


def cmd_certify(cfg: dict) -> int:
    model = _require_model(cfg)
    dataset = _load_dataset(cfg)
    section = cfg["certify"]
    mode = section["mode"]
    if mode not in ("infinite", "finite"):
        raise ConfigError(f"certify.mode must be 'infinite' or 'finite', got {mode!r}")
    if mode == "finite":
        if section["shots"] is None:
            raise ConfigError("certify.mode = finite requires certify.shots")
        if section["zeta"] is None:
            raise ConfigError("certify.mode = finite requires certify.zeta")
    d_meas = int(section["d_meas"])

    out_settings = []
    for si, setting in enumerate(_certify_settings(cfg)):
        p, tau_d = setting["p"], setting["tau_d"]
        certs = []
        for i, ex in enumerate(dataset.test):
            scores = model.noisy_scores(ex.features, p)
            label = predict(scores)
            if mode == "infinite":
                cert = certify_infinite(scores, label, p, tau_d, d_meas)
            else:
                rng = substream(cfg["seed"], "certify", si, i)
                est = model.sampled_scores(ex.features, p, int(section["shots"]), rng)
                cert = certify_finite(
                    est, predict(est), float(section["zeta"]), p, tau_d, d_meas
                )
            doc = cert.to_dict()
            doc.update({"example": i, "true_label": ex.label, "predicted": label})
            certs.append(doc)
        n_cert = sum(c["certified"] for c in certs)
        threshold = certs[0]["threshold"]
        out_settings.append(
            {
                "p": p,
                "tau_d": tau_d,
                "mode": mode,
                "threshold": threshold,
                "certified_count": n_cert,
                "total": len(certs),
                "certificates": certs,
            }
        )
        threshold_txt = "n/a" if threshold is None else f"{threshold:.6g}"
        print(
            f"setting p={p:g} tau_d={tau_d:g}: threshold {threshold_txt}, "
            f"certified {n_cert}/{len(certs)}"
        )

    os.makedirs(cfg["out_dir"], exist_ok=True)
    doc = {"version": 1, "d_meas": d_meas, "settings": out_settings}
    path = os.path.join(cfg["out_dir"], "certificates.json")
    write_text_atomic(path, json.dumps(doc, indent=2) + "\n")
    _echo_config(cfg, "certify")
    print(f"certificates written to {path}")
    return 0


def cmd_attack(cfg: dict) -> int:
    model = _require_model(cfg)
    dataset = _load_dataset(cfg)
    p = resolve_noise(cfg["noise"])
    section = cfg["attack"]
    config = attack_mod.AttackConfig(float(section["radius"]), int(section["steps"]))
    results = []
    trace_lines = []
    for i, ex in enumerate(dataset.test):
        trace = attack_mod.ifgsm(
            model, ex.features, ex.label, config, p,
            shots=None, seed=stream_seed(cfg["seed"], "attack", i),
        )
        fin = trace.final
        scores = model.noisy_scores(fin.x, p)
        results.append(
            {
                "example": i,
                "true_label": ex.label,
                "success": trace.success,
                "final_label": fin.predicted,
                "final_scores": [float(s) for s in scores.scores],
                "l2_distance": fin.l2_distance,
                "trace_distance": fin.trace_distance,
            }
        )
        if section["dump_traces"]:
            for step, it in enumerate(trace.iterates):
                trace_lines.append(
                    json.dumps(
                        {
                            "example": i,
                            "step": step,
                            "x": [float(v) for v in it.x],
                            "loss": it.loss,
                            "l2": it.l2_distance,
                            "trace": it.trace_distance,
                            "predicted": it.predicted,
                        }
                    )
                )
    os.makedirs(cfg["out_dir"], exist_ok=True)
    n_success = sum(r["success"] for r in results)
    doc = {
        "version": 1,
        "p": p,
        "radius": config.radius,
        "steps": config.steps,
        "successes": n_success,
        "total": len(results),
        "results": results,
    }
    path = os.path.join(cfg["out_dir"], "attack_report.json")
    write_text_atomic(path, json.dumps(doc, indent=2) + "\n")
    if section["dump_traces"]:
        trace_path = os.path.join(cfg["out_dir"], "traces.jsonl")
        write_text_atomic(trace_path, "\n".join(trace_lines) + "\n")
        print(f"attack traces written to {trace_path}")
    _echo_config(cfg, "attack")
    print(f"attack report written to {path}")
    print(f"label flips: {n_success}/{len(results)} at radius {config.radius:g}, p={p:g}")
    return 0


def _sweep_cell_worker(task: dict) -> dict:
    model = model_from_dict(task["model"])
    features, labels = load_iris(task["dataset"])
    dataset = preprocess(features, labels, task["split_seed"])
    config = attack_mod.AttackConfig(task["radius"], task["steps"])
    return attack_mod.sweep_cell(
        model, dataset.test, task["p"], task["radius"], config,
        task["n_samp"], task["seed"],
    )


def cmd_sweep(cfg: dict) -> int:
    model = _require_model(cfg)
    section = cfg["sweep"]
    radii = [float(r) for r in section["radii"]]
    p_values = [float(p) for p in section["p_values"]]
    if not radii:
        raise ConfigError("sweep.radii must not be empty")
    if not p_values:
        raise ConfigError("sweep.p_values must not be empty")
    tasks = [
        {
            "model": model_to_dict(model),
            "dataset": cfg["dataset"] or bundled_iris_path(),
            "split_seed": stream_seed(cfg["seed"], "data-split"),
            "p": p,
            "radius": radius,
            "steps": int(section["steps"]),
            "n_samp": section["n_samp"],
            "seed": cfg["seed"],
        }
        for p in p_values
        for radius in radii
    ]
    jobs = int(cfg["jobs"])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell_worker, tasks))
    else:
        rows = [_sweep_cell_worker(t) for t in tasks]
    lines = ["p,L,acc,n_samp,seed"]
    for row in rows:
        n_samp = "" if row["n_samp"] is None else row["n_samp"]
        lines.append(f"{row['p']:g},{row['L']:g},{row['acc']!r},{n_samp},{row['seed']}")
    os.makedirs(cfg["out_dir"], exist_ok=True)
    path = os.path.join(cfg["out_dir"], "sweep.csv")
    write_text_atomic(path, "\n".join(lines) + "\n")
    _echo_config(cfg, "sweep")
    print(f"sweep written to {path} ({len(rows)} rows)")
    return 0


def cmd_report(cfg: dict) -> int:
    out_dir = cfg["out_dir"]
    made = []
    trace_csv = os.path.join(out_dir, "loss_trace.csv")
    if os.path.exists(trace_csv):
        made.append(
            report_mod.render_training_curves(
                trace_csv, os.path.join(out_dir, "training_curves.png")
            )
        )
    sweep_csv = os.path.join(out_dir, "sweep.csv")
    if os.path.exists(sweep_csv):
        made.append(
            report_mod.render_sweep(sweep_csv, os.path.join(out_dir, "sweep_accuracy.png"))
        )
    certs = os.path.join(out_dir, "certificates.json")
    if os.path.exists(certs):
        made.append(
            report_mod.render_certificates(
                certs, os.path.join(out_dir, "certificates.png")
            )
        )
    traces = os.path.join(out_dir, "traces.jsonl")
    if os.path.exists(traces):
        made.append(
            report_mod.render_attack_paths(
                traces, os.path.join(out_dir, "attack_paths.png")
            )
        )
    if os.path.exists(_model_path(cfg)):
        model = _require_model(cfg)
        dataset = _load_dataset(cfg)
        examples = [ex for ex in dataset.test if ex.label == 0][:3]
        made.append(
            report_mod.render_certified_radius_vs_noise(
                model, examples, os.path.join(out_dir, "certified_radius.png")
            )
        )
    if not made:
        raise ConfigError(f"no renderable artifacts found in {out_dir}")
    for path in made:
        print(f"rendered {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdp",
        description="Depolarisation-noise privacy and certified robustness toolkit",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    commands = {
        "train": cmd_train,
        "certify": cmd_certify,
        "attack": cmd_attack,
        "sweep": cmd_sweep,
        "report": cmd_report,
    }
    for name in commands:
        sp = sub.add_parser(name)
        sp.set_defaults(func=commands[name])
        sp.add_argument("--config", default=None, help="JSON run configuration")
        sp.add_argument("--dataset", default=None, help="Iris CSV path")
        sp.add_argument("--model", default=None, help="model JSON path")
        sp.add_argument("--out-dir", dest="out_dir", default=None)
        sp.add_argument("--seed", type=int, default=None, help="root seed")
        sp.add_argument("--jobs", type=int, default=None, help="parallel workers")
        if name == "train":
            sp.add_argument("--epochs", type=int, default=None)
            sp.add_argument("--learning-rate", dest="learning_rate", type=float,
                            default=None)
            sp.add_argument("--layers", type=int, default=None)
            sp.add_argument("--grad-step", dest="grad_step", type=float, default=None)
            sp.add_argument("--full-batch", dest="full_batch", action="store_true")
        if name in ("certify", "attack"):
            sp.add_argument("--p", type=float, default=None)
            sp.add_argument("--p-list", dest="p_list", default=None,
                            help="comma-separated channel parameters")
        if name == "certify":
            sp.add_argument("--mode", choices=("infinite", "finite"), default=None)
            sp.add_argument("--tau-d", dest="tau_d", type=float, default=None)
            sp.add_argument("--zeta", type=float, default=None)
            sp.add_argument("--shots", type=int, default=None)
            sp.add_argument("--d-meas", dest="d_meas", type=int, default=None)
        if name == "attack":
            sp.add_argument("--radius", type=float, default=None)
            sp.add_argument("--steps", type=int, default=None)
            sp.add_argument("--n-samp", dest="n_samp", type=int, default=None)
            sp.add_argument("--traces", dest="dump_traces", action="store_true")
        if name == "sweep":
            sp.add_argument("--p-values", dest="p_values", default=None,
                            help="comma-separated noise levels")
            sp.add_argument("--radii", default=None, help="comma-separated radii")
            sp.add_argument("--n-samp", dest="sweep_n_samp", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return args.func(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
