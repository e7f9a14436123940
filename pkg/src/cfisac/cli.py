"""Command-line entry points for reproducible experiments.

Subcommands: gen (dataset), train, eval, sweep, beampattern.  All numeric
work happens in linear units; dBm appears only at this boundary
(p_max_dbm in config files, dBm values for `sweep --param p_max`).

Exit codes: 2 invalid config/arguments, 3 I/O failure, 4 non-finite loss
abort, 5 model/dataset scenario mismatch, 6 missing model for a sweep value.
The environment variable ISAC_SEED, when set, overrides --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .baseline import ns_rzf_beamformer
from .config import (PROFILES, SystemConfig, canonical_json, dbm_to_linear,
                     short_hash)
from .dataset import Dataset, dataset_generate, load_dataset, _atomic_write
from .geometry import build_channels, scene_from_positions, target_steering_per_ap
from .hetgraph import build_graph
from .metrics import (BeamformerSet, beam_pattern, metrics_report,
                      write_beam_pattern_csv)
from .model import GnnHyperparams, GnnModel
from .training import (ConfigMismatchError, TrainConfig, TrainingError,
                       evaluate, train)
from .version import TOOL_VERSION

EXIT_BAD_CONFIG = 2
EXIT_IO = 3
EXIT_NONFINITE = 4
EXIT_HASH_MISMATCH = 5
EXIT_MISSING_MODEL = 6


class MissingModelError(FileNotFoundError):
    pass


def _baseline_rows(system, dataset: Dataset, indices, threads: int = 1):
    """NS-RZF result + metrics per sample, in index order."""
    def one(idx):
        channels = dataset.channels(idx)
        scene = dataset.records[idx].scene()
        result = ns_rzf_beamformer(system, channels,
                                   target_steering=target_steering_per_ap(system, scene))
        report = metrics_report(system, channels, result.beams)
        return idx, result, report

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, indices))
    return [one(idx) for idx in indices]


def _load_experiment(args) -> dict:
    """Merge profile defaults, optional config file, and flag overrides."""
    doc = {"system": PROFILES[args.profile]().to_dict(), "train": TrainConfig().to_dict(),
           "gnn": GnnHyperparams().to_dict()}
    if getattr(args, "config", None):
        try:
            user = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise OSError(f"cannot read config {args.config}: {e}") from e
        for section in ("system", "train", "gnn"):
            if section in user:
                doc[section].update(user[section])
    if "p_max_dbm" in doc["system"]:
        doc["system"]["p_max"] = dbm_to_linear(float(doc["system"].pop("p_max_dbm")))
    for flag, section, key in (("rho", "train", "rho"), ("epochs", "train", "max_epochs")):
        value = getattr(args, flag, None)
        if value is not None:
            doc[section][key] = value
    seed = _resolve_seed(args)
    if seed is not None:
        doc["train"]["seed"] = seed
        doc["gnn"]["seed"] = seed
    return doc


def _resolve_seed(args) -> int | None:
    env = os.environ.get("ISAC_SEED")
    if env is not None:
        return int(env)
    return getattr(args, "seed", None)


def _experiment_hash(doc: dict) -> str:
    return short_hash({"system": doc["system"], "train": doc["train"], "gnn": doc["gnn"]})


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    doc = _load_experiment(args)
    if args.n < 1:
        print("gen: --n must be >= 1", file=sys.stderr)
        return EXIT_BAD_CONFIG
    system = SystemConfig.from_dict(doc["system"])
    seed = _resolve_seed(args)
    manifest = dataset_generate(system, args.n, seed if seed is not None else 0,
                                args.out, threads=args.threads)
    print(f"dataset: {args.n} samples -> {args.out}")
    print(f"  scenario_hash={manifest['scenario_hash']} config_hash={manifest['config_hash']}")
    print(f"  split: {len(manifest['train_indices'])} train / "
          f"{len(manifest['test_indices'])} test")
    return 0


def cmd_train(args) -> int:
    doc = _load_experiment(args)
    dataset = load_dataset(args.data)
    system_override = SystemConfig.from_dict(doc["system"])
    if system_override.scenario_hash() != dataset.config.scenario_hash():
        print("train: config scenario differs from dataset scenario", file=sys.stderr)
        return EXIT_BAD_CONFIG
    # dataset owns the scenario; config supplies the constraint knobs
    system = dataset.config.replace(p_max=system_override.p_max,
                                    gamma_min=system_override.gamma_min)
    hyper = GnnHyperparams.from_dict(doc["gnn"])
    tcfg = TrainConfig.from_dict(doc["train"])
    model = GnnModel.init(hyper, system)
    model.train_meta["experiment_hash"] = _experiment_hash(doc)
    model, log = train(model, dataset, tcfg, out_dir=args.out,
                       log_every=args.log_every)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    log.write_csv(out / "train_log.csv",
                  header_comments=[f"# cfisac train v{TOOL_VERSION}",
                                   f"# config_hash={_experiment_hash(doc)}"])
    best = model.train_meta.get("best_val_loss")
    print(f"trained {len(log.records)} epochs; best val loss {best:.6f}")
    print(f"model -> {out / 'model.json'}")
    return 0


def _eval_rows_csv(path: Path, comments: list[str], header: list[str],
                   rows: list[list], footer: list[str]) -> None:
    lines = comments + [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else
                              (repr(v) if isinstance(v, float) else str(v))
                              for v in row))
    lines += footer
    _atomic_write(path, "\n".join(lines) + "\n")


def cmd_eval(args) -> int:
    model = GnnModel.load(args.model)
    dataset = load_dataset(args.data)
    summary = evaluate(model, dataset, split=args.split)
    system = model.system

    comments = [f"# cfisac eval v{TOOL_VERSION}",
                f"# config_hash={system.config_hash()} scenario_hash={system.scenario_hash()}"]
    if not args.baseline:
        header = ["idx", "rate", "sensing_snr", "snr_feasible", "p_ap_max"]
        rows = [[r.idx, r.rate, r.sensing_snr, int(r.snr_feasible), r.p_ap_max]
                for r in summary.rows]
        footer = [f"# aggregate method=sacgnn mean_rate={summary.mean_rate!r} "
                  f"median_rate={summary.median_rate!r} mean_snr={summary.mean_snr!r} "
                  f"feasible_frac={summary.feasible_frac!r} max_p_ap={summary.max_p_ap!r}"]
        _eval_rows_csv(Path(args.report), comments, header, rows, footer)
    else:
        header = ["idx", "method", "rate", "sensing_snr", "snr_feasible", "p_ap_max",
                  "kappa", "feasible", "nullspace_dim"]
        rows = [[r.idx, "sacgnn", r.rate, r.sensing_snr, int(r.snr_feasible),
                 r.p_ap_max, None, None, None] for r in summary.rows]
        base_rates, base_feas = [], []
        for idx, result, report in _baseline_rows(system, dataset,
                                                  dataset.split(args.split),
                                                  args.threads):
            rows.append([idx, "ns-rzf", report.sum_rate, report.sensing_snr,
                         int(report.sensing_feasible), float(report.per_ap_power.max()),
                         result.kappa, int(result.feasible), result.nullspace_dim])
            base_rates.append(report.sum_rate)
            base_feas.append(result.feasible)
        footer = [f"# aggregate method=sacgnn mean_rate={summary.mean_rate!r} "
                  f"median_rate={summary.median_rate!r} mean_snr={summary.mean_snr!r} "
                  f"feasible_frac={summary.feasible_frac!r} max_p_ap={summary.max_p_ap!r}",
                  f"# aggregate method=ns-rzf mean_rate={float(np.mean(base_rates))!r} "
                  f"feasible_frac={float(np.mean(base_feas))!r}"]
        _eval_rows_csv(Path(args.report), comments, header, rows, footer)
    print(f"eval: {len(summary.rows)} samples, mean rate {summary.mean_rate:.4f}, "
          f"feasible {100 * summary.feasible_frac:.1f}% -> {args.report}")
    return 0


def sweep_value_tag(value: float) -> str:
    return f"{value:g}"


def sweep_model_path(models_dir: str | Path, param: str, value: float) -> Path:
    return Path(models_dir) / f"{param}={sweep_value_tag(value)}" / "model.json"


def cmd_sweep(args) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        print("sweep: empty --values list", file=sys.stderr)
        return EXIT_BAD_CONFIG
    doc = _load_experiment(args)
    dataset = load_dataset(args.data)
    base_system = SystemConfig.from_dict(doc["system"])
    out_rows = []
    for value in values:
        model_path = sweep_model_path(args.models, args.param, value)
        if not model_path.exists():
            raise MissingModelError(f"sweep: no model for {args.param}={value:g} "
                                    f"(expected {model_path})")
        model = GnnModel.load(model_path)
        if args.param == "gamma_min":
            gamma_min, p_max = value, base_system.p_max
        else:
            gamma_min, p_max = base_system.gamma_min, dbm_to_linear(value)
        summary = evaluate(model, dataset, split="test")
        snrs = np.array([r.sensing_snr for r in summary.rows])
        out_rows.append([value, "sacgnn", summary.mean_rate,
                         float(np.mean(snrs < gamma_min))])
        system = dataset.config.replace(p_max=p_max, gamma_min=gamma_min)
        rates, infeasible = [], []
        for _, result, report in _baseline_rows(system, dataset,
                                                dataset.split("test"), args.threads):
            rates.append(report.sum_rate)
            infeasible.append(not result.feasible)
        out_rows.append([value, "ns-rzf", float(np.mean(rates)), float(np.mean(infeasible))])

    lines = [f"# cfisac sweep v{TOOL_VERSION} param={args.param}",
             f"# config_hash={_experiment_hash(doc)}",
             "param_value,method,mean_rate,violation_rate"]
    for value, method, rate, viol in out_rows:
        lines.append(f"{value:g},{method},{rate!r},{viol!r}")
    _atomic_write(Path(args.report), "\n".join(lines) + "\n")
    print(f"sweep {args.param}: {len(values)} values -> {args.report}")
    return 0


def cmd_beampattern(args) -> int:
    model = GnnModel.load(args.model)
    system = model.system
    try:
        scene_doc = json.loads(Path(args.scene).read_text())
    except OSError as e:
        raise OSError(f"cannot read scene {args.scene}: {e}") from e
    users = scene_doc["users"]
    if len(users) != system.k_users:
        print(f"beampattern: scene has {len(users)} users, model expects "
              f"{system.k_users}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if not 1 <= args.ap <= system.n_tx:
        print(f"beampattern: --ap must be in 1..{system.n_tx}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    try:
        n_phi, n_theta = (int(x) for x in args.grid.lower().split("x"))
        if n_phi < 1 or n_theta < 1:
            raise ValueError
    except ValueError:
        print(f"beampattern: bad --grid '{args.grid}' (expected PHIxTHETA)", file=sys.stderr)
        return EXIT_BAD_CONFIG

    scene = scene_from_positions(system, users, scene_doc["target"],
                                 int(scene_doc.get("seed", 0)))
    channels = build_channels(system, scene)
    graph = build_graph(system, channels)
    beams = model.beamformers_for(graph)
    f_i = beams[args.ap - 1]

    phi_axis = np.linspace(-np.pi, np.pi, n_phi)
    theta_axis = np.linspace(0.0, np.pi, n_theta)
    phi, theta = [g.reshape(-1) for g in np.meshgrid(phi_axis, theta_axis, indexing="ij")]
    gains = beam_pattern(f_i, phi, theta, system.m_v, system.m_h)
    write_beam_pattern_csv(args.out, phi, theta, gains,
                           header_comments=[f"# cfisac beampattern v{TOOL_VERSION} ap={args.ap}",
                                            f"# config_hash={system.config_hash()}"])
    print(f"beampattern: AP {args.ap}, {n_phi}x{n_theta} grid -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfisac",
                                     description="Cell-free ISAC beamforming experiments")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for sample-parallel stages")
    parser.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                        help="built-in scenario profile (config file overrides)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model (optionally with the baseline)")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=["train", "test", "all"])
    p.add_argument("--report", required=True)
    p.add_argument("--baseline", choices=["ns-rzf"], default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate trained models across a parameter")
    p.add_argument("--param", required=True, choices=["gamma_min", "p_max"])
    p.add_argument("--values", required=True,
                   help="comma-separated values (dBm for p_max)")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--models", required=True,
                   help="directory of <param>=<value>/model.json entries")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("beampattern", help="export a beam-pattern grid CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--scene", required=True, help="scene JSON (users/target/seed)")
    p.add_argument("--ap", type=int, required=True, help="1-based transmit AP index")
    p.add_argument("--grid", default="181x91", help="PHIxTHETA grid sizes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_beampattern)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MissingModelError as e:
        print(str(e), file=sys.stderr)
        return EXIT_MISSING_MODEL
    except ConfigMismatchError as e:
        print(f"scenario mismatch: {e}", file=sys.stderr)
        return EXIT_HASH_MISMATCH
    except TrainingError as e:
        print(f"training aborted: {e}", file=sys.stderr)
        return EXIT_NONFINITE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
