"""Command-line front end.

Exit codes: 0 on success, 1 when `run --qos-strict` hits QoS violations
(also when `validate-bound` or `grad-check` fails its check), 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .anfis import TrainingSet, default_network, gradient_check, save_network
from .config import ScenarioConfig, parse_scenario
from .errors import ConfigError, DrsimError
from .harness import emit_csv, parse_policy_spec, run_compare, train_anfis
from .netsim import qos_check, run_scenario

OK, CHECK_FAILED, CONFIG_ERROR = 0, 1, 2


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="override the config's seed")
    sub.add_argument("--out", type=Path, default=None, help="write output to this file")
    sub.add_argument("--csv", action="store_true", help="emit CSV instead of a text summary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drsim", description="Dead-reckoning simulation toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="run one scenario and report metrics")
    p_run.add_argument("config", type=Path)
    p_run.add_argument(
        "--qos-strict", action="store_true", help="exit 1 when the QoS profile is violated"
    )
    _add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = subs.add_parser("compare", help="run several threshold policies on one scenario")
    p_cmp.add_argument("config", type=Path)
    p_cmp.add_argument(
        "--policies",
        required=True,
        help=(
            "comma-separated policy specs: fixed:<th>[:<th_or>], "
            "multilevel:<d>:<th>|<d>:<th>..., anfis:<file>[:<min>:<max>], aoi, sr, config"
        ),
    )
    _add_common(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_train = subs.add_parser("train-anfis", help="train an adaptive threshold network")
    p_train.add_argument("config", type=Path)
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--eta", type=float, default=None)
    _add_common(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_bound = subs.add_parser(
        "validate-bound", help="check the worst receiver error against the analytic bound"
    )
    p_bound.add_argument("config", type=Path)
    _add_common(p_bound)
    p_bound.set_defaults(func=_cmd_bound)

    p_grad = subs.add_parser(
        "grad-check", help="compare analytic premise gradients with finite differences"
    )
    _add_common(p_grad)
    p_grad.set_defaults(func=_cmd_grad)

    return parser


def _load_config(path: Path) -> ScenarioConfig:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    return parse_scenario(text, base_dir=path.parent)


def _deliver(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _summary_text(report) -> str:
    lines = [f"{key}: {value:g}" for key, value in report.summary().items()]
    return "\n".join(lines) + "\n"


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    report = run_scenario(cfg.to_scenario(seed=args.seed))
    violations = qos_check(cfg.qos, report) if cfg.qos is not None else []
    if args.csv:
        text = emit_csv(report)
    else:
        text = _summary_text(report)
        for v in violations:
            text += f"qos violation - {v}\n"
        if cfg.qos is not None and not violations:
            text += "qos: met\n"
    _deliver(text, args.out)
    if args.qos_strict and violations:
        return CHECK_FAILED
    return OK


def _cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    specs = [s for s in args.policies.split(",") if s.strip()]
    bounds = (cfg.anfis_train.th_min, cfg.anfis_train.th_max)
    pairs = [
        parse_policy_spec(
            spec, base_dir=args.config.parent, th_bounds=bounds, config_policy=cfg.policy
        )
        for spec in specs
    ]
    table = run_compare(cfg.to_scenario(seed=args.seed), pairs)
    if args.csv:
        text = emit_csv(table)
    else:
        width = max(len(r.label) for r in table.rows)
        lines = [f"{'policy':<{width}}  mean_e_r_m  packets  mean_f_s_hz"]
        for r in table.rows:
            lines.append(
                f"{r.label:<{width}}  {r.mean_e_r_m:10.6f}  {r.packets_sent:7d}"
                f"  {r.mean_update_frequency_hz:11.6f}"
            )
        text = "\n".join(lines) + "\n"
    _deliver(text, args.out)
    return OK


def _cmd_train(args) -> int:
    if args.out is None:
        raise ConfigError(["train-anfis requires --out <network-file>"])
    cfg = _load_config(args.config)
    net, reports = train_anfis(cfg, epochs=args.epochs, eta=args.eta, seed=args.seed)
    save_network(net, args.out)
    lines = []
    if args.csv:
        lines.append("epoch,total_error")
        lines.extend(f"{i + 1},{rep.error:.17g}" for i, rep in enumerate(reports))
    else:
        for i, rep in enumerate(reports):
            flags = ""
            if rep.least_squares_skipped:
                flags += " (least squares skipped: too few records)"
            if rep.ridge_fallback:
                flags += " (ridge fallback)"
            lines.append(f"epoch {i + 1}: error {rep.error:.6g}{flags}")
        lines.append(f"saved network to {args.out}")
    sys.stdout.write("\n".join(lines) + "\n")
    return OK


def _cmd_bound(args) -> int:
    cfg = _load_config(args.config)
    report = run_scenario(cfg.to_scenario(seed=args.seed))
    bound = report.e_max_bound
    holds = bound is not None and report.max_e_r <= bound + 1e-12
    if args.csv:
        text = emit_csv(report)
    else:
        text = (
            f"e_max_bound_m: {bound:g}\n"
            f"max_e_r_m: {report.max_e_r:g}\n"
            f"within_bound: {str(holds).lower()}\n"
        )
    _deliver(text, args.out)
    return OK if holds else CHECK_FAILED


def _cmd_grad(args) -> int:
    seed = 42 if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    universes = ((0.0, 1.0), (0.0, 10.0), (0.0, 5.0))
    worst = 0.0
    rows = []
    for kind in ("gbell", "sigmoid"):
        net = default_network(universes, mf_kind=kind, seed=seed)
        lows = np.array([lo for lo, _ in universes])
        highs = np.array([hi for _, hi in universes])
        inputs = rng.uniform(lows, highs, size=(24, 3))
        targets = rng.uniform(0.1, 0.5, size=24)
        deviation = gradient_check(net, TrainingSet(inputs, targets))
        rows.append((kind, deviation))
        worst = max(worst, deviation)
    passed = worst < 1e-4
    lines = [f"{kind}: max deviation {dev:.3e}" for kind, dev in rows]
    lines.append(f"gradient check: {'pass' if passed else 'FAIL'} (worst {worst:.3e})")
    text = "\n".join(lines) + "\n"
    _deliver(text, args.out)
    return OK if passed else CHECK_FAILED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return CONFIG_ERROR
    except DrsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
