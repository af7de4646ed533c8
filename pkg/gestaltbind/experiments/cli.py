"""
Command-line entry point.

    gestaltbind gen-data pendulum --output pendulum.csv
    gestaltbind train --preset pendulum
    gestaltbind bind --preset pendulum-exp4 --seeds 0-4
    gestaltbind perspective --preset perspective-default --angles 10 20 30
    gestaltbind ablation --preset walker-ablation
    gestaltbind report gestaltbind_runs/pendulum-exp4

Exit status: 0 ok, 1 a seed or run failed, 2 configuration or usage error.
"""

import argparse
import json
import logging
import os
import sys

from termcolor import colored

import gestaltbind.gestaltbind as gb
import gestaltbind.gestaltbind.macros as macros
from gestaltbind.datagen import save_csv
from gestaltbind.gestaltbind.errors import ConfigError, GestaltError, ReportError

from .config import available_presets, make_config
from .harness import build_sequence, build_test_sequence, run
from .report import report

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def parse_seeds(text):
    """'0-9' or '0,3,5' -> list of ints."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError("seeds", f"cannot parse '{text}'; use e.g. 0-9 or 0,3,5")
    return seeds


def _add_common(parser):
    parser.add_argument(
        "--preset",
        type=str,
        default=None,
        help=f"named preset or path to a preset JSON; available: {', '.join(available_presets())}",
    )
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="JSON file merged on top of the preset",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config field, e.g. --set inference.steps=500 (repeatable, JSON values)",
    )
    parser.add_argument(
        "--seeds",
        type=str,
        default=None,
        help="seed list, e.g. 0-9 or 0,3,5",
    )
    parser.add_argument(
        "--output-dir",
        type=str,
        default=None,
        help="artifact directory; defaults to $GESTALTBIND_OUTPUT_ROOT/<experiment name>",
    )
    parser.add_argument(
        "--num-workers",
        type=int,
        default=None,
        help="parallel seed workers (default $GESTALTBIND_NUM_WORKERS)",
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="debug-level logging",
    )


def _add_model_run(parser):
    parser.add_argument(
        "--model-run",
        type=str,
        default=None,
        help="training run whose seed_XXX/model checkpoints are used (name under the output root or a path)",
    )


def _add_betas(parser):
    parser.add_argument("--beta-pos", type=float, default=None, help="loss weight of the posture Gestalt")
    parser.add_argument("--beta-dir", type=float, default=None, help="loss weight of the motion direction Gestalt")
    parser.add_argument("--beta-mag", type=float, default=None, help="loss weight of the motion magnitude Gestalt")
    parser.add_argument("--steps", type=int, default=None, help="number of inference frames")


def _add_binding_flags(parser):
    parser.add_argument("--eta-f", type=float, default=None, help="binding learning rate")
    parser.add_argument("--gamma-f", type=float, default=None, help="binding momentum")
    parser.add_argument("--init-bias", type=float, default=None, help="initial binding bias (all entries)")
    parser.add_argument(
        "--permutation",
        type=int,
        nargs="+",
        default=None,
        help="feature order of the test data: observed feature k is model feature perm[k]",
    )


def _add_perspective_flags(parser):
    parser.add_argument("--eta-r", type=float, default=None, help="rotation learning rate")
    parser.add_argument("--gamma-r", type=float, default=None, help="rotation momentum")
    parser.add_argument("--eta-b", type=float, default=None, help="translation learning rate")
    parser.add_argument("--gamma-b", type=float, default=None, help="translation momentum")
    parser.add_argument(
        "--angles", type=float, nargs="+", default=None, help="disturbance rotation in degrees (x y z, or one angle in 2D)"
    )
    parser.add_argument("--offset", type=float, nargs="+", default=None, help="disturbance translation")


FLAG_FIELDS = dict(
    beta_pos="inference.betas.posture",
    beta_dir="inference.betas.direction",
    beta_mag="inference.betas.magnitude",
    steps="inference.steps",
    eta_f="inference.eta_f",
    gamma_f="inference.gamma_f",
    init_bias="inference.init_bias",
    eta_r="inference.eta_r",
    gamma_r="inference.gamma_r",
    eta_b="inference.eta_b",
    gamma_b="inference.gamma_b",
    permutation="data.permutation",
    angles="data.disturbance.angles_deg",
    offset="data.disturbance.translation",
    model_run="model_run",
    epochs="model.epochs",
    hidden_size="model.hidden_size",
    latent_size="model.latent_size",
    encoding="encoding",
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gestaltbind",
        description="Gestalt models of biological motion and retrospective inference of binding and perspective.",
    )
    parser.add_argument("--version", action="version", version=gb.__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a motion sequence to CSV")
    p.add_argument("source", choices=["pendulum", "walker"], help="sequence generator")
    p.add_argument("--output", type=str, default=None, help="CSV path (default <output root>/data/<source>.csv)")
    p.add_argument("--test", action="store_true", help="write the test variant (permuted / disturbed)")
    _add_common(p)

    p = sub.add_parser("train", help="train the Gestalt VAEs for every seed")
    p.add_argument("--epochs", type=int, default=None, help="training epochs per VAE")
    p.add_argument("--hidden-size", type=int, default=None, help="hidden units of encoder and decoder")
    p.add_argument("--latent-size", type=int, default=None, help="latent units")
    p.add_argument("--encoding", choices=["popcode", "raw"], default=None, help="input encoding")
    _add_common(p)

    p = sub.add_parser("bind", help="infer the feature binding of permuted test data")
    _add_model_run(p)
    _add_betas(p)
    _add_binding_flags(p)
    _add_common(p)

    p = sub.add_parser("perspective", help="infer rotation and translation of disturbed test data")
    _add_model_run(p)
    _add_betas(p)
    _add_perspective_flags(p)
    _add_common(p)

    p = sub.add_parser("joint", help="infer binding and perspective together")
    _add_model_run(p)
    _add_betas(p)
    _add_binding_flags(p)
    _add_perspective_flags(p)
    _add_common(p)

    p = sub.add_parser("ablation", help="run every arm of an ablation on the same seeds")
    _add_common(p)

    p = sub.add_parser("report", help="summarize finished runs into tables and figures")
    p.add_argument("run_dirs", nargs="+", help="run directories")
    p.add_argument("--output-dir", type=str, default=None, help="report directory (default <first run>/report)")
    p.add_argument("--verbose", action="store_true", help="debug-level logging")
    return parser


def config_from_args(args, kind):
    overrides = []
    if args.preset is None and args.config is None:
        default_kind = "train" if kind == "gen-data" else kind
        overrides += [f'kind="{default_kind}"', f'name="{kind}"']
    if args.seeds is not None:
        overrides.append(f"seeds={json.dumps(parse_seeds(args.seeds))}")
    num_workers = args.num_workers or macros.GESTALTBIND_NUM_WORKERS
    if num_workers != 1:
        overrides.append(f"num_workers={num_workers}")
    for flag, field in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{field}={json.dumps(value)}")
    overrides += args.overrides
    config = make_config(args.preset, args.config, overrides, args.output_dir)
    if kind != "gen-data" and config.kind != kind:
        raise ConfigError("kind", f"preset describes a '{config.kind}' experiment, not '{kind}'")
    return config


def gen_data(args):
    overrides = list(args.overrides)
    args.overrides = [f'data.source="{args.source}"'] + overrides
    config = config_from_args(args, "gen-data")
    if args.test:
        seq, _, _ = build_test_sequence(config, config.seeds[0])
    else:
        seq = build_sequence(config.data)
    path = args.output or os.path.join(macros.GESTALTBIND_OUTPUT_ROOT, "data", f"{args.source}.csv")
    save_csv(seq, path)
    print(
        colored("Wrote sequence", "green"),
        f"({seq.num_frames} frames, {seq.num_features} features, {seq.dims}D) -->",
        path,
    )
    return EXIT_OK


def experiment(args):
    config = config_from_args(args, args.command)
    print(colored(f"Running {config.kind} experiment '{config.name}'", "green"), f"seeds {list(config.seeds)}")
    result = run(config, progress=True)
    for r in result.seeds:
        if r.get("status") == "failed":
            print(colored(f"seed {r['seed']} failed:", "red"), r["error"])
    if result.status == EXIT_OK:
        print(colored("Done.", "green", attrs=["bold"]), "-->", result.output_dir)
    else:
        print(colored("Finished with failures", "red", attrs=["bold"]), "-->", result.output_dir)
    return result.status


def make_report(args):
    outputs = report(args.run_dirs, args.output_dir)
    for name, path in outputs.items():
        print(colored(name, "green"), "-->", path)
    return EXIT_OK


COMMANDS = {
    "gen-data": gen_data,
    "train": experiment,
    "bind": experiment,
    "perspective": experiment,
    "joint": experiment,
    "ablation": experiment,
    "report": make_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(colored("Config error:", "red"), str(e), file=sys.stderr)
        return EXIT_CONFIG
    except ReportError as e:
        print(colored("Report error:", "red"), str(e), file=sys.stderr)
        return EXIT_FAILED
    except GestaltError as e:
        print(colored("Failed:", "red"), str(e), file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
