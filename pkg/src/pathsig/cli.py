"""Command-line front door.

::

    pathsig analyze      --config cfg.json [overrides]
    pathsig compare      --config cfg.json [--id m.json --ood m.json] [overrides]
    pathsig memorisation --config cfg.json [overrides]
    pathsig selfcheck

Config files are JSON mirrors of the corresponding config dataclasses; flags
override file values. Exit codes: 0 ok, 1 usage error, 2 data error, 3
selfcheck failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .experiments import MemorisationConfig, run_memorisation
from .mlp import TrainingDiverged
from .report import RunConfig, run_analyze, run_compare
from .selfcheck import run_selfcheck
from .tensorio import DumpError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECK = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pathsig", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--layer", help="only analyze manifests with this layer_id")
        p.add_argument("--threshold-mode", dest="threshold_mode",
                       help="literal | row-mean-abs | quantile:<q>")
        p.add_argument("--alpha", type=float, help="smoothing for probabilities")
        p.add_argument("--bins", type=int, help="histogram bin count")
        p.add_argument("--out", dest="out_dir", help="output directory")
        p.add_argument("--seed", type=int, help="seed for seeded steps")

    analyze = sub.add_parser("analyze", help="analyze one or more dumps")
    add_common(analyze)
    analyze.add_argument("--inputs", nargs="+", help="manifest paths (overrides config)")
    analyze.add_argument("--metrics", help="comma list from: path-kl,prototype-kl,softmax-kl,energy or 'all'")
    analyze.add_argument("--export-masks", action="store_true", default=None,
                         help="write per-sample significance masks as NPY (0/1 f32)")
    analyze.add_argument("--no-shared-scale", action="store_true",
                         help="normalise each heatmap to its own range")

    compare = sub.add_parser("compare", help="compare an ID dump against an OOD dump")
    add_common(compare)
    compare.add_argument("--id", dest="id_input", help="in-distribution manifest")
    compare.add_argument("--ood", dest="ood_input", help="out-of-distribution manifest")

    memo = sub.add_parser("memorisation", help="run the three-condition blob experiment")
    add_common(memo)

    sub.add_parser("selfcheck", help="run the bundled oracle suite")
    return parser


def _load_config(path, allowed: set[str], what: str) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    unknown = set(raw) - allowed
    if unknown:
        raise UsageError(f"unknown {what} config keys: {sorted(unknown)}")
    return raw


def _run_config(args, extra_keys=()) -> tuple[RunConfig, dict]:
    allowed = {f.name for f in fields(RunConfig)} | set(extra_keys)
    raw = _load_config(args.config, allowed, "run")
    extras = {k: raw.pop(k) for k in list(raw) if k in extra_keys}

    for key in ("layer", "threshold_mode", "alpha", "bins", "out_dir", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if getattr(args, "inputs", None):
        raw["inputs"] = args.inputs
    if getattr(args, "metrics", None):
        raw["metrics"] = [m.strip() for m in args.metrics.split(",") if m.strip()]
    if getattr(args, "export_masks", None):
        raw["export_masks"] = True
    if getattr(args, "no_shared_scale", False):
        raw["shared_scale"] = False
    try:
        cfg = RunConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad run config: {exc}") from exc
    return cfg, extras


def _cmd_analyze(args) -> int:
    cfg, _ = _run_config(args)
    if not cfg.inputs:
        raise UsageError("analyze needs at least one input manifest")
    run_analyze(cfg)
    print(f"analysis written to {cfg.out_dir}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg, extras = _run_config(args, extra_keys=("id_input", "ood_input"))
    id_input = args.id_input or extras.get("id_input")
    ood_input = args.ood_input or extras.get("ood_input")
    if not id_input or not ood_input:
        raise UsageError("compare needs --id and --ood manifests (or config keys)")
    summary = run_compare(cfg, id_input, ood_input)
    print(f"comparison written to {cfg.out_dir}")
    delta = summary["delta_ood_minus_id"]
    print(f"  mean inter-class KL delta (ood - id): {delta['mean_inter_class_kl']}")
    print(f"  mean class entropy delta (ood - id): {delta['mean_class_entropy']}")
    return EXIT_OK


def _cmd_memorisation(args) -> int:
    allowed = {f.name for f in fields(MemorisationConfig)}
    raw = _load_config(args.config, allowed, "memorisation")
    for key in ("threshold_mode", "alpha", "bins", "out_dir", "seed", "layer"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if "hidden" in raw:
        raw["hidden"] = tuple(raw["hidden"])
    try:
        cfg = MemorisationConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad memorisation config: {exc}") from exc
    summary = run_memorisation(cfg)
    print(f"memorisation report written to {cfg.out_dir}")
    for row in summary["conditions"]:
        print(
            f"  {row['condition']}: inter-class KL {row['mean_inter_class_kl']:.6f}, "
            f"entropy {row['mean_class_entropy']:.6f}"
        )
    return EXIT_OK


def _cmd_selfcheck(_args) -> int:
    results = run_selfcheck()
    failed = False
    for name, ok, detail in results:
        if ok:
            print(f"PASS {name}")
        else:
            failed = True
            print(f"FAIL {name}: {detail}")
    return EXIT_CHECK if failed else EXIT_OK


_COMMANDS = {
    "analyze": _cmd_analyze,
    "compare": _cmd_compare,
    "memorisation": _cmd_memorisation,
    "selfcheck": _cmd_selfcheck,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DumpError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
