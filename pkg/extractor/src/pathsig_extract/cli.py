"""Command-line extractor.

::

    pathsig-extract --model <name-or-checkpoint> --data <dir> --out <dir>
                    [--layer final|second_last] [--split <name>]
                    [--mapping <file>] [--subset <file>] [--cap <n>]
                    [--label-free] [--dtype f32|f64]

``--subset`` restricts the freshly written dump to the listed class ids
(JSON list of ids, or of objects with a ``wnid`` key). Exit codes: 0 ok,
1 usage error, 2 extraction/data error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .extract import ExtractionJob, extract
from .mapping import class_subset, load_class_list


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


class _Usage(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="pathsig-extract", description=__doc__.splitlines()[0])
    parser.add_argument("--model", required=True, help="torchvision name or checkpoint path")
    parser.add_argument("--data", required=True, help="dataset directory")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--layer", default="final", choices=("final", "second_last"))
    parser.add_argument("--split", help="dataset subdirectory (e.g. val)")
    parser.add_argument("--mapping", help="JSON {target_class: [source_ids...]}")
    parser.add_argument("--subset", help="restrict the dump to these class ids")
    parser.add_argument("--cap", type=int, help="keep at most this many samples")
    parser.add_argument("--label-free", action="store_true",
                        help="dataset has no labels; emit a single 'all' class")
    parser.add_argument("--dtype", default="f32", choices=("f32", "f64"))
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        job = ExtractionJob(
            model=args.model,
            data_root=args.data,
            out_dir=args.out,
            layer=args.layer,
            split=args.split,
            mapping_file=args.mapping,
            cap=args.cap,
            label_free=args.label_free,
            dtype=args.dtype,
        )
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        manifest = extract(job)
        if args.subset:
            manifest = class_subset(
                manifest, load_class_list(args.subset), manifest.parent / "subset"
            )
        report = json.loads((manifest.parent / "extraction_report.json").read_text()) \
            if (manifest.parent / "extraction_report.json").exists() else {}
        print(f"manifest written to {manifest}")
        if report.get("dropped_unmapped"):
            print(f"  dropped {report['dropped_unmapped']} unmapped samples")
        return 0
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
