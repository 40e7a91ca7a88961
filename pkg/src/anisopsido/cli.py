"""Command-line entry point.

Exit status: 0 when every property check passes, 2 when a check fails,
1 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from .experiments import KINDS, ExperimentResult, load_config, run_experiment, validate_config

log = logging.getLogger("anisopsido")


def _clean(obj):
    """Recursively convert numpy scalars / complex values for JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    if isinstance(obj, float) and obj != obj:
        return "nan"
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return str(obj)
    return obj


def summary_document(result: ExperimentResult, config_hash: str, seed: int, config_path: str) -> dict:
    return _clean({
        "experiment": result.kind,
        "status": "pass" if result.passed else "fail",
        "config": Path(config_path).name,
        "config_sha256": config_hash,
        "seed": seed,
        "version": __version__,
        "result": result.summary,
    })


def write_reports(result: ExperimentResult, doc: dict, out: Path, stem: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    js = out / f"{stem}.json"
    js.write_text(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    written.append(js)
    if result.rows:
        cs = out / f"{stem}.csv"
        with cs.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=result.columns, lineterminator="\r\n")
            w.writeheader()
            for row in result.rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        written.append(cs)
    return written


def _run(args, kind=None) -> int:
    try:
        cfg, digest = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed")
        with threadpool_limits(limits=args.threads):
            result = run_experiment(cfg, seed, kind)
        seed = int(seed)
    except Exception as exc:  # noqa: BLE001 - reported as exit status 1
        print(f"error: {exc}", file=sys.stderr)
        log.debug("experiment failed", exc_info=True)
        return 1
    doc = summary_document(result, digest, seed, args.config)
    out = Path(args.out) if args.out else Path("out")
    files = write_reports(result, doc, out, Path(args.config).stem)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status} {result.kind} ({', '.join(str(f) for f in files)})")
    return 0 if result.passed else 2


def _validate(args) -> int:
    diags = validate_config(args.config)
    for d in diags:
        print(d)
    if not diags:
        print("ok")
    return 0 if not diags else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anisopsido", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", default=None, help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="cap on BLAS threads")

    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        common(p)
        p.set_defaults(func=lambda a, k=kind: _run(a, k))
    p = sub.add_parser("run", help="run the experiment named in the config")
    common(p)
    p.set_defaults(func=lambda a: _run(a, None))
    p = sub.add_parser("validate", help="static checks of a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
