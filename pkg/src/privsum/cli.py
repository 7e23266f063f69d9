"""``privsum`` command line: run the toy or beamforming sweep from a config file."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import ExperimentConfig, load_config, run_beamform, run_toy, write_outputs


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privsum", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("toy", "beamform"):
        p = sub.add_parser(name, help=f"run the {name} node-count sweep")
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key; repeatable")
        p.add_argument("--trace", action="store_true", help="write per-round codeword traces")
        p.add_argument("--dump-topology", action="store_true", help="write topology files for trial 0")
        p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "beamform":
            p.add_argument("--export-wav", action="store_true", help="write enhanced 8 kHz WAV files for trial 0")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = [("kind", args.command)]
        for item in args.set:
            if "=" not in item:
                raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides.append((key.strip(), value.strip()))
        if args.seed is not None:
            overrides.append(("seed", str(args.seed)))
        if args.out is not None:
            overrides.append(("out", args.out))
        cfg: ExperimentConfig = load_config(args.config, overrides)
        if args.print_config:
            sys.stdout.write(cfg.to_text())
            return 0
        if args.command == "toy":
            run = run_toy(cfg, jobs=args.jobs, trace=args.trace)
        else:
            run = run_beamform(cfg, jobs=args.jobs, trace=args.trace, keep_audio=args.export_wav)
        written = write_outputs(run, cfg.out, trace=args.trace, dump_topology_files=args.dump_topology,
                                export_wav=getattr(args, "export_wav", False))
        for path in written:
            print(path)
        return 0
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
