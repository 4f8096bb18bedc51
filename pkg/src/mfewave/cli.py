"""Command-line entry point: ``mfewave <command> --config FILE [key=value ...]``."""

import argparse
import logging
import sys

from . import __version__
from . import config as C
from .errors import FactorizationError, InvalidArgument, NumericalFailure


def build_parser():
    p = argparse.ArgumentParser(prog="mfewave", description="Modulated Fourier expansion wave experiments.")
    p.add_argument("--version", action="version", version=f"mfewave {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in C.COMMANDS + ("defaults",):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML file with (dotted) config keys")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--workers", type=int, help="worker processes for sweep points")
        sp.add_argument("-v", "--verbose", action="store_true")
        sp.add_argument("overrides", nargs="*", metavar="key=value")
    return p


def _defaults(args):
    if args.config or args.overrides:
        # show the resolved config of every command after applying the inputs
        file_cfg = C.load_config_file(args.config) if args.config else None
        out = {}
        for cmd in C.COMMANDS:
            cfg = C.deep_merge(C.BASE_DEFAULTS, C.COMMAND_DEFAULTS[cmd])
            if file_cfg:
                cfg = C.deep_merge(cfg, file_cfg)
            for item in args.overrides:
                key, val = C.parse_override(item)
                cfg = C.deep_merge(cfg, C.expand_dotted({key: val}))
            out[cmd] = cfg
    else:
        out = {cmd: C.deep_merge(C.BASE_DEFAULTS, C.COMMAND_DEFAULTS[cmd]) for cmd in C.COMMANDS}
    sys.stdout.write(C.to_yaml(out))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "defaults":
            return _defaults(args)
        file_cfg = C.load_config_file(args.config) if args.config else None
        cfg = C.resolve(args.command, file_cfg, args.overrides, out=args.out, workers=args.workers)
    except InvalidArgument as exc:
        print(f"mfewave: config error: {exc}", file=sys.stderr)
        return 1

    from .harness import RUNNERS

    try:
        result = RUNNERS[args.command](cfg)
    except FactorizationError as exc:
        where = []
        if exc.s is not None:
            where.append(f"s={exc.s!r}")
        if exc.step is not None:
            where.append(f"step={exc.step}")
        print(f"mfewave: numerical failure ({', '.join(where) or 'unknown location'}): {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"mfewave: numerical failure: {exc}", file=sys.stderr)
        return 2
    except InvalidArgument as exc:
        print(f"mfewave: config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mfewave: cannot write output: {exc}", file=sys.stderr)
        return 1
    for path in result.files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
