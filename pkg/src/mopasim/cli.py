"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical convergence error,
4 physics violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__, io
from .config import ExperimentConfig, config_from_dict, load_config
from .errors import ConfigError, ConvergenceError, PhysicsError
from .pipeline import COMMANDS, Pipeline

log = logging.getLogger("mopasim")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_PHYSICS = 0, 2, 3, 4
ORDER = ("solve", "overlap", "trace", "tomography", "sorter", "cluster")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mopasim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config (defaults if omitted)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="cap BLAS worker threads")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_init = sub.add_parser("init", parents=[common], help="write a config file with all defaults")
    p_init.add_argument("path", type=Path, nargs="?", default=Path("mopasim.yaml"))
    for name in ORDER + ("all",):
        sub.add_parser(name, parents=[common], help=f"run the {name} stage" if name != "all" else "run every stage")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output_dir=str(args.out))
    return cfg


def _manifest(cfg: ExperimentConfig, command: str, out: Path, files: list[str]) -> None:
    import numpy
    import scipy

    io.write_json(
        out / f"manifest_{command}.json",
        {
            "command": command,
            "config_sha256": cfg.digest(),
            "seed": cfg.seed,
            "versions": {"mopasim": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__},
            "files": {f: io.sha256_file(out / f) for f in sorted(files)},
        },
    )


def run(args) -> int:
    if args.command == "init":
        path = args.path
        path.write_text(ExperimentConfig().to_yaml())
        print(f"wrote default config to {path}")
        return EXIT_OK
    cfg = _resolve_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.to_yaml())
    pipe = Pipeline(cfg)
    commands = ORDER if args.command == "all" else (args.command,)
    for name in commands:
        log.info("running %s", name)
        result = COMMANDS[name](pipe, out)
        _manifest(cfg, name, out, result["files"] + ["config.yaml"])
        print(f"{name}: wrote {len(result['files'])} files to {out}")
    return EXIT_OK


def _limit_threads(n):
    if n is None:
        return None
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        limiter = _limit_threads(args.threads)
        try:
            return run(args)
        finally:
            if limiter is not None:
                limiter.unregister()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except PhysicsError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
