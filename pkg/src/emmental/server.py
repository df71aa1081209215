"""Command line launcher for the training server."""
from __future__ import annotations

import argparse
import logging
import sys
import tempfile

from .modes import ModeConfig, ModeError, parse_toggle_args
from .sanitizer import DEFAULT_POLICY, SanitizerPolicy
from .session_auth import load_or_create_key
from .webapp import DEFAULT_PORT, EmmentalApp, EmmentalServer

logger = logging.getLogger("emmental.server")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emmental-server",
        description="Deliberately vulnerable training server with per-weakness modes",
    )
    parser.add_argument("--port", type=int, default=DEFAULT_PORT,
                        help="TCP port, 0 picks a free one (default %(default)s)")
    parser.add_argument("--bind", default="127.0.0.1",
                        help="address to bind (default %(default)s)")
    parser.add_argument("--mode", choices=("vulnerable", "hardened"),
                        help="default mode for all weaknesses")
    parser.add_argument("--toggle", action="append", default=[], metavar="ID=MODE",
                        help="per-weakness override, repeatable or comma separated")
    parser.add_argument("--config", help="JSON file with default_mode and overrides")
    parser.add_argument("--data", help="snapshot file; loaded at start, written through")
    parser.add_argument("--policy", help="JSON sanitizer policy file")
    parser.add_argument("--key-file", help="hex server key file, created when missing")
    parser.add_argument("--root", help="runtime directory (default: fresh temp dir)")
    parser.add_argument("--port-file", help="write the actual bound port here")
    parser.add_argument("--test-hooks", action="store_true",
                        help="enable POST /testhooks/reset")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def config_from_args(args: argparse.Namespace) -> ModeConfig:
    config = ModeConfig.from_json_file(args.config) if args.config else ModeConfig()
    if args.mode:
        config = ModeConfig(default_mode=args.mode, overrides=dict(config.overrides))
    toggles: dict[str, str] = {}
    for chunk in args.toggle:
        for pair in chunk.split(","):
            if pair.strip():
                toggles.update(parse_toggle_args([pair.strip()]))
    return config.with_toggles(toggles)


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        config = config_from_args(args)
    except ModeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    policy = SanitizerPolicy.from_json_file(args.policy) if args.policy else DEFAULT_POLICY
    key = load_or_create_key(args.key_file)
    root = args.root or tempfile.mkdtemp(prefix="emmental-")
    app = EmmentalApp(
        config,
        runtime_root=root,
        data_path=args.data,
        key=key,
        policy=policy,
        test_hooks=args.test_hooks,
    )
    server = EmmentalServer((args.bind, args.port), app)
    host, port = server.server_address[:2]
    if args.port_file:
        with open(args.port_file, "w", encoding="utf-8") as fh:
            fh.write(f"{port}\n")
    overrides = ", ".join(f"{k}={v}" for k, v in sorted(config.overrides.items()))
    logger.info(
        "serving on http://%s:%s default=%s overrides=[%s] root=%s",
        host, port, config.default_mode, overrides, root,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
