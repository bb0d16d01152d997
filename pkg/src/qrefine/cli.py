"""Command-line entry point.

Modes:
  qrefine run <script>              execute a script and exit
  qrefine serve --input F --output G   watch F, write results to G
  qrefine api --port N              start the HTTP/WebSocket service

A config file may be given with --config or the QREFINE_CONFIG
environment variable (the flag wins).  Exit codes: 0 on success, 1 when
a command in a batch run fails, 2 for I/O or configuration problems.
"""

import argparse
import os
import sys

from .config import ConfigError, load_config, resolve_config_path
from .engine import EngineState, run_script, serve_watch


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="qrefine",
        description="interactive refinement of quantum programs")
    parser.add_argument("--config", metavar="FILE", default=None,
                        help="JSON config file (overrides QREFINE_CONFIG)")
    sub = parser.add_subparsers(dest="mode", required=True)

    run_p = sub.add_parser("run", help="execute a script file and exit")
    run_p.add_argument("script", help="path to a .qrs script")
    run_p.add_argument("--keep-going", action="store_true",
                       help="report every error instead of stopping at the first")

    serve_p = sub.add_parser(
        "serve", help="watch an input file and write results on each save")
    serve_p.add_argument("--input", required=True, metavar="FILE")
    serve_p.add_argument("--output", required=True, metavar="FILE")

    api_p = sub.add_parser("api", help="start the HTTP/WebSocket service")
    api_p.add_argument("--port", type=int, default=8000)
    api_p.add_argument("--host", default="127.0.0.1")
    return parser


def _print_result(result):
    if not result.ok:
        where = ""
        if result.span is not None:
            where = f" [{result.span.start}..{result.span.end}]"
        print(f"! {result.kind}: {result.message}{where}", file=sys.stderr)
        return
    if result.message:
        print(f"{result.kind}: {result.message}")
    if result.mutated and result.goals is not None:
        print(result.goals)


def _run(args, config):
    try:
        with open(args.script, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        print(f"cannot read script: {exc}", file=sys.stderr)
        return 2
    state = EngineState(config)
    results = run_script(state, text, halt_on_error=not args.keep_going)
    for result in results:
        _print_result(result)
    return 0 if all(r.ok for r in results) else 1


def _serve(args, config):
    try:
        serve_watch(args.input, args.output, config)
    except KeyboardInterrupt:
        pass
    return 0


def _api(args, config):
    import uvicorn

    from .api import create_app
    app = create_app(config, web_dir=os.environ.get("QREFINE_WEB_DIR"))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(resolve_config_path(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.mode == "run":
        return _run(args, config)
    if args.mode == "serve":
        return _serve(args, config)
    return _api(args, config)


if __name__ == "__main__":
    sys.exit(main())
