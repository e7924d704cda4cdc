"""Command-line entry points: serve, rollout, eval, replay, and game tools."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, fixture_path, load_runtime
from .evalharness import DatasetError, load_dataset, run_benchmark
from .game.engine import load_game, replay
from .parsing import INJECTED
from .reporting import write_report
from .rollout import Trajectory, attach_rewards, read_trajectory_log, rollout_group, write_trajectory_log

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_COLORS = {"policy": "\x1b[36m", INJECTED: "\x1b[33m"}
_RESET = "\x1b[0m"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="groundloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the JSON-over-HTTP rollout service")
    p.add_argument("--config", required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    p = sub.add_parser("rollout", help="sample a trajectory group for one question")
    p.add_argument("--config", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--g", type=int, default=None)
    p.add_argument("--gold", action="append", default=None, help="gold answer (repeatable)")
    p.add_argument("--mode", default="string_em", choices=["string_em", "numeric"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="trajectory JSONL output path")

    p = sub.add_parser("eval", help="run a benchmark dataset and write a report")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--report", required=True, help="report JSON path (txt/tsv/png written beside it)")
    p.add_argument("--out", default=None, help="optional trajectory JSONL path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument(
        "--answer-mode",
        action="append",
        default=[],
        metavar="KIND=MODE",
        help="override answer mode per task kind, e.g. math=numeric",
    )

    p = sub.add_parser("replay", help="pretty-print one logged trajectory")
    p.add_argument("--traj", required=True)
    p.add_argument("--index", type=int, default=0)

    game = sub.add_parser("game", help="game utilities")
    game_sub = game.add_subparsers(dest="game_command", required=True)
    p = game_sub.add_parser("run", help="replay a command sequence and print the transcript")
    p.add_argument("--game", required=True, help="game id (bundled fixture) or JSON path")
    p.add_argument("--commands", default="", help="comma-separated command sequence")

    return parser


def _load_game_for_cli(ref: str):
    path = Path(ref)
    if path.suffix == ".json" and path.exists():
        return load_game(path)
    bundled = fixture_path("games", f"{ref}.json")
    if bundled.exists():
        return load_game(bundled)
    raise ConfigError(f"unknown game '{ref}' (no bundled fixture or JSON file)")


def cmd_serve(args) -> int:
    from .server import serve_forever

    runtime = load_runtime(args.config)
    serve_forever(runtime, host=args.host, port=args.port)
    return EXIT_OK


def cmd_rollout(args) -> int:
    runtime = load_runtime(args.config)
    config = runtime.rollout
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    batch = rollout_group(
        args.question, runtime.policy, runtime.registry, config, group_size=args.g
    )
    if args.gold:
        attach_rewards(batch, args.gold, args.mode)
    write_trajectory_log(args.out, [batch])
    print(f"wrote {batch.group_size} trajectories to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    runtime = load_runtime(args.config)
    config = runtime.rollout
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    modes = {}
    for override in args.answer_mode:
        kind, sep, mode = override.partition("=")
        if not sep:
            print(f"bad --answer-mode value '{override}', expected KIND=MODE", file=sys.stderr)
            return EXIT_USAGE
        modes[kind] = mode
    items = load_dataset(args.dataset)
    report = run_benchmark(
        items,
        runtime.policy,
        runtime.registry,
        k=args.k,
        config=config,
        games=runtime.games,
        modes=modes,
    )
    written = write_report(report, args.report, figures=not args.no_figures)
    if args.out:
        write_trajectory_log(args.out, [r.batch for r in report.results])
        written.append(Path(args.out))
    for path in written:
        print(f"wrote {path}")
    metrics = ", ".join(
        f"{k}={v:.4f}" for k, v in report.metrics.items() if v is not None
    )
    print(f"metrics: {metrics}")
    return EXIT_OK


def cmd_replay(args) -> int:
    records = read_trajectory_log(args.traj)
    if not 0 <= args.index < len(records):
        print(f"index {args.index} out of range ({len(records)} trajectories)", file=sys.stderr)
        return EXIT_RUNTIME
    traj = Trajectory.from_record(records[args.index])
    use_color = sys.stdout.isatty()
    print(f"question: {traj.question}")
    print(f"tokens: {traj.token_length}  format_ok: {traj.format_ok}  "
          f"truncated: {traj.truncated}  aborted: {traj.aborted}")
    for i, segment in enumerate(traj.segments):
        marker = f"[{segment.provenance}]"
        if use_color:
            color = _COLORS.get(segment.provenance, "")
            print(f"{color}--- segment {i} {marker} ({segment.token_length} tokens) ---{_RESET}")
            print(f"{color}{segment.text}{_RESET}")
        else:
            print(f"--- segment {i} {marker} ({segment.token_length} tokens) ---")
            print(segment.text)
    if traj.boxed_answer is not None:
        print(f"boxed answer: {traj.boxed_answer}")
    return EXIT_OK


def cmd_game_run(args) -> int:
    game = _load_game_for_cli(args.game)
    commands = [c.strip() for c in args.commands.split(",") if c.strip()]
    state, transcript = replay(game, commands)
    for i, feedback in enumerate(transcript):
        if i:
            print(f"\n> {commands[i - 1]}")
        print(feedback)
    print(f"\nscore: {state.score}/{game.max_score}  turns: {state.turns}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "rollout":
            return cmd_rollout(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "replay":
            return cmd_replay(args)
        if args.command == "game" and args.game_command == "run":
            return cmd_game_run(args)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DatasetError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        logger.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
