"""Command-line interface: ``python -m mpgo <command>``.

Commands: ``train``, ``arena``, ``curve``, ``cross``, ``play``, ``selfcheck``.
A text config file (``--config FILE``, lines of ``key = value``, ``#`` comments)
supplies defaults for the chosen command; explicit flags take precedence.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq or not key.strip():
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def apply_config(sub: argparse.ArgumentParser, values: dict[str, str]) -> None:
    """Install config-file values as defaults of ``sub``, converted like the flags."""
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    defaults = {}
    for key, text in values.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r} for this command")
        try:
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                value = _parse_bool(text)
            else:
                value = action.type(text) if action.type else text
        except (TypeError, ValueError) as e:
            raise UsageError(f"config key {key!r}: {e}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        defaults[key] = value
    sub.set_defaults(**defaults)


def _search_flags(p):
    p.add_argument("--n-rollouts", type=int, default=180, help="rollouts / simulations / expansions per move")
    p.add_argument("--c", type=float, default=0.8, help="UCT/PUCT exploration constant")


def _match_flags(p, n_games=500):
    p.add_argument("--n-games", type=int, default=n_games)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> Parser:
    parser = Parser(prog="mpgo", description="3-player 5x5 Go: search agents, training, tournaments.")
    parser.add_argument("--config", help="text file of 'key = value' defaults for the command")
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    t = subs.add_parser("train", help="self-play training run")
    t.add_argument("--run-dir", required=True)
    t.add_argument("--variant", choices=["az", "descent"], default="az")
    _search_flags(t)
    t.add_argument("--n-updates", type=int, default=50)
    t.add_argument("--n-games", type=int, default=1000)
    t.add_argument("--n-envs", type=int, default=8)
    t.add_argument("--buffer-size", type=int, default=2000)
    t.add_argument("--res-blocks", type=int, default=8)
    t.add_argument("--res-filters", type=int, default=128)
    t.add_argument("--value-hidden", type=int, default=128)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--momentum", type=float, default=0.9, help="SGD momentum (az)")
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--temperature-moves", type=int, default=6)
    t.add_argument("--descent-epsilon", type=float, default=0.05)
    t.add_argument("--no-warm-start", dest="warm_start", action="store_false")
    t.add_argument("--no-uct-value-targets", dest="uct_value_targets", action="store_false")
    t.add_argument("--wall-clock-limit", type=float, default=None, help="hours")
    t.add_argument("--seed", type=int, default=0)

    a = subs.add_parser("arena", help="play a match and report per-colour means")
    for colour in ("black", "white", "red"):
        a.add_argument(f"--{colour}", default="uct", help="uct | az:CKPT | descent:CKPT | random")
    _search_flags(a)
    _match_flags(a)
    a.add_argument("--csv", help="write the match report (color, mean, ci95, n)")

    cv = subs.add_parser("curve", help="learning curve of a run's evaluation checkpoints")
    cv.add_argument("--run-dir", required=True)
    cv.add_argument("--opponent", default="uct")
    _search_flags(cv)
    cv.add_argument("--games-per-point", type=int, default=100)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--workers", type=int, default=1)
    cv.add_argument("--csv", required=True)

    x = subs.add_parser("cross", help="Black agent x defender table")
    x.add_argument("--az", required=True, help="AlphaZero checkpoint")
    x.add_argument("--descent", required=True, help="Descent checkpoint")
    _search_flags(x)
    _match_flags(x)
    x.add_argument("--csv")

    pl = subs.add_parser("play", help="play one game at the console")
    for colour, default in (("black", "human"), ("white", "uct"), ("red", "uct")):
        pl.add_argument(f"--{colour}", default=default)
    _search_flags(pl)
    pl.add_argument("--seed", type=int, default=0)

    sc = subs.add_parser("selfcheck", help="quick internal consistency checks")
    sc.add_argument("--games", type=int, default=200, help="random games for the engine check")
    return parser


def _agent(parser, text, args):
    from .arena import AgentSpec
    try:
        return AgentSpec.parse(text, n=args.n_rollouts, c=args.c)
    except ValueError as e:
        parser.error(f"bad agent spec {text!r}: {e}")


def cmd_train(args, parser) -> int:
    from .selfplay import Pipeline, TrainConfig
    try:
        cfg = TrainConfig(variant=args.variant, n_updates=args.n_updates, n_games=args.n_games,
                          n_envs=args.n_envs, buffer_size=args.buffer_size, n_rollouts=args.n_rollouts,
                          c=args.c, seed=args.seed, wall_clock_limit=args.wall_clock_limit, lr=args.lr,
                          momentum=args.momentum, batch_size=args.batch_size,
                          temperature_moves=args.temperature_moves, descent_epsilon=args.descent_epsilon,
                          warm_start=args.warm_start, uct_value_targets=args.uct_value_targets,
                          blocks=args.res_blocks, filters=args.res_filters, value_hidden=args.value_hidden)
    except ValueError as e:
        parser.error(str(e))
    pipe = Pipeline(cfg, args.run_dir)
    pipe.run(lambda m: print(f"iteration {m['iteration']}: eps={m['epsilon']:.3f} "
                             f"loss={m['mean_loss']:.4f} buffer={m['buffer_fill']} "
                             f"positions={m['positions']}", flush=True))
    if pipe.truncated:
        print("stopped at the wall-clock limit", flush=True)
    return EXIT_OK


def cmd_arena(args, parser) -> int:
    from .arena import MATCH_HEADER, MatchSpec, run_match, write_csv
    agents = tuple(_agent(parser, getattr(args, c), args) for c in ("black", "white", "red"))
    if any(a.kind == "human" for a in agents):
        parser.error("human seats belong to the 'play' command")
    if args.n_games < 1:
        parser.error("--n-games must be at least 1")
    rep = run_match(MatchSpec(agents, args.n_games, args.seed), workers=args.workers)
    print(rep.format())
    if args.csv:
        write_csv(args.csv, MATCH_HEADER, rep.rows())
    return EXIT_OK


def cmd_curve(args, parser) -> int:
    from .arena import learning_curve
    opponent = _agent(parser, args.opponent, args)
    rows = learning_curve(args.run_dir, opponent, args.games_per_point, seed=args.seed,
                          n=args.n_rollouts, workers=args.workers, out=args.csv)
    for r in rows:
        ci = "" if r["ci95"] is None else f" ± {r['ci95']:.2f}"
        print(f"{r['checkpoint_id']:>12} {r['seat']:>5} {r['mean']:6.2f}{ci}")
    return EXIT_OK


def cmd_cross(args, parser) -> int:
    from .arena import AgentSpec, cross_table, format_cross_table
    rows = cross_table(AgentSpec("uct", None, args.n_rollouts, args.c), args.az, args.descent,
                       args.n_games, seed=args.seed, workers=args.workers, out=args.csv)
    print(format_cross_table(rows))
    return EXIT_OK


def cmd_play(args, parser) -> int:
    from .arena import MatchSpec, play_interactive
    agents = tuple(_agent(parser, getattr(args, c), args) for c in ("black", "white", "red"))
    play_interactive(MatchSpec(agents, 1, args.seed))
    return EXIT_OK


def selfcheck(n_games: int = 200, out=print) -> bool:
    """Fast consistency checks of the engine, formulas, search and persistence."""
    import torch
    from .engine import PASS, new_game
    from .network import (AZ, MultiGoNet, TrainBatch, encode_batch, expected_score, load_checkpoint,
                          make_optimizer, save_checkpoint, train_step)
    from .search import descent, puct, uct
    from .selfplay import warm_start_epsilon

    def formulas():
        e = uct.UctEdge(PASS, 3)
        e.visit_count, e.score_sum = 10, np.array([125.0, 0, 0])
        assert math.isclose(uct.uct_value(e, 100, 0.8, 0), 0.5 + 0.8 * math.sqrt(math.log(100) / 10),
                            rel_tol=1e-12)
        p = puct.PuctEdge(PASS, 0.2, 3)
        assert math.isclose(puct.puct_value(p, 100, 0.8, 0), 1.6, rel_tol=1e-12)
        assert warm_start_epsilon(0, 50) == 0.5 and warm_start_epsilon(50, 50) == 0.05
        assert math.isclose(expected_score(np.full(26, 1 / 26)), 12.5, rel_tol=1e-12)

    def engine():
        rng = np.random.default_rng(0)
        for _ in range(n_games):
            s, seen = new_game(), set()
            while not s.is_terminal():
                moves = s.legal_moves()
                assert PASS not in moves or moves == [PASS]
                if moves != [PASS]:
                    assert int(s.hash) not in seen
                    seen.add(int(s.hash))
                s = s.play(moves[rng.integers(len(moves))])
                assert s.move_count <= s.move_cap
            sc = s.score()
            assert sc.sum() <= 25 and (sc >= 0).all()

    def descent_exhausts():
        class Zero:
            def values(self, states):
                return np.zeros((len(states), states[0].num_players))
        root = descent.DescentNode(new_game(2, 2, move_cap=8))
        while not root.exhausted:
            descent.descent_once(root, Zero())
        assert all(not n.expanded or n.exhausted for n in root.walk())

    def checkpoint():
        net = MultiGoNet(AZ, 1, 8, 16)
        opt = make_optimizer(net, lr=1e-3)
        x = encode_batch([new_game()] * 2)
        train_step(net, opt, TrainBatch.az(x, [[5, 5, 5]] * 2, np.full((2, 25), 1 / 25)))
        with tempfile.TemporaryDirectory() as d:
            a, b = Path(d) / "a.ckpt", Path(d) / "b.ckpt"
            save_checkpoint(a, net, opt, 3)
            ck = load_checkpoint(a)
            save_checkpoint(b, ck.net, ck.make_optimizer(), ck.iteration)
            assert a.read_bytes() == b.read_bytes()
        with torch.no_grad():
            assert torch.equal(net(torch.as_tensor(x))[0], ck.net(torch.as_tensor(x))[0])

    ok = True
    for name, check in (("formulas", formulas), ("engine invariants", engine),
                        ("descent terminates on 2x2", descent_exhausts),
                        ("checkpoint round-trip", checkpoint)):
        try:
            check()
            out(f"PASS {name}")
        except AssertionError as e:
            ok = False
            out(f"FAIL {name} {e}".rstrip())
    return ok


def cmd_selfcheck(args, parser) -> int:
    return EXIT_OK if selfcheck(args.games) else EXIT_RUNTIME


COMMANDS = {"train": cmd_train, "arena": cmd_arena, "curve": cmd_curve, "cross": cmd_cross,
            "play": cmd_play, "selfcheck": cmd_selfcheck}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            values = read_config(known.config)
            subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
            command = next((x for x in argv if x in subs.choices), None)
            if command is not None:
                apply_config(subs.choices[command], values)
    except (UsageError, OSError) as e:
        print(f"mpgo: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    from .network import CorruptCheckpoint, TrainingDiverged, UnsupportedVersion
    try:
        return COMMANDS[args.command](args, parser)
    except SystemExit as e:
        return int(e.code or 0)
    except (CorruptCheckpoint, UnsupportedVersion, TrainingDiverged, OSError, ValueError) as e:
        print(f"mpgo: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
