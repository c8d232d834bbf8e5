import itertools
import math

import numpy as np
import pytest

from mpgo.arena import (CROSS_HEADER, CURVE_HEADER, AgentSpec, HumanAgent, MatchReport, MatchSpec,
                        cross_table, format_cross_table, learning_curve, play_interactive, run_match,
                        write_csv)
from mpgo.engine import Move, from_grid, new_game
from mpgo.network import AZ, DESCENT, MultiGoNet, save_checkpoint
from mpgo.selfplay import Pipeline, TrainConfig

RANDOM3 = (AgentSpec("random"),) * 3


def test_agent_spec_parse():
    assert AgentSpec.parse("uct") == AgentSpec("uct", None, 180, 0.8)
    assert AgentSpec.parse("uct:n=60,c=0.5") == AgentSpec("uct", None, 60, 0.5)
    assert AgentSpec.parse("az:/x/y.ckpt,n=40") == AgentSpec(AZ, "/x/y.ckpt", 40, 0.8)
    assert AgentSpec.parse("Random").kind == "random"
    with pytest.raises(ValueError):
        AgentSpec.parse("alphago")
    with pytest.raises(ValueError):
        AgentSpec.parse("descent")
    with pytest.raises(ValueError):
        AgentSpec.parse("uct:q=3")


def test_random_match_invariants():
    rep = run_match(MatchSpec(RANDOM3, n_games=40, seed=5))
    assert rep.scores.shape == (40, 3)
    assert (rep.scores.sum(1) <= 25).all()
    assert ((rep.means >= 0) & (rep.means <= 25)).all() and rep.means.sum() <= 25
    s = rep.scores
    for i in range(3):
        col = s[:, i]
        sd = math.sqrt(((col - col.mean()) ** 2).sum() / (len(col) - 1))
        assert rep.ci95[i] == pytest.approx(1.96 * sd / math.sqrt(40), rel=1e-12)
    assert rep.wins.sum() == pytest.approx(40)


def test_serial_determinism_and_seed_dependence():
    a = run_match(MatchSpec(RANDOM3, 10, seed=1))
    b = run_match(MatchSpec(RANDOM3, 10, seed=1))
    c = run_match(MatchSpec(RANDOM3, 10, seed=2))
    assert np.array_equal(a.scores, b.scores)
    assert not np.array_equal(a.scores, c.scores)


def test_single_game_has_no_ci():
    rep = run_match(MatchSpec(RANDOM3, 1))
    assert rep.ci95 is None
    assert all(r["ci95"] is None for r in rep.rows())


def test_wins_split_ties():
    rep = MatchReport(np.array([[10.0, 10, 5], [0, 0, 25], [8, 8, 8]]))
    assert list(rep.wins) == pytest.approx([0.5 + 1 / 3, 0.5 + 1 / 3, 1 + 1 / 3])


def test_match_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        MatchSpec(RANDOM3[:2])
    with pytest.raises(ValueError):
        MatchSpec(RANDOM3, n_games=0)
    with pytest.raises(FileNotFoundError):
        run_match(MatchSpec((AgentSpec(AZ, str(tmp_path / "missing.ckpt")),) + RANDOM3[:2], 1))
    p = tmp_path / "d.ckpt"
    save_checkpoint(p, MultiGoNet(DESCENT, 1, 8, 16))
    with pytest.raises(ValueError):
        run_match(MatchSpec((AgentSpec(AZ, str(p)),) + RANDOM3[:2], 1))


def test_network_agents_play(tmp_path):
    az, de = tmp_path / "az.ckpt", tmp_path / "de.ckpt"
    save_checkpoint(az, MultiGoNet(AZ, 1, 8, 16))
    save_checkpoint(de, MultiGoNet(DESCENT, 1, 8, 16))
    spec = MatchSpec((AgentSpec(AZ, str(az), n=6), AgentSpec(DESCENT, str(de), n=6),
                      AgentSpec("uct", n=6)), n_games=2)
    rep = run_match(spec)
    assert rep.n == 2 and (rep.scores.sum(1) <= 25).all()
    assert np.array_equal(rep.scores, run_match(spec).scores)


def test_csv_schema(tmp_path):
    rep = run_match(MatchSpec(RANDOM3, 3))
    write_csv(tmp_path / "m.csv", ("color", "mean", "ci95", "n"), rep.rows())
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "color,mean,ci95,n" and len(lines) == 4
    assert lines[1].startswith("black,")


def test_learning_curve_rows(tmp_path):
    cfg = TrainConfig(n_updates=1, n_games=1, n_envs=1, n_rollouts=4, blocks=1, filters=8,
                      value_hidden=16)
    Pipeline(cfg, tmp_path / "run").run()
    out = tmp_path / "curve.csv"
    rows = learning_curve(tmp_path / "run", AgentSpec("uct", n=4), games_per_point=2, out=out)
    assert len(rows) == 2 * 3
    assert [r["seat"] for r in rows[:3]] == ["black", "white", "red"]
    assert out.read_text().splitlines()[0] == ",".join(CURVE_HEADER)
    with pytest.raises(FileNotFoundError):
        learning_curve(tmp_path, AgentSpec("uct"), 1)


def test_cross_table_structure(tmp_path):
    az, de = tmp_path / "az.ckpt", tmp_path / "de.ckpt"
    save_checkpoint(az, MultiGoNet(AZ, 1, 8, 16))
    save_checkpoint(de, MultiGoNet(DESCENT, 1, 8, 16))
    out = tmp_path / "cross.csv"
    rows = cross_table(AgentSpec("uct", n=4), str(az), str(de), n_games=1, out=out)
    assert len(rows) == 1 + 2 * 3
    assert {(r["black_agent"], r["defender"]) for r in rows[1:]} == \
        {(b, d) for b in ("az", "descent") for d in ("uct", "az", "descent")}
    assert out.read_text().splitlines()[0] == ",".join(CROSS_HEADER)
    text = format_cross_table(rows)
    assert len(text.splitlines()) == 4 and "uct baseline" in text


def scripted(lines):
    it = iter(lines)
    return lambda prompt: next(it)


def test_human_agent_messages():
    out = []
    s = new_game().play(Move(2, 2))
    s = s.play(Move(0, 0)).play(Move(4, 4))  # Black to move again
    agent = HumanAgent(scripted(["2,2", "pass", "nonsense", "1,1"]), out.append)
    assert agent.select(s, None) == Move(1, 1)
    assert out[0] == "illegal: occupied"
    assert out[1] == "illegal: pass not allowed"
    assert out[2].startswith("could not parse")


def test_play_interactive_full_game():
    points = [f"{r},{c}" for r in range(5) for c in range(5)]
    out = []
    spec = MatchSpec((AgentSpec("human"), AgentSpec("random"), AgentSpec("random")), 1, seed=3)
    rep = play_interactive(spec, scripted(itertools.cycle(points)), out.append)
    assert rep.n == 1 and rep.ci95 is None
    assert out[-1].startswith("final score: black")
    boards = [o for o in out if o.count("\n") == 4]
    assert boards and set("".join(boards)) <= set("XOR. \n")


def test_human_seat_rejected_in_batch_match():
    with pytest.raises(ValueError):
        run_match(MatchSpec((AgentSpec("human"),) + RANDOM3[:2], 1))


@pytest.mark.slow
def test_workers_do_not_change_results():
    spec = MatchSpec((AgentSpec("uct", n=8),) + RANDOM3[:2], 6, seed=4)
    assert np.array_equal(run_match(spec).scores, run_match(spec, workers=2).scores)
