import numpy as np
import pytest

from mpgo.engine import read_records
from mpgo.network import AZ, DESCENT, MultiGoNet, load_checkpoint
from mpgo.selfplay import (LEARNER, UCT, Pipeline, ReplayBuffer, TrainConfig, assign_agents,
                           play_training_game, warm_start_epsilon)


def tiny(variant=AZ, **kw):
    base = dict(variant=variant, n_updates=2, n_games=2, n_envs=1, n_rollouts=8,
                blocks=1, filters=8, value_hidden=16, lr=1e-3)
    base.update(kw)
    return TrainConfig(**base)


def test_warm_start_schedule():
    assert warm_start_epsilon(0, 50) == 0.5
    assert warm_start_epsilon(10, 50) == pytest.approx(0.3)
    assert warm_start_epsilon(22, 50) == pytest.approx(0.06)
    assert warm_start_epsilon(23, 50) == 0.05
    assert warm_start_epsilon(49, 50) == 0.05
    vals = [warm_start_epsilon(i, 50) for i in range(50)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_assignment_frequencies():
    rng = np.random.default_rng(0)
    for eps in (0.5, 0.05):
        draws = np.array([[a == UCT for a in assign_agents(rng, eps)] for _ in range(20_000)])
        assert abs(draws.mean() - eps) < 0.01
        # colours are independent
        assert abs(np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]) < 0.03


def test_az_game_targets():
    net = MultiGoNet(AZ, 1, 8, 16)
    cfg = tiny()
    g = play_training_game((LEARNER, UCT, LEARNER), net, cfg, np.random.default_rng(1))
    assert g.n_positions > 0 and g.n_policy_targets > 0
    pol = g.policies[g.policy_mask > 0]
    assert np.allclose(pol.sum(1), 1.0, atol=1e-6)
    assert not g.policies[g.policy_mask == 0].any()
    # value targets are the final scores
    assert (g.values == np.array(g.record.final_scores, dtype=np.float32)).all()
    states = g.record.replay()
    assert states[-1].is_terminal()
    assert list(states[-1].score()) == g.record.final_scores
    learner_stats = [s for s in g.record.per_move_stats if s and s["agent"] == LEARNER]
    assert len(learner_stats) == g.n_policy_targets


def test_uct_value_targets_toggle():
    net = MultiGoNet(AZ, 1, 8, 16)
    with_uct = play_training_game((UCT,) * 3, net, tiny(), np.random.default_rng(2))
    without = play_training_game((UCT,) * 3, net, tiny(uct_value_targets=False), np.random.default_rng(2))
    assert with_uct.n_positions > 0 and with_uct.n_policy_targets == 0
    assert without.n_positions == 0


def test_descent_game_targets_in_range():
    net = MultiGoNet(DESCENT, 1, 8, 16)
    g = play_training_game((LEARNER,) * 3, net, tiny(DESCENT), np.random.default_rng(3))
    assert g.n_positions > len(g.record.moves)  # tree positions, not just the trajectory
    assert (g.values >= 0).all() and (g.values <= 25).all()
    assert g.n_policy_targets == 0


def test_replay_buffer_fifo_and_roundtrip(tmp_path):
    net = MultiGoNet(AZ, 1, 8, 16)
    games = [play_training_game((UCT,) * 3, net, tiny(n_rollouts=4), np.random.default_rng(i))
             for i in range(3)]
    buf = ReplayBuffer(2)
    buf.extend(games)
    assert len(buf) == 2 and buf.games[0] is games[1]
    buf.save(tmp_path / "b.npz")
    back = ReplayBuffer.load(tmp_path / "b.npz", 2)
    for a, b in zip(buf.arrays(), back.arrays()):
        assert np.array_equal(a, b)
    assert [g.record for g in back.games] == [g.record for g in buf.games]


def test_run_directory(tmp_path):
    p = Pipeline(tiny(), tmp_path / "run")
    p.run()
    d = tmp_path / "run"
    lines = (d / "metrics.csv").read_text().splitlines()
    assert lines[0] == "iteration,epsilon,mean_loss,buffer_fill,games,positions"
    assert len(lines) == 3
    assert sorted(x.name for x in (d / "eval").iterdir()) == \
        ["iter_0000.ckpt", "iter_0001.ckpt", "iter_0002.ckpt"]
    assert load_checkpoint(d / "latest.ckpt").iteration == 2
    assert len(list(read_records(d / "games.jsonl"))) == 4


def test_serial_runs_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        Pipeline(tiny(DESCENT), tmp_path / name).run()
    for f in ("metrics.csv", "latest.ckpt", "games.jsonl", "eval/iter_0002.ckpt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_resume_matches_uninterrupted(tmp_path):
    Pipeline(tiny(n_updates=3), tmp_path / "full").run()
    part = Pipeline(tiny(n_updates=3), tmp_path / "part")
    part.run_iteration()
    part.run_iteration()
    resumed = Pipeline(tiny(n_updates=3), tmp_path / "part")
    assert resumed.iteration == 2
    resumed.run()
    for f in ("metrics.csv", "latest.ckpt"):
        assert (tmp_path / "full" / f).read_bytes() == (tmp_path / "part" / f).read_bytes()


def test_wall_clock_limit_truncates(tmp_path):
    p = Pipeline(tiny(wall_clock_limit=0.0), tmp_path / "run")
    assert p.run() == [] and p.truncated
    assert '"truncated": true' in (tmp_path / "run" / "summary.json").read_text()


@pytest.mark.slow
def test_worker_count_does_not_change_games():
    serial = Pipeline(tiny(n_games=3))
    parallel = Pipeline(tiny(n_games=3, n_envs=2))
    a, b = serial.generate(0.5), parallel.generate(0.5)
    assert [g.record for g in a] == [g.record for g in b]
