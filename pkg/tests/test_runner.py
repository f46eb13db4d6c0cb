import os
from pathlib import Path

import numpy as np
import pytest

from epihumat.reporting import read_timeseries, summarize, write_timeseries
from epihumat.runner import (METRIC_COLUMNS, RunResult, _seed_count, init_world, run_day, run_replicates,
                             run_simulation)
from epihumat.states import PHASE_COLUMNS, Phase

GOLDEN = Path(__file__).parent / "data" / "golden_mini_5days.csv"


def test_seed_count_examples():
    assert _seed_count(0.01, 10_000) == 100
    assert _seed_count(0.0, 10_000) == 0
    assert _seed_count(0.005, 11_646) == 58


def test_initial_state(make_config):
    w = init_world(make_config(), seed=3)
    counts = w.epi.counts()
    assert w.size == 200
    assert counts[Phase.INFECTIOUS] == 10 and counts[Phase.SUSCEPTIBLE] == 190


def test_no_seeds_means_no_epidemic(make_config):
    rows = run_simulation(make_config(initial_infected_fraction=0.0), seed=1)
    col = {c: rows[:, j] for j, c in enumerate(METRIC_COLUMNS)}
    assert np.all(col["susceptible"] == 200)
    assert np.all(col["new_infections"] == 0)


def test_world_reproducible(make_config):
    cfg = make_config()
    a, b = init_world(cfg, seed=5), init_world(cfg, seed=5)
    assert np.array_equal(a.graph.dst, b.graph.dst) and np.array_equal(a.humat.sat, b.humat.sat)
    assert np.array_equal(a.epi.phase, b.epi.phase)
    assert np.array_equal(run_simulation(cfg, 5), run_simulation(cfg, 5))


def test_different_seeds_differ(make_config):
    cfg = make_config()
    assert not np.array_equal(run_simulation(cfg, 1), run_simulation(cfg, 2))


def test_single_survivor_cannot_be_infected(make_config):
    w = init_world(make_config(initial_infected_fraction=0.0), seed=0)
    w.epi.phase[1:] = Phase.DEAD
    w.epi.next_phase[1:] = -1
    w.epi.due_day[1:] = -1
    for _ in range(5):
        m = run_day(w)
        assert m.new_infections == 0 and m.count(Phase.DEAD) == 199
        assert m.acceptance_level in (0.0, 1.0)


def test_per_day_conservation_and_monotone_dead(make_config):
    rows = run_simulation(make_config("PreventiveMeasures", virus={"days_rs": 5}), seed=4)
    states = rows[:, 1:1 + len(PHASE_COLUMNS)]
    assert np.all(states.sum(1) == 200)
    assert np.all(np.diff(states[:, PHASE_COLUMNS.index("dead")]) >= 0)
    assert np.all((rows[:, -1] >= 0) & (rows[:, -1] <= 1))


def test_single_replicate_mean_equals_replicate(make_config):
    res = run_replicates(make_config(), n=1, root_seed=7)
    assert res.seeds == [7]
    assert np.array_equal(res.mean, res.replicates[0])


def test_parallel_matches_serial(make_config):
    cfg = make_config()
    a = run_replicates(cfg, n=3, root_seed=10, workers=1)
    b = run_replicates(cfg, n=3, root_seed=10, workers=2)
    assert a.seeds == b.seeds == [10, 11, 12]
    assert all(np.array_equal(x, y) for x, y in zip(a.replicates, b.replicates))


def test_replicate_count_validation(make_config):
    with pytest.raises(ValueError):
        run_replicates(make_config(), n=0)


def test_summary_of_constant_run():
    rows = np.zeros((3, len(METRIC_COLUMNS)))
    rows[:, 0] = range(3)
    rows[:, 1] = 8
    rows[:, 1 + PHASE_COLUMNS.index("infectious")] = [2, 1, 0]
    rows[:, 1 + PHASE_COLUMNS.index("recovered")] = [0, 1, 2]
    s = summarize(RunResult([0], [rows], 10), initial_infected=2)
    assert s["peak_prevalence"] == 0.2 and s["peak_day"] == 0
    assert s["attack_rate"] == 0.2 and s["final_recovered_or_dead"] == 0.2


def test_golden_five_days(make_config, tmp_path):
    cfg = make_config(calendar={"horizon_days": 5})
    rows = run_simulation(cfg, seed=42)
    out = write_timeseries(tmp_path / "g.csv", rows, 200)
    if os.environ.get("EPIHUMAT_REGEN_GOLDEN"):
        GOLDEN.parent.mkdir(exist_ok=True)
        GOLDEN.write_bytes(out.read_bytes())
    assert out.read_bytes() == GOLDEN.read_bytes()
    assert read_timeseries(GOLDEN)["day"].tolist() == [0, 1, 2, 3, 4]
