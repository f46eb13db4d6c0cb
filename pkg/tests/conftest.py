import csv
from contextlib import contextmanager
import json
from pathlib import Path

import numpy as np
import pytest

from epihumat.config import parse_scenario

NEEDS = ("hedonism", "belonging", "safety")


def write_mini_city(root: Path, n_survey: int = 40, seed: int = 0, width: int = 10, height: int = 10) -> dict:
    """A 10x10 board with two tracts and a small survey; returns the population section."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    lines = [f"size,{width},{height}"]
    for x in range(width):
        for y in range(height):
            lines.append(f"cell,{x},{y},{'T1' if x < width // 2 else 'T2'}")
    for kind, n in (("work", 6), ("college", 2), ("essential", 5), ("leisure", 4)):
        for i in range(n):
            lines.append(f"location,{kind},{i % width},{(3 * i) % height},{kind}-{i}")
    (root / "tracts.txt").write_text("\n".join(lines) + "\n")

    with (root / "census.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tract", "age_band", "gender", "count"])
        for tract in ("T1", "T2"):
            for band in ("18-29", "30-49", "50-64", "65+"):
                for g in ("man", "woman"):
                    w.writerow([tract, band, g, int(rng.integers(20, 60))])

    header = ["id", "gender", "age", "family", "rural_house", "economic_activity", "essential_worker",
              "salary_band", "census_tract", "accepts_measures"]
    for nd in NEEDS:
        header += [f"importance_{nd}", f"sat_accept_{nd}", f"sat_reject_{nd}"]
    acts = ["employee", "retired", "college_student", "unemployed", "autonomous"]
    young, old = [], []
    with (root / "survey.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(n_survey):
            age = int(rng.integers(18, 90))
            act = acts[i % len(acts)]
            accepts = i % 4 != 0
            row = [f"r{i}", ("man", "woman")[i % 2], age, "couple-children", 0, act,
                   int(act == "employee" and i % 3 == 0), "1000-1500", ("T1", "T2")[i % 2], int(accepts)]
            for _ in NEEDS:
                row += [round(float(rng.uniform(0, 1)), 2), round(float(rng.uniform(-1, 1)), 2),
                        round(float(rng.uniform(-1, 1)), 2)]
            w.writerow(row)
            (young if age < 40 else old).append(f"r{i}")
    tree = {"attribute": "age", "op": "<", "value": 40,
            "true": {"leaf": "young", "accept_fraction": 0.6, "members": young},
            "false": {"leaf": "old", "accept_fraction": 0.8, "members": old}}
    (root / "tree.json").write_text(json.dumps(tree))
    return {"tract_map": "tracts.txt", "census": "census.csv", "survey": "survey.csv",
            "profile_tree": "tree.json", "target_size": 200}


@pytest.fixture
def mini_city(tmp_path):
    return tmp_path / "city", write_mini_city(tmp_path / "city")


@pytest.fixture
def make_config(mini_city):
    base_dir, population = mini_city

    def make(kind="NoMeasures", **extra):
        raw = {"scenario_kind": kind, "virus": {}, "population": dict(population),
               "initial_infected_fraction": 0.05, "calendar": {"horizon_days": 20}}
        for key, value in extra.items():
            if isinstance(value, dict) and isinstance(raw.get(key), dict):
                raw[key] = {**raw[key], **value}
            else:
                raw[key] = value
        return parse_scenario(raw, base_dir)

    return make


# --- acceptance reporting: one PASS/FAIL line per criterion in the terminal summary ---

class _CriterionLog:
    def __init__(self):
        self.results: dict[int, tuple[str, bool, str]] = {}

    @contextmanager
    def check(self, number: int, title: str):
        note = []
        try:
            yield note
        except BaseException as err:
            self.results[number] = (title, False, f"{type(err).__name__}: {str(err).splitlines()[0] if str(err) else ''}")
            raise
        self.results[number] = (title, True, "; ".join(note))


def pytest_configure(config):
    config._criteria = _CriterionLog()


@pytest.fixture
def criterion(request):
    return request.config._criteria.check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config._criteria.results
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, note = results[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
                                    + (f"  [{note}]" if note else ""))
