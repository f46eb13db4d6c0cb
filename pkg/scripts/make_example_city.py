#!/usr/bin/env python3
"""Generate the synthetic example city shipped under ``src/epihumat/data/city``.

Everything here is invented: a 50x50 board split into 20 census tracts,
census marginals with a plausible age pyramid, a survey of 1,274
respondents with three needs (hedonism, belonging, safety) and a profile
tree grouping respondents by age, family and activity. Output is fully
determined by ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
from pathlib import Path

import numpy as np

from epihumat.population import (AgentAttributes, FAMILIES, SALARY_BANDS, WORKING_ACTIVITIES,
                                 classify_profile, ingest_real_agents, profile_tree_from_dict)

OUT = Path(__file__).resolve().parents[1] / "src" / "epihumat" / "data" / "city"
W = H = 50
COLS, ROWS = 5, 4
AGE_BANDS = [(18, 24), (25, 34), (35, 44), (45, 54), (55, 64), (65, 74), (75, 84), (85, 100)]
BAND_WEIGHT = np.array([0.09, 0.14, 0.18, 0.18, 0.16, 0.12, 0.09, 0.04])
LOCATION_COUNTS = {"work": 1500, "college": 40, "essential": 1200, "leisure": 800}
SURVEY_SIZE = 1274

TREE = {
    "attribute": "age", "op": "<", "value": 24,
    "true": {
        "attribute": "family", "op": "==", "value": "couple-no-children",
        "true": {"leaf": "young-couple"},
        "false": {"leaf": "young"},
    },
    "false": {
        "attribute": "age", "op": "<", "value": 65,
        "true": {
            "attribute": "economic_activity", "op": "in",
            "value": ["employee", "autonomous", "civil_servant", "executive"],
            "true": {"leaf": "working"},
            "false": {"leaf": "adult-inactive"},
        },
        "false": {"leaf": "senior"},
    },
}
# chance that a respondent in each leaf supports the measures
LEAF_ACCEPT = {"young-couple": 0.35, "young": 0.7, "working": 0.8, "adult-inactive": 0.8, "senior": 0.92}


def tract_codes():
    return [f"15030{d + 1:02d}{s + 1:03d}" for d in range(COLS) for s in range(ROWS)]


def write_map(rng, codes, path):
    xs = np.linspace(0, W, COLS + 1).round().astype(int)
    ys = np.linspace(0, H, ROWS + 1).round().astype(int)
    lines = ["# synthetic example city: 50x50 cells, 20 tracts", f"size,{W},{H}"]
    for x in range(W):
        for y in range(H):
            c = np.searchsorted(xs, x, side="right") - 1
            r = np.searchsorted(ys, y, side="right") - 1
            lines.append(f"cell,{x},{y},{codes[c * ROWS + r]}")
    for kind, n in LOCATION_COUNTS.items():
        for i in range(n):
            lines.append(f"location,{kind},{rng.integers(W)},{rng.integers(H)},{kind[0].upper()}{i:04d}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_census(rng, codes, path):
    tract_w = rng.uniform(0.6, 1.4, size=len(codes))
    rows = []
    for t, code in enumerate(codes):
        for b, (lo, hi) in enumerate(AGE_BANDS):
            band = f"{lo}+" if hi == 100 else f"{lo}-{hi}"
            for gender in ("man", "woman"):
                # more women at older ages
                tilt = 1.0 + (0.04 * b if gender == "woman" else -0.03 * b)
                mean = 10_000 * tract_w[t] * BAND_WEIGHT[b] * tilt
                rows.append((code, band, gender, int(rng.poisson(mean))))
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tract", "age_band", "gender", "count"])
        w.writerows(rows)
    return rows


def _attributes(rng, census_rows):
    counts = np.array([r[3] for r in census_rows], dtype=float)
    row = census_rows[rng.choice(len(census_rows), p=counts / counts.sum())]
    tract, band, gender = row[0], row[1], row[2]
    lo, hi = (int(band[:-1]), 90) if band.endswith("+") else map(int, band.split("-"))
    age = int(rng.integers(lo, hi + 1))
    if age < 24:
        activity = rng.choice(["college_student", "employee", "unemployed"], p=[0.55, 0.3, 0.15])
        family = rng.choice(["couple-no-children", "other", "one-person", "couple-children"], p=[0.25, 0.45, 0.2, 0.1])
    elif age < 65:
        activity = rng.choice(["employee", "autonomous", "civil_servant", "executive", "unemployed", "retired"],
                              p=[0.5, 0.1, 0.1, 0.05, 0.17, 0.08])
        family = rng.choice(FAMILIES, p=[0.15, 0.08, 0.04, 0.3, 0.08, 0.25, 0.1])
    else:
        activity = rng.choice(["retired", "unemployed", "autonomous"], p=[0.92, 0.04, 0.04])
        family = rng.choice(["one-person", "couple-no-children", "other", "couple-children"], p=[0.35, 0.45, 0.1, 0.1])
    works = activity in WORKING_ACTIVITIES
    essential = bool(works and rng.random() < 0.3)
    if activity in ("unemployed", "college_student"):
        salary = rng.choice(SALARY_BANDS[:3], p=[0.5, 0.35, 0.15])
    else:
        salary = rng.choice(SALARY_BANDS[1:], p=[0.15, 0.3, 0.35, 0.12, 0.05, 0.03])
    return {
        "gender": gender, "age": age, "family": str(family), "rural_house": bool(rng.random() < 0.08),
        "economic_activity": str(activity), "essential_worker": essential, "salary_band": str(salary),
        "census_tract": tract,
    }


def _u(rng, lo, hi):
    return round(float(rng.uniform(lo, hi)), 2)


def _needs(rng, accepts: bool):
    if accepts:
        return {
            "hedonism": (_u(rng, 0.2, 0.6), _u(rng, -0.6, 0.0), _u(rng, 0.0, 0.6)),
            "belonging": (_u(rng, 0.3, 0.8), _u(rng, 0.0, 1.0), _u(rng, -1.0, 0.0)),
            "safety": (_u(rng, 0.5, 1.0), _u(rng, 0.3, 1.0), _u(rng, -1.0, -0.3)),
        }
    return {
        "hedonism": (_u(rng, 0.6, 1.0), _u(rng, -1.0, -0.4), _u(rng, 0.4, 1.0)),
        "belonging": (_u(rng, 0.0, 0.3), _u(rng, -1.0, 0.0), _u(rng, 0.0, 1.0)),
        "safety": (_u(rng, 0.0, 0.4), _u(rng, -0.2, 0.4), _u(rng, -0.4, 0.2)),
    }


def write_survey(rng, census_rows, path):
    tree = profile_tree_from_dict(_tree_with_members({k: ["x"] for k in LEAF_ACCEPT}, {}))
    header = ["id", "gender", "age", "family", "rural_house", "economic_activity", "essential_worker",
              "salary_band", "census_tract", "accepts_measures"]
    for need in ("hedonism", "belonging", "safety"):
        header += [f"importance_{need}", f"sat_accept_{need}", f"sat_reject_{need}"]
    rows = []
    for i in range(SURVEY_SIZE):
        a = _attributes(rng, census_rows)
        leaf = classify_profile(AgentAttributes(**a), tree)
        accepts = bool(rng.random() < LEAF_ACCEPT[leaf])
        needs = _needs(rng, accepts)
        row = [f"R{i:04d}", a["gender"], a["age"], a["family"], int(a["rural_house"]), a["economic_activity"],
               int(a["essential_worker"]), a["salary_band"], a["census_tract"], int(accepts)]
        for need in ("hedonism", "belonging", "safety"):
            row += list(needs[need])
        rows.append(row)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _tree_with_members(members, fractions):
    def fill(node):
        if "leaf" in node:
            out = dict(node)
            out["accept_fraction"] = fractions.get(node["leaf"], 0.5)
            out["members"] = members[node["leaf"]]
            return out
        return {**node, "true": fill(node["true"]), "false": fill(node["false"])}

    return {"root": fill(TREE)}


def write_tree(survey_path, path):
    survey = ingest_real_agents(survey_path)
    skeleton = profile_tree_from_dict(_tree_with_members({k: ["x"] for k in LEAF_ACCEPT}, {}))
    members = {k: [] for k in LEAF_ACCEPT}
    accepted = {k: 0 for k in LEAF_ACCEPT}
    for r in survey:
        leaf = classify_profile(r.attributes, skeleton)
        members[leaf].append(r.respondent_id)
        accepted[leaf] += r.accepts_measures
    fractions = {k: round(accepted[k] / len(members[k]), 4) for k in LEAF_ACCEPT}
    path.write_text(json.dumps(_tree_with_members(members, fractions), indent=1) + "\n", encoding="utf-8")
    return fractions


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20211)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    codes = tract_codes()
    write_map(rng, codes, args.out / "tracts.txt")
    census_rows = write_census(rng, codes, args.out / "census.csv")
    write_survey(rng, census_rows, args.out / "survey.csv")
    fractions = write_tree(args.out / "survey.csv", args.out / "profile_tree.json")
    print("leaf accept fractions:", fractions)


if __name__ == "__main__":
    main()
