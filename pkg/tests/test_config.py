from fractions import Fraction

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from epihumat.config import (PRESETS, Calendar, DayKind, ScenarioKind, ScenarioNotFoundError, ScenarioParseError,
                             ScenarioValidationError, VirusParams, config_hash, day_kind, derive_transition_table,
                             load_scenario, parse_scenario, preset_path, save_scenario, with_population_size)
from epihumat.states import Phase


def test_scenario1_preset_defaults():
    cfg = load_scenario(preset_path("scenario1"))
    assert cfg.scenario_kind is ScenarioKind.NO_MEASURES
    assert cfg.virus.p_se == 0.07
    assert cfg.calendar.horizon_days == 150
    assert cfg.population.target_size == 11646


def test_scenario2_preset_is_lockdown_with_lower_contact_probability():
    cfg = load_scenario(preset_path("scenario2"))
    assert cfg.scenario_kind is ScenarioKind.LOCKDOWN
    assert cfg.virus.p_se == 0.05


@pytest.mark.parametrize("name", PRESETS)
def test_every_preset_loads(name):
    cfg = load_scenario(preset_path(name))
    assert cfg.replicates == 10


def _raw(tmp_path, **virus):
    return {"scenario_kind": "NoMeasures", "virus": virus, "initial_infected_fraction": 0.01,
            "population": {"tract_map": "a", "census": "b", "survey": "c", "profile_tree": "d",
                           "target_size": 10}}


def test_out_of_range_probability_names_field(tmp_path):
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(_raw(tmp_path, p_id=1.2))
    assert any(p.startswith("virus.p_id") and "out of [0,1]" in p for p in err.value.problems)


def test_unknown_key_rejected(tmp_path):
    raw = _raw(tmp_path)
    raw["virus"]["p_xx"] = 0.1
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(raw)
    assert "virus.p_xx: unknown key" in err.value.problems


def test_missing_section_reported(tmp_path):
    raw = _raw(tmp_path)
    del raw["virus"]
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(raw)
    assert "virus: missing required section" in err.value.problems


def test_branch_sum_violation():
    with pytest.raises(ValueError, match="p_id \\+ p_ih"):
        VirusParams(p_id=0.6, p_ih=0.5)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ScenarioNotFoundError):
        load_scenario(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("virus: [unclosed")
    with pytest.raises(ScenarioParseError):
        load_scenario(bad)


def test_preventive_requires_its_fields(tmp_path):
    raw = _raw(tmp_path, p_se_accepting=None)
    raw["scenario_kind"] = "PreventiveMeasures"
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(raw)
    assert any("p_se_accepting is required" in p for p in err.value.problems)


def test_unknown_critical_node_reference(tmp_path):
    raw = _raw(tmp_path)
    raw["critical_node_plans"] = [{"node_id": "council", "orientation": "ProMeasures", "start_day": 0,
                                   "end_day": 10, "frequency_days": 5, "reach": 0.5}]
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(raw)
    assert any("unknown node 'council'" in p for p in err.value.problems)


def test_transition_table_residuals():
    t = derive_transition_table(VirusParams())
    inf = {b.outcome: b.probability for b in t.outcomes(Phase.INFECTIOUS)}
    assert inf[Phase.RECOVERED] == Fraction("0.925")
    icu = {b.outcome: b.probability for b in t.outcomes(Phase.ICU)}
    assert icu[Phase.RECOVERED] == Fraction("0.69")
    zero = derive_transition_table(VirusParams(p_hd=0, p_hicu=0))
    hosp = {b.outcome: b.probability for b in zero.outcomes(Phase.HOSPITALIZED)}
    assert hosp[Phase.RECOVERED] == 1


probs = st.floats(0, 1, allow_nan=False)


@given(probs, probs, probs, probs, probs)
def test_branch_distributions_sum_to_one(a, b, c, d, e):
    if a + b > 1 or c + d > 1:
        return
    t = derive_transition_table(VirusParams(p_id=a, p_ih=b, p_hd=c, p_hicu=d, p_icud=e))
    for phase in (Phase.INFECTIOUS, Phase.HOSPITALIZED, Phase.ICU):
        assert sum(br.probability for br in t.outcomes(phase)) == 1


def test_day_kind_examples():
    c = Calendar()
    assert day_kind(c, 0) is DayKind.WORKING
    assert day_kind(c, 5) is DayKind.NON_WORKING
    assert day_kind(c, 7) is DayKind.WORKING
    with pytest.raises(IndexError):
        day_kind(c, 150)


@given(st.sampled_from(["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]),
       st.integers(0, 140))
def test_day_kind_weekly_period(anchor, day):
    c = Calendar(anchor_weekday=anchor)
    assert day_kind(c, day) is day_kind(c, day + 7)


@settings(max_examples=30)
@given(p_se=probs, days_rs=st.integers(1, 400), seed=st.integers(0, 2**63), reps=st.integers(1, 20))
def test_serialize_round_trip(tmp_path_factory, p_se, days_rs, seed, reps):
    cfg = load_scenario(preset_path("scenario3b"))
    cfg = cfg.model_copy(update={"virus": cfg.virus.model_copy(update={"p_se": p_se, "days_rs": days_rs}),
                                 "rng_seed": seed, "replicates": reps})
    path = save_scenario(cfg, tmp_path_factory.mktemp("rt") / "s.yaml")
    again = load_scenario(path)
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_population_override_rescales_node_networks():
    cfg = load_scenario(preset_path("scenario3a"))
    small = with_population_size(cfg, 2000)
    assert small.population.target_size == 2000
    assert small.node("press").network_size == round(7000 * 2000 / 11646)


def test_hash_changes_with_content():
    cfg = load_scenario(preset_path("scenario1"))
    assert config_hash(cfg) != config_hash(cfg.model_copy(update={"rng_seed": 2}))


def test_preset_file_is_plain_yaml():
    raw = yaml.safe_load(preset_path("scenario3").read_text())
    assert raw["schema_version"] == 1
