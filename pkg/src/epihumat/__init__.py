"""Agent-based epidemic simulation coupled with HUMAT opinion dynamics."""

from .config import ScenarioConfig, load_scenario, preset_path, resolve_scenario, with_population_size
from .runner import RunResult, init_world, run_day, run_replicates, run_simulation

__all__ = ["ScenarioConfig", "load_scenario", "preset_path", "resolve_scenario", "with_population_size",
           "RunResult", "init_world", "run_day", "run_replicates", "run_simulation"]
__version__ = "0.1.0"
