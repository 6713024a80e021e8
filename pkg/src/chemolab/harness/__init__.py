"""Scenario files, run persistence, studies and the command line."""
from .config import bundled, bundled_names, load_scenario, scenario_from_dict
from .runs import convergence_study, load_final_state, run_scenario, sweep

__all__ = ["bundled", "bundled_names", "convergence_study", "load_final_state", "load_scenario",
           "run_scenario", "scenario_from_dict", "sweep"]
