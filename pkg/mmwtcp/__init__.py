from .config import ScenarioConfig, ConfigError  # NOQA
from .engine import Simulator, SimulationError  # NOQA
from .parser import parse_config, load_config  # NOQA
from .presets import preset  # NOQA
from .results import RunResult, SummaryRow, emit_csv  # NOQA
from .scenario import run_scenario, monte_carlo, run_many  # NOQA
from ._version import __version__  # NOQA
