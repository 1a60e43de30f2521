from pathlib import Path

from reponlab.harness.config import ConfigError, Experiment, ExperimentConfig, load_config, parse_config, serialize_config
from reponlab.harness.figures import FIGURES, FigureError, emit_figure_data
from reponlab.harness.runner import RunError, RunManifest, run

DEFAULTS_FILE = Path(__file__).with_name("defaults.cfg")
