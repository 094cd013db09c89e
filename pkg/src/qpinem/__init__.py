"""Free electrons as probes of quantum light: forward electron-spectrum
engines, the inverse moment/statistics pipeline, homodyne tomography, and
Monte-Carlo measurement budgets."""

from . import fockspace, interaction, oracle, reconstruction, tomography, experiment
from .errors import ConfigError, NumericsError

__version__ = "0.1.0"

__all__ = ["fockspace", "interaction", "oracle", "reconstruction",
           "tomography", "experiment", "ConfigError", "NumericsError",
           "__version__"]
