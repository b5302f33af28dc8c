import os
import logging
from flask import Config

__version__ = "0.1.0"
TOOL_NAME = "cubesphere-damping"

# Configure logging for debugging
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)

EARTH_RADIUS = 6371220.0  # metres
# a run is unstable once max|s| exceeds this multiple of the initial max
BLOWUP_FACTOR = 1e6

DEFAULTS = {
    'RADIUS': EARTH_RADIUS,
    'BLOWUP_FACTOR': BLOWUP_FACTOR,
    'BISECTION_STEPS': 3000,
    'PANEL_RUN_STEPS': 3000,
    'SEED': 0,
    'TOLERANCE': 1e-4,
    'SAMPLES': 65,
    'LOG_LEVEL': 'INFO',
    'GHOSTS': 'extended',
}


def load_config(root_path=None):
    """Build the runtime configuration.

    Defaults first, then an optional settings file named by CUBESTAB_SETTINGS,
    then CUBESTAB_* environment variables (values parsed as JSON when possible,
    so CUBESTAB_RADIUS=1.0 arrives as a float).
    """
    config = Config(root_path or os.getcwd(), defaults=DEFAULTS)
    if config.from_envvar('CUBESTAB_SETTINGS', silent=True):
        logger.info(f"Loaded settings file {os.environ['CUBESTAB_SETTINGS']}")
    config.from_prefixed_env('CUBESTAB')
    return config


def configure_logging(level):
    if isinstance(level, str):
        level = level.upper()
    logging.getLogger().setLevel(level)
    logger.debug(f"Log level set to {level}")
