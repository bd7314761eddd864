import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional, Union

from flask import Flask
from flask import Response
from flask_cors import CORS
from marshmallow import ValidationError
from werkzeug.exceptions import HTTPException

from levsample.errors import ConfigError, LevsampleError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "SLEV_LAMBDA": 0.9,
    "FLOOR": 0.0,
    "REPLICATES": 100,
    "MAX_RETRIES": 100,
    "THREADS": 0,  # 0 lets the thread pool pick
    "MASTER_SEED": 0,
    "MIN_SAMPLING_MASS": 1.0,  # regularity flag threshold for pi_min * r * n
    "MAX_CONTENT_LENGTH": int(100e6),
    "CACHE_TYPE": "SimpleCache",
    "CACHE_DEFAULT_TIMEOUT": 300,
}


def instance_directory(instance_path: Optional[Union[Path, str]] = None) -> Optional[Path]:
    if instance_path is not None:
        return Path(instance_path)
    if "LEVSAMPLE_INSTANCE" in os.environ:
        return Path(os.environ["LEVSAMPLE_INSTANCE"])
    return None


def load_config(instance_path: Optional[Union[Path, str]] = None) -> Dict:
    """
    Returns the defaults merged with ``config.json`` from the instance directory.

    The instance directory is ``instance_path`` if given, else the ``LEVSAMPLE_INSTANCE`` environment variable. If it
    is set but holds no ``config.json``, the defaults are written there. Without an instance directory the defaults
    are returned unchanged.
    """
    config = dict(DEFAULT_CONFIG)
    directory = instance_directory(instance_path)
    if directory is None:
        return config

    directory.mkdir(parents=True, exist_ok=True)
    config_path = directory / Path("config.json")
    if config_path.exists():
        try:
            with open(config_path, mode="r") as config_file:
                config.update(json.load(config_file))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read {config_path}: {e}")
    else:
        with open(config_path, mode="w") as config_file:
            json.dump(DEFAULT_CONFIG, config_file, indent="    ")
    return config


def master_seed(flag: Optional[int], config: Dict) -> int:
    """The seed flag if given, else ``LEVSAMPLE_SEED``, else the configured ``MASTER_SEED``."""
    if flag is not None:
        return flag
    if "LEVSAMPLE_SEED" in os.environ:
        try:
            return int(os.environ["LEVSAMPLE_SEED"])
        except ValueError:
            raise ConfigError(f"LEVSAMPLE_SEED must be an integer, got {os.environ['LEVSAMPLE_SEED']!r}")
    return int(config["MASTER_SEED"])


def create_app(test_config=None, instance_path: Optional[Union[Path, str]] = None):
    app = Flask(__name__)
    CORS(app)

    # `test_config` replaces the instance directory lookup entirely
    if test_config is None:
        app.config.from_mapping(load_config(instance_path))
    else:
        app.config.from_mapping(DEFAULT_CONFIG)
        app.config.from_mapping(test_config)

    def message(text: str, status: int) -> Response:
        return Response(response=json.dumps({"message": text}), status=status, content_type="application/json")

    @app.errorhandler(Exception)
    def handle_exception(e: Exception):
        if isinstance(e, HTTPException):
            return message(e.description, e.code)
        elif isinstance(e, LevsampleError):
            app.logger.info("Rejected request: %s", e)
            return message(str(e), e.status_code)
        elif isinstance(e, ValidationError):
            return message(str(e.messages), 400)
        else:
            app.logger.error(e, exc_info=True)
            return message("Internal Server Error", 500)

    from levsample.api import bp
    app.register_blueprint(bp)

    from levsample.api import cache
    cache.init_app(app)

    return app
