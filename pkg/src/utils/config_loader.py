"""
Configuration loader
"""

import json
import os
from pathlib import Path
from typing import Dict

from src.core.errors import ConfigError

REQUIRED_SECTIONS = ['system', 'spectral', 'hyperprior', 'sampling', 'output', 'logging']


def default_config_path() -> Path:
    return Path(__file__).parent.parent.parent / "config" / "config.json"


def load_config(config_path: str = None) -> Dict:
    """Load configuration from JSON file"""
    if config_path is None:
        config_path = default_config_path()

    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(config_path, 'r') as f:
        try:
            config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {config_path}: {e}") from e

    # Validate required sections
    for section in REQUIRED_SECTIONS:
        if section not in config:
            raise ConfigError(f"Missing required config section: {section}")

    return config


def thread_cap(config: Dict) -> int:
    """Internal parallelism cap: IGMRF_THREADS wins over system.threads"""
    raw = os.environ.get("IGMRF_THREADS", config.get('system', {}).get('threads', 1))
    try:
        threads = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"IGMRF_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"Thread cap must be at least 1, got {threads}")
    return threads
