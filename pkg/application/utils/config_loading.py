import json
import logging
import os
from pathlib import Path

from cachelib import SimpleCache
from dotenv import load_dotenv

CONFIG_PATH = Path(__file__).parent.parent / 'config.json'

DEFAULT_CONFIG = {
    'abs_tol': 1e-10,
    'rel_tol': 0.0,
    'max_iterations': 500,
    'gamma': 1e-6,
    'grid_ladder': [128, 256, 512, 1024],
    'ladder_tol': 1e-4,
    'discretization_rule': 'product',
    'strict_ladder': True,
    'units': 'bits',
    'seed': 0,
    'mc_samples': 100000,
    'conjugate_grid_points': 129,
    'log_level': 'INFO',
}

# Environment variables that override config keys, with their parsers
ENV_OVERRIDES = {
    'CAPBOUNDS_GAMMA': ('gamma', float),
    'CAPBOUNDS_UNITS': ('units', str),
    'CAPBOUNDS_LOG_LEVEL': ('log_level', str),
    'CAPBOUNDS_SEED': ('seed', int),
}

# Initialize cache as None
cache = None


def init_cache(cache_instance=None):
    """Initialize the in-process result cache (a fresh SimpleCache by default)"""
    global cache
    cache = cache_instance if cache_instance is not None else SimpleCache(threshold=2000, default_timeout=0)
    return cache


def get_cache():
    global cache
    if cache is None:
        init_cache()
    return cache


def load_config(path=None):
    """
    Load configuration from config.json, falling back to built-in defaults,
    then apply .env / environment overrides.
    """
    load_dotenv()

    config = dict(DEFAULT_CONFIG)
    config_path = Path(path or os.getenv('CAPBOUNDS_CONFIG') or CONFIG_PATH)
    try:
        with open(config_path, 'r') as config_file:
            config.update(json.load(config_file))
    except FileNotFoundError:
        logging.warning(f"Config file not found at {config_path}; using built-in defaults")
    except json.JSONDecodeError as e:
        logging.warning(f"Config file {config_path} is not valid JSON ({e}); using built-in defaults")

    for env_name, (key, parse) in ENV_OVERRIDES.items():
        raw = os.getenv(env_name)
        if raw is None or raw == '':
            continue
        try:
            config[key] = parse(raw)
        except ValueError:
            logging.warning(f"Ignoring {env_name}={raw!r}: cannot parse as {parse.__name__}")

    return config
