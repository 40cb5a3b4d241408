import os
from dataclasses import dataclass

import numba
from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()


@dataclass(frozen=True)
class Settings:
    seed: int = 0
    status_bits: int = 64
    threads: int = 0
    oracle_vertex_cap: int = 10_000
    square_max_entries: int = 50_000_000
    report_dir: str = 'reports'
    log_level: str = 'WARNING'


def _env_int(name, default, minimum=0):
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        value = int(raw, 0)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def load_settings():
    """Read settings from the environment (and .env, if present)"""
    status_bits = _env_int('MIS2_STATUS_BITS', 64)
    if status_bits not in (32, 64):
        raise ConfigError(f"MIS2_STATUS_BITS must be 32 or 64, got {status_bits}")

    seed = _env_int('MIS2_SEED', 0)
    if seed >= 2**64:
        raise ConfigError(f"MIS2_SEED must fit in 64 bits, got {seed}")

    log_level = os.getenv('MIS2_LOG_LEVEL', 'WARNING').upper()
    if log_level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        raise ConfigError(f"MIS2_LOG_LEVEL is not a logging level: {log_level!r}")

    return Settings(
        seed=seed,
        status_bits=status_bits,
        threads=_env_int('MIS2_THREADS', 0),
        oracle_vertex_cap=_env_int('MIS2_ORACLE_CAP', 10_000, minimum=1),
        square_max_entries=_env_int('MIS2_SQUARE_MAX_ENTRIES', 50_000_000, minimum=1),
        report_dir=os.getenv('MIS2_REPORT_DIR', 'reports'),
        log_level=log_level,
    )


def max_threads():
    return numba.config.NUMBA_NUM_THREADS


def apply_threads(n):
    """
    Set the number of worker threads used by the parallel kernels.

    Args:
        n: Requested thread count; 0 means every available thread

    Returns:
        The thread count actually in effect (clamped to what numba launched)
    """
    if n < 0:
        raise ConfigError(f"thread count must be >= 0, got {n}")
    available = max_threads()
    used = available if n == 0 else min(n, available)
    numba.set_num_threads(used)
    return used


def _load_or_defaults():
    """Import never fails on a bad environment; the CLI reports the error instead"""
    try:
        return load_settings(), None
    except ConfigError as e:
        return Settings(), e


settings, settings_error = _load_or_defaults()
