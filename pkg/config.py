import os
import logging
from dataclasses import dataclass
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass(frozen=True)
class Settings:
    """Truncation and resource defaults, overridable from .env"""
    pmax: int
    kmax: int
    qmax: int
    moree_kmax: int
    sieve_limit: int
    sieve_max_limit: int
    threads: int
    log_level: str


def _get_int(name: str, default: int, minimum: int = 1) -> int:
    """Read a positive integer environment variable"""
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        value = int(raw.strip().replace('_', ''))
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def get_log_level() -> str:
    """Read ARTIN_LOG_LEVEL from .env file"""
    level = os.getenv('ARTIN_LOG_LEVEL', 'INFO').strip().upper()
    if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        raise ValueError(f"ARTIN_LOG_LEVEL has unknown level {level!r}")
    return level


def load_settings() -> Settings:
    """Collect all settings from the environment"""
    settings = Settings(
        pmax=_get_int('ARTIN_PMAX', 1_000_000, minimum=100),
        kmax=_get_int('ARTIN_KMAX', 30),
        qmax=_get_int('ARTIN_QMAX', 120),
        moree_kmax=_get_int('ARTIN_MOREE_KMAX', 1000),
        sieve_limit=_get_int('ARTIN_SIEVE_LIMIT', 2_000_000, minimum=10),
        sieve_max_limit=_get_int('ARTIN_SIEVE_MAX_LIMIT', 500_000_000, minimum=10),
        threads=_get_int('ARTIN_THREADS', os.cpu_count() or 1),
        log_level=get_log_level(),
    )
    logger.debug(f"Loaded settings: {settings}")
    return settings
