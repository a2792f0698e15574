"""
Runtime Configuration for Canon

This module reads environment settings (optionally from a .env file) and
configures logging for command line runs.
"""

import logging
import os
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_GRAPH_DIR = Path(__file__).parent.parent / "data"


@dataclass(frozen=True)
class Settings:
    """
    Defaults for sampling and I/O, overridable through CANON_* variables.
    """
    samples: int = 200_000
    seed: int = 0
    batches: int = 20
    sampler: str = "uniform-dirichlet"
    precision: str = "double"
    workers: int = 1
    log_level: str = "WARNING"
    graph_dir: str = str(DEFAULT_GRAPH_DIR)

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Build settings from the process environment.

        Returns:
            Settings: Parsed settings

        Raises:
            ValueError: If a numeric variable cannot be parsed
        """
        try:
            return cls(
                samples=int(os.getenv('CANON_SAMPLES', cls.samples)),
                seed=int(os.getenv('CANON_SEED', cls.seed)),
                batches=int(os.getenv('CANON_BATCHES', cls.batches)),
                sampler=os.getenv('CANON_SAMPLER', cls.sampler),
                precision=os.getenv('CANON_PRECISION', cls.precision),
                workers=int(os.getenv('CANON_WORKERS', cls.workers)),
                log_level=os.getenv('CANON_LOG_LEVEL', cls.log_level).upper(),
                graph_dir=os.getenv('CANON_GRAPH_DIR', str(DEFAULT_GRAPH_DIR)),
            )
        except ValueError as e:
            raise ValueError(f"Invalid CANON_* environment setting: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def get_settings() -> Settings:
    """Return settings read from the current environment."""
    return Settings.from_env()


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure root logging for command line runs.

    Args:
        level (str, optional): Level name. Uses CANON_LOG_LEVEL if None.
    """
    level_name = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.WARNING),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s'
    )
    logger.debug(f"Logging configured at {level_name}")
