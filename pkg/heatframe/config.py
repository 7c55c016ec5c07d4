import os
import logging
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel

load_dotenv()


class Settings(BaseModel):
    log_level: str = "INFO"
    log_dir: str = "logs"
    report_dir: str = "reports"
    default_seed: int = 0
    noise_floor: float = 1e-12
    cutoff_epsilon: float = 1.0
    default_base: float = 2.0
    gamma_epsilon: float = 0.1

    @property
    def logging_level(self) -> int:
        return getattr(logging, self.log_level.upper(), logging.INFO)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Settings from the environment (and .env when present)."""
    return Settings(
        log_level=os.getenv("LOG_LEVEL", "INFO"),
        log_dir=os.getenv("LOG_DIR", "logs"),
        report_dir=os.getenv("REPORT_DIR", "reports"),
        default_seed=int(os.getenv("DEFAULT_SEED", "0")),
        noise_floor=float(os.getenv("NOISE_FLOOR", "1e-12")),
        cutoff_epsilon=float(os.getenv("CUTOFF_EPSILON", "1.0")),
        default_base=float(os.getenv("DEFAULT_BASE", "2.0")),
        gamma_epsilon=float(os.getenv("GAMMA_EPSILON", "0.1")),
    )
