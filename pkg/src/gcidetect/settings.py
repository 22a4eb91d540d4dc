"""
Environment-driven defaults for gcidetect runs.

Values come from the process environment (and a local .env file when
present); CLI flags override them.
"""
import logging
import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()

SUPPORTED_RATE = 16000

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseModel):
    seed: int = 0
    jobs: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    output_dir: Path = Path("data/output")


def get_settings() -> Settings:
    return Settings(
        seed=int(os.getenv("GCIDETECT_SEED", "0")),
        jobs=int(os.getenv("GCIDETECT_JOBS", "1")),
        log_level=os.getenv("GCIDETECT_LOG_LEVEL", "INFO").upper(),
        output_dir=Path(os.getenv("GCIDETECT_OUTPUT_DIR", "data/output")),
    )


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)
