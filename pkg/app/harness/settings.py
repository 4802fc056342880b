import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"


@dataclass(frozen=True)
class Settings:
    """Process-wide settings read from the environment (and a .env file)."""
    output_dir: str
    log_level: str
    workers: int


def get_settings() -> Settings:
    return Settings(
        output_dir=os.getenv("LIPSCHITZ_OUTPUT_DIR", "results"),
        log_level=os.getenv("LIPSCHITZ_LOG_LEVEL", "WARNING").upper(),
        workers=int(os.getenv("LIPSCHITZ_WORKERS", "1")),
    )
