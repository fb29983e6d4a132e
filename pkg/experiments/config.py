"""
Configuration for the experiment runner
"""

import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Runner defaults; experiment documents and CLI flags override them"""

    # Logging
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Output
    OUTPUT_DIR = os.getenv("PITSIM_OUTPUT_DIR", "results")

    # Workers and seeding
    THREADS = int(os.getenv("PITSIM_THREADS", "1"))
    SEED = int(os.getenv("PITSIM_SEED", "0"))

    @classmethod
    def log_level(cls) -> str:
        return cls.LOG_LEVEL.upper()

