from pydantic_settings import BaseSettings
from typing import Optional
from functools import lru_cache
import os


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "LLPack Low-Light Enhancement Engine"
    LOG_LEVEL: str = "INFO"

    # Parallelism
    LLPACK_THREADS: Optional[int] = None
    ROW_BLOCK: int = 16  # rows per work unit, independent of worker count

    # Sensor normalization (14-bit convention)
    DEFAULT_BLACK_LEVEL: int = 512
    DEFAULT_WHITE_LEVEL: int = 16383

    # Bench / enhance
    ALLOCATION_BUDGET_BYTES: int = 16 * 1024 ** 3

    # Training
    CHECKPOINT_PREFIX: str = "ckpt"

    class Config:
        env_file = ".env"
        case_sensitive = True

    @property
    def worker_count(self) -> int:
        """Worker cap from LLPACK_THREADS, else the available cores."""
        if self.LLPACK_THREADS is not None and self.LLPACK_THREADS > 0:
            return self.LLPACK_THREADS
        return os.cpu_count() or 1


@lru_cache()
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
