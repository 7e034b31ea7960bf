import os
from dotenv import load_dotenv

load_dotenv()


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


class Settings:
    # Monte Carlo defaults
    SAMPLES = _int_env("OOFSK_SAMPLES", 1_000_000)
    SEED = _int_env("OOFSK_SEED", 20040926)
    BATCH_SIZE = _int_env("OOFSK_BATCH_SIZE", 50_000)

    # Quadrature
    QUAD_ORDER = _int_env("OOFSK_QUAD_ORDER", 64)
    MAX_QUAD_TONES = 3

    # Worker cap for MC batches and sweeps
    THREADS = _int_env("OOFSK_THREADS", os.cpu_count() or 1)

    LOG_LEVEL = os.getenv("OOFSK_LOG_LEVEL", "INFO")
    OUTPUT_DIR = os.getenv("OOFSK_OUTPUT_DIR", "results")

    # Minimum bit-energy search
    SNR_SEARCH_MIN = 1e-5
    SNR_SEARCH_MAX = 1e2
    SNR_SEARCH_POINTS = 40

    Z_THRESHOLD = 4.0


settings = Settings()
