# app/config.py
import os
from dotenv import load_dotenv

# Load environment variables from .env file
# In development, you can use .env.development by setting ENV_FILE=.env.development
env_file = os.getenv("ENV_FILE", ".env")
load_dotenv(env_file)

class Settings:
    # Range projection switches from iterative to dense below this many matrix entries
    DENSE_THRESHOLD = int(float(os.getenv("TOMO_DENSE_THRESHOLD", "1e6")))

    # Solver defaults
    MAX_ITERS = int(os.getenv("TOMO_MAX_ITERS", "500"))
    PRIMAL_DUAL_MAX_ITERS = int(os.getenv("TOMO_PRIMAL_DUAL_MAX_ITERS", "20000"))
    TOL_KKT = float(os.getenv("TOMO_TOL_KKT", "1e-6"))
    SMOOTHING_EPSILON = float(os.getenv("TOMO_SMOOTHING_EPSILON", "0.1"))
    ZERO_THRESHOLD = float(os.getenv("TOMO_ZERO_THRESHOLD", "1e-9"))

    # Reproducibility and execution
    SEED = int(os.getenv("TOMO_SEED", "20180101"))
    WORKERS = int(os.getenv("TOMO_WORKERS", "1"))
    OUTPUT_DIR = os.getenv("TOMO_OUTPUT_DIR", "./out")

    # Logging
    LOG_LEVEL = os.getenv("TOMO_LOG_LEVEL", "INFO")

settings = Settings()
