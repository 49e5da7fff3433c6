import os

from dotenv import load_dotenv

load_dotenv(".env.local", override=False)

# --- Reproducibility ---
_seed_raw = os.environ.get('RNG_SEED', '').strip()
RNG_SEED = int(_seed_raw) if _seed_raw else None

# --- Execution ---
SIM_WORKERS = int(os.environ.get('SIM_WORKERS', '1'))
if SIM_WORKERS < 1:
    raise RuntimeError(
        "SIM_WORKERS must be a positive integer. "
        "Set it to the number of worker processes used by sweeps."
    )

SIM_OUTPUT_DIR = os.environ.get('SIM_OUTPUT_DIR', 'results')

# --- Logging ---
LOG_LEVEL  = os.environ.get('LOG_LEVEL', 'WARNING').upper()
LOG_FORMAT = os.environ.get('LOG_FORMAT', 'text').lower()

# --- Physics constants shared by channel and receiver ---
REFERENCE_WAVELENGTH_NM = float(os.environ.get('REFERENCE_WAVELENGTH_NM', '1550'))
FEC_BLOCK_SYMBOLS       = 10800
GUARD_SYMBOLS           = 1024
