import os

# Base directory of the project
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Output settings
# Can be overridden via environment variables or CLI arguments
# Default: 'output' folder in project root
OUTPUT_DIR = os.getenv('GHOSTSIM_OUT', os.path.join(BASE_DIR, 'output'))

# Run settings
# GHOSTSIM_SEED, GHOSTSIM_THREADS and GHOSTSIM_QUIET are parsed in main.py
SEED = 20240611
THREADS = 1

# Scenario defaults (SI units: metres, radians)
WAVELENGTH = 0.5e-6
Z1 = 0.2
Z2 = 0.2
EXTENT = 2.0e-3
SAMPLES_1D = 1024
SAMPLES_2D = 512
SCHEMA_VERSION = 1

# Tolerance for the imaging condition 1/z1 + 1/z2 = 1/f
IMAGING_CONDITION_RTOL = 1e-9

# Aberration settings
NOLL_MAX = 66  # radial order n <= 10

# Engine guards
ORACLE_MAX_SAMPLES = 512
CLASSICAL_MAX_POINTS = 2048  # total samples N**dims; the classical engine holds an N**dims square amplitude

# Block sizes for data-parallel loops. Fixed so results do not depend on the thread count.
ORACLE_ROW_BLOCK = 32
STEERING_BLOCK = 64

# Baseline kernel oversampling (fine FFT grid used for linear interpolation)
BASELINE_OVERSAMPLE = 4

# Wrap-around guard: the ghost kernel's 99% energy width must stay below this fraction of the extent
KERNEL_ENERGY_FRACTION = 0.99
KERNEL_WIDTH_LIMIT = 0.25

# Noise defaults
NOISE_LADDER = (1000, 10000, 100000, 1000000)
NOISE_REPLICATES = 20
NOISE_JACKKNIFE_BLOCKS = 100

# Engines known to the runner
ENGINES = ('ghost-fast', 'ghost-oracle', 'classical', 'baseline')

# Logging settings
LOG_DIR = os.path.join(BASE_DIR, 'logs')
LOG_FILE = os.path.join(LOG_DIR, 'ghostsim.log')
LOG_LEVEL = os.getenv('GHOSTSIM_LOG_LEVEL', 'INFO')  # DEBUG, INFO, WARNING, ERROR, CRITICAL
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def validate_config():
    """
    Validates configuration settings.
    Raises ValueError if any setting is invalid.
    """
    errors = []

    if WAVELENGTH <= 0 or Z1 <= 0 or Z2 <= 0:
        errors.append(f"WAVELENGTH, Z1 and Z2 must be positive, got {WAVELENGTH}, {Z1}, {Z2}")

    if EXTENT <= 0:
        errors.append(f"EXTENT must be positive, got {EXTENT}")

    for name, value in (('SAMPLES_1D', SAMPLES_1D), ('SAMPLES_2D', SAMPLES_2D)):
        if value <= 0 or value % 2:
            errors.append(f"{name} must be a positive even integer, got {value}")

    if THREADS < 1:
        errors.append(f"THREADS must be at least 1, got {THREADS}")

    if NOLL_MAX < 36:
        errors.append(f"NOLL_MAX must cover at least j = 1..36, got {NOLL_MAX}")

    if ORACLE_MAX_SAMPLES <= 0 or CLASSICAL_MAX_POINTS <= 0:
        errors.append("Engine guards must be positive")

    if ORACLE_ROW_BLOCK <= 0 or STEERING_BLOCK <= 0:
        errors.append("Block sizes must be positive")

    if BASELINE_OVERSAMPLE < 1:
        errors.append(f"BASELINE_OVERSAMPLE must be at least 1, got {BASELINE_OVERSAMPLE}")

    if not 0.0 < KERNEL_ENERGY_FRACTION < 1.0:
        errors.append(f"KERNEL_ENERGY_FRACTION must be between 0.0 and 1.0, got {KERNEL_ENERGY_FRACTION}")

    if NOISE_REPLICATES < 1 or NOISE_JACKKNIFE_BLOCKS < 2:
        errors.append("NOISE_REPLICATES must be >= 1 and NOISE_JACKKNIFE_BLOCKS >= 2")

    if any(n < 2 for n in NOISE_LADDER):
        errors.append(f"NOISE_LADDER entries must be >= 2, got {NOISE_LADDER}")

    if LOG_LEVEL.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        errors.append(f"LOG_LEVEL must be a standard logging level, got '{LOG_LEVEL}'")

    if errors:
        raise ValueError("Configuration validation failed:\n" + "\n".join(f"  - {err}" for err in errors))

    return True
