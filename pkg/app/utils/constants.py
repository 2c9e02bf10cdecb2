# app/utils/constants.py

# Lattice direction vectors as (row step, column step); keys fix the canonical order.
LATTICE_DIRECTIONS = {
    "h": (0, 1),
    "v": (1, 0),
    "d": (1, 1),
    "a": (1, -1),
}
CANONICAL_DIRECTION_ORDER = ("h", "v", "d", "a")

# Enumeration guard: 2**(n*n) images
MAX_ENUMERATION_N = 4

# Ternary map codes used by PGM output
TERNARY_CODE_U0 = 0
TERNARY_CODE_UNDETERMINED = 1
TERNARY_CODE_U1 = 2

# PGM images above this many pixels are written as binary P5
PGM_ASCII_MAX_PIXELS = 64 * 64

# Power iterations used to estimate the operator norm
POWER_ITERATIONS = 50

# Rank probe tolerance for the dual dispatcher
RANK_PROBE_TOLERANCE = 1e-8

# Discrepancy principle safety factor
DISCREPANCY_FACTOR = 1.05

# Attenuation scale bound for the transmission noise model: max(y * c) <= this
MAX_ATTENUATION = 10.0

# Peak attenuation c * max(y) the sinogram is scaled to; 1e6 photons then gives an SNR near 50 dB
ATTENUATION_PEAK = 6.0

# Default grey levels for the benchmark phantoms
PHANTOM_LEVELS = (0.0, 1.0)

PHANTOM_NAMES = ("P1", "P2", "P3", "P4", "disk", "rings", "letters")

RECONSTRUCTION_METHODS = ("dp", "dp-smooth", "lsqr", "tv")

BENCH_SUITES = ("sparse", "limited-angle", "noise")

# Benchmark sweeps
SPARSE_ANGLE_COUNTS = (45, 20, 10, 5)
LIMITED_ANGLE_MAXIMA = ("5pi/6", "2pi/3", "7pi/12", "pi/2")
NOISE_PHOTON_COUNTS = (1e6, 1e4, 1e3, 1e2)

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NONCONVERGED = 4

# Regularisation weights searched by the discrepancy principle for the TV baseline
TV_LAMBDA_GRID = (1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0, 10.0)

# Otsu histogram bins
OTSU_BINS = 256

# Relative distance of the certificate z from a box bound that still counts as "at the bound"
SIDE_TOLERANCE = 1e-6
