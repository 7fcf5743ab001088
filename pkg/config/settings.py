"""
Configuration settings for the Moment Bound Calculator
"""

# Application Settings
APP_NAME = "Moment Bound Calculator"
VERSION = "1.0.0"
SCHEMA_VERSION = "v1"  # Stamped into every problem/certificate/result document

# Logging Settings
LOG_LEVEL = "WARNING"  # --verbose switches to DEBUG
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Worst-Case Solver Settings
MULTISTARTS = 64
GRADIENT_ITERS = 200
GRADIENT_TOL = 1e-8
BNB_TOL = 1e-5  # absolute, on the bound
BNB_MAX_BOXES = 200_000
PROJECTION_BISECTIONS = 48  # halvings when pulling a support point back onto its side of h
ROOT_REFINEMENTS = 6  # refinement rounds of the partition relaxation
RELAXATION_MAX_BOXES = 4096
DEFAULT_SEED = 20240607
DEFAULT_THREADS = 1
WITNESS_TOL = 1e-8
SEARCH_POOL_SIZE = 1024  # classified Sobol points for event-membership repair

# Linear Programming Settings
PIVOT_TOL = 1e-10
FEASIBILITY_TOL = 1e-9
MAX_PIVOTS = 10_000

# Expression / 1-D Search Settings
FD_RELATIVE_STEP = 1e-6
SEARCH_TOL = 1e-12
CONVEXITY_GRID = 257
CONVEXITY_TOL = 1e-8
MGF_PRESCAN_POINTS = 64

# Monte Carlo Oracle Settings
MC_CHUNK_SIZE = 1000  # replicates per Philox stream
MC_REPS = 100_000
CROSSING_HORIZON_FACTOR = 20  # truncation horizon = factor * m
GRID_RESOLUTION = 101
GRID_MAX_RESOLUTION = 101
GRID_MAX_DIMENSION = 2
GRID_MAX_MOMENTS = 2
DOMINANCE_STDERRS = 3.0

# Robust Stability Case Study
ETA_RADIUS = 0.16
ETA_MEAN_RADIUS = 0.05
REFERENCE_INSTABILITY_BOUND = 0.00031
REFERENCE_WINDOW = (1.0e-4, 5.0e-4)
