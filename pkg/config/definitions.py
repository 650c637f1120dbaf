"""Default constants shared by the library, the CLI and the tests."""

# Logger definitions
LOG_DECIMALS = 6
LOG_LEVEL = "INFO"

# Differentiation definitions
EPSILON = 1e-5

# Base model definitions
GAUSS2_AMPLITUDE = 2.0
LOGISTIC5_AMPLITUDE = 5.0
TABULATED_MIN_TAIL_RATE = 1.0

# Quadrature definitions
SUPPORT_DELTA = 1e-10
QUAD_LIMIT = 400
QUAD_EPSREL = 1e-12
MASS_COVERAGE = 0.9999
DIVERGENCE_RTOL = 0.01
POSITIVITY_NODES = 4001

# Inverse mean function definitions
INVERSE_STEP_RTOL = 1e-12
INVERSE_MAX_ITER = 200

# Parameter box definitions
DEFAULT_ALPHA_BOUNDS = (-10.0, 10.0)
DEFAULT_BETA_BOUNDS = (0.2, 8.0)

# Maximum likelihood definitions
MLE_GRID_SIZE = 16
MLE_NUM_STARTS = 3
MLE_MAX_ITER = 10_000
MLE_XATOL = 1e-10
MLE_FATOL = 1e-13
BOUNDARY_TOL = 1e-6
SINGULAR_FISHER_RTOL = 1e-10

# Limit simulation definitions
DEFAULT_GRID_POINTS = 8192
DEFAULT_REPLICATES = 100_000
MIN_CALIBRATION_REPLICATES = 1000
BOOTSTRAP_RESAMPLES = 200
DRAW_CHUNK = 256
DEFAULT_EPSILONS = (0.01, 0.05, 0.10)
QUANTILE_METHOD = "type7"
STDERR_METHOD = "bootstrap200"

# Random stream keys
LIMIT_STREAM = 1
BOOTSTRAP_STREAM = 2
SIMPLE_LIMIT_STREAM = 3
APF_DATASET_STREAM = 4

# Table identifier of the simple hypothesis, whose limit does not depend on the model
SIMPLE_TABLE_ID = "wiener_l2"

# Study definitions
MIN_STUDY_REPLICATES = 100
MIN_APF_REPLICATES = 1000
CONFIDENCE_LEVEL = 0.95
DATASET_CHUNK = 64

# Alternative definitions
BIMODAL_GRID = (-9.0, 15.0, 2401)

# Environment definitions
REGISTRY_ENV_VAR = "APF_POISSON_REGISTRY"
