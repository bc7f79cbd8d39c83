import warnings

warnings.filterwarnings("ignore", category=UserWarning)


LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
RESULTS_PATH = "RESULTS"

GENERAL_INFO = '⚽ [GENERAL INFO]'
IO_INFO = '💾 [IO INFO]'

SOLVER_INFO_NEWTON = '🌀 [Newton info]'
SOLVER_INFO_LINEAR = '🌀 [Linear solve info]'
SOLVER_INFO_HOMOTOPY = '🌀 [Homotopy info]'
SOLVER_INFO_ERROR = '🌀 [Error info]'

PIPELINE_INFO_SWEEP = '🌎 [SWEEP INFO]'
PIPELINE_INFO_AUDIT = '🌎 [AUDIT INFO]'
PIPELINE_INFO_CERTIFICATE = '🌎 [CERTIFICATE INFO]'

AUDIT_INFO = '🧮 [Lattice info]'
MORSE_INFO = '🧮 [Morse info]'


# Form convention tag written into every sidecar
CONVENTION_TAG = "sqrt(-1)/pi ddbar; density = n! (2/pi)^n D(coeff)"

# Binary field format: 12-byte magic + little-endian u32 version = 16 bytes
FIELD_MAGIC_SCALAR = b"TORUSSCALAR\x00"
FIELD_MAGIC_FORM11 = b"TORUSFORM11\x00"
FIELD_FORMAT_VERSION = 1

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_INPUT = 2

# Lower bound of the grid-scale resolution of a bump: radius >= MIN_BUMP_CELLS * h
MIN_BUMP_CELLS = 4
MAX_BUMP_RADIUS = 0.25
# Lelong slope fits: minimum number of radii and largest default radius
MIN_LELONG_RADII = 4
LELONG_OUTER_RADIUS = 0.45
POSITIVITY_MARGIN = 1e-8
MORSE_EIGEN_THRESHOLD = -1e-10

DEBUG_VERBOSE = False
