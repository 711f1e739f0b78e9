# Patch geometry
PATCH_SIZE = 32
PATCH_CENTER = 16  # lower-right pixel of the central 2x2 block
CENTER_BLOCK = slice(15, 17)

# TUM RGB-D conventions
TUM_DEPTH_SCALE = 5000.0  # raw units per meter
TUM_MAX_TIME_DIFF = 0.02  # seconds
RGB_INDEX = "rgb.txt"
DEPTH_INDEX = "depth.txt"
RGB_DIR = "rgb"
DEPTH_DIR = "depth"
LABEL_DIR = "labels"
APPEARANCE_DIR = "appearance"

# Label image palette
LABEL_GRAY_INVALID = 0
LABEL_GRAY_NO_EDGE = 128
LABEL_GRAY_OCCLUSION = 255

# Network hyper-parameters
DEFAULT_FILTERS = (32, 32, 64)
KERNEL_SIZE = 5
CONV_PADDING = 2
NUM_CLASSES = 2
DEFAULT_LR = 0.001
DEFAULT_MOMENTUM = 0.9
DEFAULT_L2 = 0.001
DEFAULT_BATCH_SIZE = 100

# Dataset defaults
DEFAULT_TAU_DEPTH = 0.10
DEFAULT_MAX_INVALID_FRACTION = 0.10
DEFAULT_EXTRACT_STRIDE = 16
DEFAULT_MAJORITY = 2

# Fusion defaults
DEFAULT_FWHM = 8.0
DEFAULT_SWEEP_STRIDE = 8

# Artifact names
MODEL_FILE = "model.ocnn"
STATS_FILE = "stats.json"
EPOCHS_CSV = "epochs.csv"
RUN_CONFIG_FILE = "run_config.json"
TIMING_FILE = "timing.jsonl"
