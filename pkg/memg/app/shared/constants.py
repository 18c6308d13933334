"""Constants published with the reference experiments."""

PARAM_NAMES: tuple[str, ...] = ("alpha", "mu", "sigma", "eta", "freq", "phase")
PARAMS_PER_COMPONENT = len(PARAM_NAMES)

# Synthetic denoising benchmark
SAMPLING_RATE_KHZ = 300.0
NOISE_SIGMA = 10.0
PSNR_PEAK = 2.0**8 - 1.0
QUANT_MIN = -128
QUANT_MAX = 127
SYNTH_TAU = 0.1
SYNTH_GRAD_SEPARATION = 20

# Real transducer acquisition
OPERATING_FREQUENCY_KHZ = 175.0
REAL_TAU = 100.0
REAL_GRAD_SEPARATION = 1
FRAME_SAMPLES = 126
GAIN_A = 140.18
GAIN_B = 1.16

# Optimizer and classifier
MAX_LM_ITERATIONS = 200
TRAIN_FRACTION = 0.7
FOREST_TREES = 10
FOREST_MAX_DEPTH = 6
FOREST_MIN_SAMPLES_LEAF = 1
FOREST_MIN_SAMPLES_SPLIT = 2

CONFIDENCE_EPSILON = 1e-12
