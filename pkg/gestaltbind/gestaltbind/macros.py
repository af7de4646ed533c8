import os


GESTALTBIND_OUTPUT_ROOT = os.path.expanduser(
    os.environ.get("GESTALTBIND_OUTPUT_ROOT", os.path.join(os.getcwd(), "gestaltbind_runs"))
)

GESTALTBIND_NUM_WORKERS = int(os.environ.get("GESTALTBIND_NUM_WORKERS", "1"))

# below this speed a feature's motion direction is treated as absent
DIRECTION_EPS = 1e-8

# tolerance used when checking that rotation matrices are orthonormal
ORTHONORMAL_TOL = 1e-6

# scene units are meters; translation differences are also reported in cm
CM_PER_UNIT = 100.0
