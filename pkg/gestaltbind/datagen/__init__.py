from .sequence import (
    FeatureSequence,
    crossfade_cycle,
    loop_frames,
    permute_features,
    velocities,
)
from .csv_io import CsvLayout, load_csv, save_csv
from .pendulum import PendulumParams, pendulum_energy, pendulum_states, simulate_pendulum
from .walker import WalkerParams, generate_walker
from .disturbance import DisturbanceSpec, apply_disturbance, random_disturbance
