from .gestalt_model import (
    ENCODINGS,
    SUBMODALITIES,
    GestaltModel,
    combine_losses,
    losses,
    submodal_losses,
)
from .training import build_gestalt_dataset, curves_frame, train_gestalt_model, train_vae
from .vae import SIGNALS, Vae, VaeConfig, VaeOutput, vae_forward
