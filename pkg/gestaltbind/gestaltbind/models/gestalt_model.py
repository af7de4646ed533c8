import logging

import numpy as np

from gestaltbind.gestaltbind.diffcore import Constant, forward, load_arrays, save_arrays
from gestaltbind.gestaltbind.errors import ModelMismatchError
from gestaltbind.gestaltbind.perception.popcode import Lattice

from .vae import Vae, VaeConfig

logger = logging.getLogger(__name__)

SUBMODALITIES = ("posture", "direction", "magnitude")
ENCODINGS = ("popcode", "raw")


class GestaltModel:
    """
    Three VAEs (posture, direction, magnitude) trained on correctly bound, canonical
    perspective Gestalt vectors, together with the lattices they were trained on and the
    loss weights used when combining their losses at inference time.

    Args:
        vaes (dict): sub-modality -> Vae
        lattices (dict): sub-modality -> Lattice (empty for raw encoding)
        betas (dict): sub-modality -> loss weight
        encoding (str): "popcode" or "raw"
        num_slots (int): body slots M
        dims (int): spatial dimension of the data
        metadata (dict): training provenance (data hash, seeds, epochs)
    """

    def __init__(self, vaes, lattices, betas, encoding, num_slots, dims, metadata=None):
        assert encoding in ENCODINGS, f"unknown encoding {encoding}"
        self.vaes = vaes
        self.lattices = lattices
        self.betas = {k: float(betas.get(k, 1.0)) for k in SUBMODALITIES}
        self.encoding = encoding
        self.num_slots = num_slots
        self.dims = dims
        self.metadata = metadata or {}

    @property
    def raw(self):
        return self.encoding == "raw"

    def units(self, kind):
        """Units per slot in the Gestalt vector of a sub-modality."""
        if self.raw:
            return 1 if kind == "magnitude" else self.dims
        return self.lattices[kind].count

    def lattice_hashes(self):
        return {k: lattice.hash() for k, lattice in self.lattices.items()}

    def check_lattices(self, lattices):
        """Raises ModelMismatchError when `lattices` differ from the training lattices."""
        if self.raw:
            return
        theirs = {k: lattice.hash() for k, lattice in lattices.items()}
        mine = self.lattice_hashes()
        for kind in SUBMODALITIES:
            if theirs.get(kind) != mine.get(kind):
                raise ModelMismatchError(
                    f"{kind} lattice differs from the one the model was trained with "
                    f"({theirs.get(kind)} vs {mine.get(kind)})"
                )

    def with_betas(self, betas):
        return GestaltModel(
            self.vaes, self.lattices, {**self.betas, **betas}, self.encoding,
            self.num_slots, self.dims, self.metadata,
        )

    def save(self, prefix):
        arrays = {}
        for vae in self.vaes.values():
            arrays.update(vae.to_arrays())
        extra = dict(
            encoding=self.encoding,
            num_slots=self.num_slots,
            dims=self.dims,
            betas=self.betas,
            configs={k: vae.config.to_dict() for k, vae in self.vaes.items()},
            lattices={k: lattice.to_json() for k, lattice in self.lattices.items()},
            lattice_hashes=self.lattice_hashes(),
            metadata=self.metadata,
        )
        return save_arrays(prefix, arrays, extra)

    @classmethod
    def load(cls, prefix):
        arrays, extra = load_arrays(prefix)
        lattices = {k: Lattice.from_json(d) for k, d in extra["lattices"].items()}
        for kind, lattice in lattices.items():
            if lattice.hash() != extra["lattice_hashes"][kind]:
                raise ModelMismatchError(f"{prefix}: stored {kind} lattice fails its hash check")
        vaes = {}
        for kind, config in extra["configs"].items():
            vaes[kind] = Vae(VaeConfig(**config), name=kind).load_arrays(arrays)
        logger.debug("loaded gestalt model from %s", prefix)
        return cls(
            vaes, lattices, extra["betas"], extra["encoding"], extra["num_slots"], extra["dims"],
            extra["metadata"],
        )


def submodal_losses(model, gestalten, betas=None, signal="training"):
    """
    Reconstruction losses of the three VAEs in posterior-mean mode.

    Args:
        gestalten (dict): sub-modality -> Gestalt vector
        signal (str): "training" or "mse", see Vae.retrospective_loss

    Returns:
        tuple: (L_posture, L_direction, L_magnitude, L) with L the beta-weighted sum
    """
    betas = {**model.betas, **(betas or {})}
    parts = []
    for kind in SUBMODALITIES:
        vae = model.vaes[kind]
        x = Constant(np.asarray(gestalten[kind], dtype=np.float64), name=f"{kind}.gestalt")
        loss = vae.retrospective_loss(vae.build(x), x, signal)
        parts.append(float(forward(loss)))
    return parts[0], parts[1], parts[2], combine_losses(betas, *parts)


def combine_losses(betas, l_posture, l_direction, l_magnitude):
    return betas["posture"] * l_posture + betas["direction"] * l_direction + betas["magnitude"] * l_magnitude


def losses(model, g_posture, g_direction, g_magnitude, betas=None, signal="training"):
    return submodal_losses(
        model, dict(posture=g_posture, direction=g_direction, magnitude=g_magnitude), betas, signal
    )
