"""
Training of the three sub-modal VAEs on canonical-perspective, correctly bound data.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd
from tqdm import tqdm

from gestaltbind.datagen.sequence import velocities
from gestaltbind.gestaltbind.diffcore import Adam, Constant, backward, forward
from gestaltbind.gestaltbind.errors import NonFiniteError, TrainingDivergedError
from gestaltbind.gestaltbind.perception.binding import bind, init_binding
from gestaltbind.gestaltbind.perception.perspective import Pose, extract_submodal
from gestaltbind.gestaltbind.perception.popcode import encode_frame
from gestaltbind.gestaltbind.utils import hash_arrays

from .gestalt_model import SUBMODALITIES, GestaltModel
from .vae import Vae

logger = logging.getLogger(__name__)


def build_gestalt_dataset(seq, lattices=None, encoding="popcode"):
    """
    Gestalt vectors of every frame with a velocity (frames 1..T-1), seen from the identity
    pose through the frozen training binding.

    Returns:
        dict: sub-modality -> (T-1, M*K) array
    """
    raw = encoding == "raw"
    pose = Pose.identity(seq.dims)
    binding = init_binding("training", seq.num_features)
    rows = {kind: [] for kind in SUBMODALITIES}
    for frame, velocity in zip(seq.frames[1:], velocities(seq)):
        encoded = encode_frame(lattices, extract_submodal(frame, velocity, pose), raw=raw)
        for kind, g in bind(binding, encoded).items():
            rows[kind].append(g)
    return {kind: np.stack(rows[kind]) for kind in SUBMODALITIES}


def kl_schedule(config, epoch):
    """KL weight for an epoch: linear warm-up over the first `kl_warmup` share of epochs."""
    warmup = math.ceil(config.kl_warmup * config.epochs)
    if warmup <= 0:
        return config.kl_weight
    return config.kl_weight * min(1.0, (epoch + 1) / warmup)


class _BatchGraph:
    def __init__(self, vae, batch_size):
        c = vae.config
        self.x = Constant(np.zeros((batch_size, c.input_size)), name=f"{vae.name}.batch")
        self.noise = Constant(np.zeros((batch_size, c.latent_size)), name=f"{vae.name}.noise")
        self.kl_weight = Constant(0.0, name=f"{vae.name}.kl_weight")
        out = vae.build(self.x, self.noise)
        self.recon = vae.reconstruction_loss(out, self.x) * (1.0 / batch_size)
        self.kl = vae.kl_divergence(out) * (1.0 / batch_size)
        self.loss = self.recon + self.kl * self.kl_weight


def train_vae(config, data, name, progress=False):
    """
    Adam minibatch training of one VAE.

    Args:
        config (VaeConfig): model and optimization settings; `seed` drives initialization,
            shuffling and the reparameterization noise
        data (np.ndarray): (num_samples, input_size) Gestalt vectors
        name (str): sub-modality, used in parameter names and errors

    Returns:
        tuple: (Vae, list of per-epoch dicts with mean reconstruction loss and KL per sample)
    """
    data = np.asarray(data, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    vae = Vae(config, rng=rng, name=name)
    params = vae.parameters()
    optimizer = Adam(params, lr=config.lr)
    graphs = {}
    curve = []

    for epoch in tqdm(range(config.epochs), desc=f"train {name}", disable=not progress):
        kl_weight = kl_schedule(config, epoch)
        order = rng.permutation(data.shape[0])
        recon_total, kl_total = 0.0, 0.0
        for batch_idx, start in enumerate(range(0, data.shape[0], config.batch_size)):
            batch = data[order[start : start + config.batch_size]]
            graph = graphs.get(batch.shape[0])
            if graph is None:
                graph = graphs[batch.shape[0]] = _BatchGraph(vae, batch.shape[0])
            graph.x.assign(batch)
            graph.noise.assign(rng.standard_normal(graph.noise.shape))
            graph.kl_weight.assign(kl_weight)

            loss = float(forward(graph.loss))
            if not np.isfinite(loss):
                raise TrainingDivergedError(name, epoch, batch_idx, loss)
            try:
                grads = backward(graph.loss, wrt=params)
                optimizer.step(grads)
            except NonFiniteError:
                raise TrainingDivergedError(name, epoch, batch_idx, loss)
            recon_total += float(graph.recon.value) * batch.shape[0]
            kl_total += float(graph.kl.value) * batch.shape[0]

        row = dict(
            epoch=epoch,
            loss=recon_total / data.shape[0],
            kl=kl_total / data.shape[0],
            kl_weight=kl_weight,
        )
        curve.append(row)
        logger.debug("%s epoch %d: loss %.6g kl %.6g", name, epoch, row["loss"], row["kl"],
                     extra=dict(submodality=name, epoch=epoch))
    return vae, curve


def _train_worker(args):
    kind, config, data = args
    vae, curve = train_vae(config, data, kind)
    return kind, vae.to_arrays(), curve


def curves_frame(curves):
    """Joins per-sub-modality curves into one frame: epoch, loss_<kind>, kl_<kind>."""
    frame = None
    for kind in SUBMODALITIES:
        part = pd.DataFrame(curves.get(kind, []), columns=["epoch", "loss", "kl", "kl_weight"])
        part = part.rename(columns=dict(loss=f"loss_{kind}", kl=f"kl_{kind}", kl_weight=f"kl_weight_{kind}"))
        frame = part if frame is None else frame.merge(part, on="epoch", how="outer")
    return frame


def train_gestalt_model(
    dataset,
    configs,
    lattices,
    encoding,
    betas,
    num_slots,
    dims,
    metadata=None,
    num_workers=1,
    progress=False,
):
    """
    Trains the three VAEs. Each is trained on its own reconstruction + KL loss; the betas
    only weight the combined loss at inference time.

    Args:
        dataset (dict): sub-modality -> (num_samples, input_size) from build_gestalt_dataset
        configs (dict): sub-modality -> VaeConfig
        num_workers (int): > 1 trains the sub-modalities in separate processes

    Returns:
        tuple: (GestaltModel, curves DataFrame)
    """
    jobs = [(kind, configs[kind], dataset[kind]) for kind in SUBMODALITIES]
    if num_workers > 1:
        with ProcessPoolExecutor(max_workers=min(num_workers, len(jobs))) as executor:
            results = list(executor.map(_train_worker, jobs))
        vaes, curves = {}, {}
        for kind, arrays, curve in results:
            vaes[kind] = Vae(configs[kind], name=kind).load_arrays(arrays)
            curves[kind] = curve
    else:
        vaes, curves = {}, {}
        for kind, config, data in jobs:
            vaes[kind], curves[kind] = train_vae(config, data, kind, progress=progress)

    meta = dict(
        data_hash=hash_arrays(*[dataset[kind] for kind in SUBMODALITIES]),
        seeds={kind: configs[kind].seed for kind in SUBMODALITIES},
        epochs={kind: configs[kind].epochs for kind in SUBMODALITIES},
    )
    meta.update(metadata or {})
    model = GestaltModel(vaes, lattices or {}, betas, encoding, num_slots, dims, meta)
    return model, curves_frame(curves)
