"""
Retrospective inference: stream a sequence frame by frame, evaluate the combined VAE
reconstruction loss through pose -> sub-modal features -> population codes -> binding ->
VAEs, and adapt the enabled parametric bias groups (binding, rotation, translation) by
gradient descent with momentum. One update per frame.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

import gestaltbind.gestaltbind.macros as macros
from gestaltbind.datagen.sequence import loop_frames
from gestaltbind.gestaltbind.diffcore import backward, forward
from gestaltbind.gestaltbind.errors import (
    ConfigError,
    InferenceHaltedError,
    NonFiniteError,
    ShapeMismatchError,
)
from gestaltbind.gestaltbind.models.gestalt_model import SUBMODALITIES
from gestaltbind.gestaltbind.models.vae import SIGNALS
from gestaltbind.gestaltbind.perception.binding import (
    BindingGraph,
    adapt_binding,
    fbe,
    init_binding,
)
from gestaltbind.gestaltbind.perception.perspective import Pose, SubmodalGraph, adapt_pose
from gestaltbind.gestaltbind.perception.popcode import encode_node

from .metrics import MetricLog, od, td

logger = logging.getLogger(__name__)

GROUPS = ("binding", "rotation", "translation")


@dataclass(frozen=True)
class InferenceHyper:
    """
    Learning rates and momenta per bias group, optional loss-weight overrides and the
    reconstruction signal ("training" or "mse") the groups descend on.
    """

    eta_f: float = 1.0
    gamma_f: float = 0.9
    eta_r: float = 1e-2
    gamma_r: float = 0.9
    eta_b: float = 8e-2
    gamma_b: float = 0.9
    betas: dict = field(default_factory=dict)
    signal: str = "training"

    def __post_init__(self):
        if self.signal not in SIGNALS:
            raise ConfigError("inference.signal", f"expected one of {SIGNALS}, got {self.signal!r}")


class InferenceRun:
    """
    Online adaptation of binding and pose against a trained GestaltModel.

    The computation graph is built once; each step reassigns the frame constants and the
    bias variables, so disabled groups are never written.

    Args:
        model (GestaltModel): read-only trained model
        binding (BindingState): initial binding (N observed features x M slots)
        pose (Pose): initial pose
        groups (dict): group name -> enabled
        hyper (InferenceHyper): rates, momenta and beta overrides
        target (np.ndarray): correct N x M assignment for FBE (identity by default)
        target_pose (tuple): (R, b) pose that undoes the applied disturbance
        lattices (dict): lattices the data are encoded with; must match the model's
        od_literal (bool): scale OD by 180 / (2 pi)
        fbe_literal (bool): diagonal-only FBE variant
    """

    def __init__(
        self,
        model,
        binding,
        pose=None,
        groups=None,
        hyper=None,
        target=None,
        target_pose=None,
        lattices=None,
        od_literal=False,
        fbe_literal=False,
    ):
        self.model = model
        self.dims = model.dims
        self.groups = {g: False for g in GROUPS}
        self.groups.update(groups or {})
        self.hyper = hyper or InferenceHyper()
        self.betas = {**model.betas, **self.hyper.betas}
        self.binding = binding
        self.pose = pose or Pose.identity(self.dims)
        self.num_features, num_slots = binding.shape
        if num_slots != model.num_slots:
            raise ShapeMismatchError(
                "binding", "model", f"{num_slots} slots vs {model.num_slots} model slots"
            )
        if lattices is not None:
            model.check_lattices(lattices)
        self.target = target
        self.target_pose = target_pose or (np.eye(self.dims), np.zeros(self.dims))
        self.od_literal = od_literal
        self.fbe_literal = fbe_literal
        self.step_count = 0
        self.log = MetricLog(self.dims)
        self._build_graph()

    def _build_graph(self):
        self.submodal = SubmodalGraph(self.num_features, self.dims, self.pose)
        self.binding_graph = BindingGraph(self.binding)
        stimuli = dict(
            posture=self.submodal.positions,
            direction=self.submodal.directions,
            magnitude=self.submodal.magnitudes,
        )
        self.gestalten, self.loss_nodes = {}, {}
        total = None
        for kind in SUBMODALITIES:
            if self.model.raw:
                activation = stimuli[kind]
            else:
                present = self.submodal.present if kind == "direction" else None
                activation = encode_node(self.model.lattices[kind], stimuli[kind], True, present)
            g = self.binding_graph.bind(activation, self.model.units(kind))
            vae = self.model.vaes[kind]
            loss = vae.retrospective_loss(vae.build(g), g, self.hyper.signal)
            self.gestalten[kind] = g
            self.loss_nodes[kind] = loss
            weighted = loss * self.betas[kind]
            total = weighted if total is None else total + weighted
        self.total = total

    def _check_frame(self, frame, velocity):
        expected = (self.num_features, self.dims)
        for name, value in (("frame", frame), ("velocity", velocity)):
            if np.shape(value) != expected:
                raise ShapeMismatchError(name, "inference graph", f"{np.shape(value)} vs {expected}")

    def _wrt(self):
        wrt = []
        if self.groups["binding"] and not self.binding.frozen:
            wrt.append(self.binding_graph.biases)
        if self.groups["rotation"]:
            wrt.append(self.submodal.angles)
        if self.groups["translation"]:
            wrt.append(self.submodal.translation)
        return wrt

    def _snapshot(self, frame):
        return dict(
            step=self.step_count,
            binding=self.binding.biases.copy(),
            pose=self.pose.to_dict(),
            frame=np.array(frame),
            losses={k: float(n.value) for k, n in self.loss_nodes.items() if n.value is not None},
        )

    def evaluate(self, frame, velocity):
        """Losses on one frame under the current state, without adapting anything."""
        self._check_frame(frame, velocity)
        self.submodal.set_frame(frame, velocity)
        total = float(forward(self.total))
        parts = {k: float(n.value) for k, n in self.loss_nodes.items()}
        return total, parts

    def gradients(self, frame, velocity, loss="total"):
        """d(loss)/d(bias groups) on one frame; `loss` is "total" or a sub-modality."""
        self.evaluate(frame, velocity)
        root = self.total if loss == "total" else self.loss_nodes[loss]
        if loss != "total":
            forward(root)
        leaves = [self.binding_graph.biases, self.submodal.angles, self.submodal.translation]
        grads = backward(root, wrt=leaves)
        return dict(zip(GROUPS, (grads[leaf] for leaf in leaves)))

    def metrics(self):
        R_target, b_target = self.target_pose
        d = td(self.pose.translation, b_target)
        return dict(
            fbe=fbe(self.binding, self.target, literal=self.fbe_literal),
            od=od(self.pose.rotation, R_target, literal=self.od_literal),
            td=d,
            td_cm=d * macros.CM_PER_UNIT,
        )

    def step(self, frame, velocity):
        """
        Evaluates the loss on one frame, logs the pre-update metrics and applies one
        momentum update to every enabled group.

        Raises:
            InferenceHaltedError: the loss or a gradient is not finite
        """
        total, parts = self.evaluate(frame, velocity)
        if not np.isfinite(total):
            raise InferenceHaltedError(self.step_count, self._snapshot(frame))

        row = dict(
            step=self.step_count,
            loss=total,
            loss_posture=parts["posture"],
            loss_direction=parts["direction"],
            loss_magnitude=parts["magnitude"],
            **self.metrics(),
        )
        angle_names = ["alpha_z"] if self.dims == 2 else ["alpha_x", "alpha_y", "alpha_z"]
        row.update(zip(angle_names, self.pose.angles.tolist()))
        row.update(zip(["b_x", "b_y", "b_z"], self.pose.translation.tolist()))
        self.log.append(**row)

        wrt = self._wrt()
        if wrt:
            try:
                grads = backward(self.total, wrt=wrt)
                self._apply(grads)
            except NonFiniteError:
                raise InferenceHaltedError(self.step_count, self._snapshot(frame))
        logger.debug("step %d: loss %.6g", self.step_count, total, extra=dict(step=self.step_count))
        self.step_count += 1
        return self

    def _apply(self, grads):
        h = self.hyper
        if self.submodal.angles in grads or self.submodal.translation in grads:
            pose = adapt_pose(
                self.pose,
                grads.get(self.submodal.angles),
                grads.get(self.submodal.translation),
                h.eta_r, h.gamma_r, h.eta_b, h.gamma_b,
                rotation=self.groups["rotation"],
                translation=self.groups["translation"],
            )
        else:
            pose = self.pose
        binding = self.binding
        if self.binding_graph.biases in grads:
            binding = adapt_binding(self.binding, grads[self.binding_graph.biases], h.eta_f, h.gamma_f)
        # nothing is written until every update succeeded
        self.pose, self.binding = pose, binding
        if self.groups["rotation"] or self.groups["translation"]:
            self.submodal.set_pose(self.pose)
        if self.binding_graph.biases in grads:
            self.binding_graph.set_state(self.binding)

    def run(self, seq, num_steps, progress=None):
        """Streams `num_steps` frames of a cyclic sequence, looping end to start."""
        if seq.num_features != self.num_features or seq.dims != self.dims:
            raise ShapeMismatchError(
                "sequence", "inference graph",
                f"{seq.num_features}x{seq.dims} vs {self.num_features}x{self.dims}",
            )
        for _, frame, velocity in loop_frames(seq, num_steps):
            self.step(frame, velocity)
            if progress is not None:
                progress.update(1)
        return self


def infer_binding(model, seq, hyper=None, num_steps=1000, init_bias=-5.0, target=None, **kwargs):
    """
    Binding inference with perspective taking disabled.

    Returns:
        tuple: (MetricLog, final BindingState)
    """
    binding = init_binding("inference", seq.num_features, model.num_slots, init_bias)
    run = InferenceRun(
        model, binding, groups=dict(binding=True), hyper=hyper, target=target, **kwargs
    )
    run.run(seq, num_steps)
    return run.log, run.binding


def infer_perspective(
    model, seq, hyper=None, num_steps=3000, target_pose=None, rotation=True, translation=True, **kwargs
):
    """
    Perspective taking with the binding frozen to the training diagonal and the pose
    starting at identity.

    Returns:
        tuple: (MetricLog, final Pose)
    """
    binding = init_binding("training", seq.num_features, model.num_slots)
    run = InferenceRun(
        model,
        binding,
        groups=dict(rotation=rotation, translation=translation),
        hyper=hyper,
        target_pose=target_pose,
        **kwargs,
    )
    run.run(seq, num_steps)
    return run.log, run.pose


def infer_joint(
    model, seq, hyper=None, num_steps=3000, binding=None, target=None, target_pose=None, **kwargs
):
    """
    Simultaneous binding and perspective inference driven by the same loss. A frozen
    `binding` reduces this to perspective taking.

    Returns:
        tuple: (MetricLog, final BindingState, final Pose)
    """
    binding = binding or init_binding("inference", seq.num_features, model.num_slots)
    run = InferenceRun(
        model,
        binding,
        groups=dict(binding=True, rotation=True, translation=True),
        hyper=hyper,
        target=target,
        target_pose=target_pose,
        **kwargs,
    )
    run.run(seq, num_steps)
    return run.log, run.binding, run.pose
