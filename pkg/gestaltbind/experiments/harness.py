"""
Runs experiments described by an ExperimentConfig and lays out their artifacts:

    <output_dir>/
        manifest.json            resolved config, package version, model run
        results.json             per-seed status and final values
        summary.csv              per-step mean / std over seeds (inference kinds)
        data/train.csv           training sequence (+ sidecar)
        seed_XXX/
            model.json, model.bin, training_curve.csv      (train)
            metrics.csv, pose_trajectory.csv, binding_final.csv, pose_final.json,
            test_sequence.csv                               (bind / perspective / joint)

Ablations run every arm into <output_dir>/<arm>/ and add ablation_summary.csv.
"""

import copy
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from easydict import EasyDict
from tqdm import tqdm

import gestaltbind.gestaltbind as gb
from gestaltbind.datagen import (
    DisturbanceSpec,
    PendulumParams,
    WalkerParams,
    apply_disturbance,
    crossfade_cycle,
    generate_walker,
    load_csv,
    permute_features,
    random_disturbance,
    save_csv,
    simulate_pendulum,
)
from gestaltbind.gestaltbind.errors import ConfigError, GestaltError, InferenceHaltedError
from gestaltbind.gestaltbind.inference import (
    InferenceHyper,
    infer_binding,
    infer_joint,
    infer_perspective,
    summarize_logs,
)
from gestaltbind.gestaltbind.models import (
    SUBMODALITIES,
    GestaltModel,
    VaeConfig,
    build_gestalt_dataset,
    train_gestalt_model,
)
from gestaltbind.gestaltbind.perception import init_binding, lattices_for_sequence, target_assignment
from gestaltbind.gestaltbind.utils import dump_json, nested_dict_update

from .config import INFERENCE_KINDS, make_config, resolve_model_run, to_plain

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    status: int
    output_dir: str
    seeds: list = field(default_factory=list)


def seed_dir(output_dir, seed):
    return os.path.join(output_dir, f"seed_{seed:03d}")


def build_sequence(data, test=False):
    """Training sequence described by a data config, or its test variant."""
    data = copy.deepcopy(to_plain(data))
    if test:
        nested_dict_update(data, data.get("test") or {})
    if data["source"] == "pendulum":
        seq = simulate_pendulum(PendulumParams(**(data.get("pendulum") or {})))
    elif data["source"] == "walker":
        seq = generate_walker(WalkerParams(**(data.get("walker") or {})))
    else:
        seq = load_csv(data["path"])
    if data.get("crossfade"):
        seq = crossfade_cycle(seq, data["crossfade"])
    return seq


def build_test_sequence(config, seed):
    """
    Test sequence of one seed, with the configured feature permutation and disturbance.

    Returns:
        tuple: (FeatureSequence, target assignment or None, DisturbanceSpec or None)
    """
    data = config.data
    seq = build_sequence(data, test=True)
    target = None
    if data.permutation is not None:
        seq = permute_features(seq, data.permutation)
        target = target_assignment(data.permutation)
    spec = None
    if data.disturbance is not None:
        spec = DisturbanceSpec(
            angles_deg=tuple(data.disturbance.get("angles_deg", (0.0,) * (1 if seq.dims == 2 else 3))),
            translation=tuple(data.disturbance.get("translation", (0.0,) * seq.dims)),
        )
    elif data.random_disturbance is not None:
        spec = random_disturbance(np.random.default_rng(seed), dims=seq.dims, **data.random_disturbance)
    if spec is not None:
        seq = apply_disturbance(seq, spec)
    return seq, target, spec


def model_lattices(config, seq):
    if config.encoding == "raw":
        return {}
    return lattices_for_sequence(
        seq, tuple(config.lattice.counts), tuple(config.lattice.zetas), config.lattice.reach
    )


def vae_configs(config, dataset, seed):
    m = config.model
    raw = config.encoding == "raw"
    return {
        kind: VaeConfig(
            input_size=dataset[kind].shape[1],
            hidden_size=m.hidden_size,
            latent_size=m.latent_size,
            lr=m.lr[kind],
            epochs=m.epochs,
            batch_size=m.batch_size,
            kl_weight=m.kl_weight,
            kl_warmup=m.kl_warmup,
            seed=seed,
            output="linear" if raw else "sigmoid",
            loss="sse" if raw else "bce",
        )
        for kind in SUBMODALITIES
    }


def train_seed(config, seed, output_dir):
    """Trains and stores the Gestalt model of one seed."""
    config = EasyDict(config)
    seq = build_sequence(config.data)
    lattices = model_lattices(config, seq)
    dataset = build_gestalt_dataset(seq, lattices, config.encoding)
    model, curves = train_gestalt_model(
        dataset,
        vae_configs(config, dataset, seed),
        lattices,
        config.encoding,
        config.inference.betas,
        num_slots=seq.num_features,
        dims=seq.dims,
        metadata=dict(seed=seed, experiment=config.name),
    )
    out = seed_dir(output_dir, seed)
    os.makedirs(out, exist_ok=True)
    model.save(os.path.join(out, "model"))
    curves.to_csv(os.path.join(out, "training_curve.csv"), index=False, float_format="%.17g")
    last = curves.iloc[-1] if len(curves) else None
    return dict(
        seed=seed,
        status="ok",
        **({f"loss_{k}": float(last[f"loss_{k}"]) for k in SUBMODALITIES} if last is not None else {}),
    )


def infer_seed(config, seed, output_dir, model_dir):
    """Runs retrospective inference for one seed against the model trained with that seed."""
    config = EasyDict(config)
    model_prefix = os.path.join(seed_dir(model_dir, seed), "model")
    model = GestaltModel.load(model_prefix)
    if model.encoding != config.encoding:
        raise ConfigError(
            "encoding", f"model run uses {model.encoding} encoding, experiment says {config.encoding}"
        )
    seq, target, spec = build_test_sequence(config, seed)
    lattices = model_lattices(config, build_sequence(config.data)) or None

    inf = config.inference
    hyper = InferenceHyper(
        eta_f=inf.eta_f, gamma_f=inf.gamma_f, eta_r=inf.eta_r, gamma_r=inf.gamma_r,
        eta_b=inf.eta_b, gamma_b=inf.gamma_b, betas=dict(inf.betas), signal=inf.signal,
    )
    target_pose = spec.inverse() if spec is not None else None
    common = dict(lattices=lattices, od_literal=inf.od_literal, fbe_literal=inf.fbe_literal)

    out = seed_dir(output_dir, seed)
    os.makedirs(out, exist_ok=True)
    save_csv(seq, os.path.join(out, "test_sequence.csv"))
    binding = pose = None
    if config.kind == "bind":
        log, binding = infer_binding(
            model, seq, hyper, inf.steps, inf.init_bias, target, target_pose=target_pose, **common
        )
    elif config.kind == "perspective":
        log, pose = infer_perspective(
            model, seq, hyper, inf.steps, target_pose,
            rotation=inf.groups.rotation, translation=inf.groups.translation, **common,
        )
    else:
        if inf.groups.binding:
            start = init_binding("inference", seq.num_features, model.num_slots, inf.init_bias)
        else:
            start = init_binding("training", seq.num_features, model.num_slots)
        log, binding, pose = infer_joint(
            model, seq, hyper, inf.steps, start, target, target_pose, **common
        )

    log.to_csv(os.path.join(out, "metrics.csv"))
    log.pose_trajectory().to_csv(
        os.path.join(out, "pose_trajectory.csv"), index=False, float_format="%.17g"
    )
    if binding is not None:
        pd.DataFrame(binding.weights).to_csv(
            os.path.join(out, "binding_final.csv"), index=False, float_format="%.17g"
        )
    if pose is not None:
        dump_json(pose.to_dict(), os.path.join(out, "pose_final.json"))
    return dict(
        seed=seed,
        status="ok",
        fbe_first=log.first("fbe"),
        fbe_last=log.last("fbe"),
        od_first=log.first("od"),
        od_last=log.last("od"),
        td_first=log.first("td"),
        td_last=log.last("td"),
    )


def _seed_job(args):
    kind, config, seed, output_dir, model_dir = args
    try:
        if kind == "train":
            return train_seed(config, seed, output_dir)
        return infer_seed(config, seed, output_dir, model_dir)
    except InferenceHaltedError as e:
        dump_json(e.snapshot, os.path.join(seed_dir(output_dir, seed), "halted.json"))
        return dict(seed=seed, status="failed", error=str(e))
    except GestaltError as e:
        return dict(seed=seed, status="failed", error=str(e))


def _prepare_output(output_dir):
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as e:
        raise ConfigError("output_dir", f"cannot create {output_dir}: {e}")
    if not os.access(output_dir, os.W_OK):
        raise ConfigError("output_dir", f"{output_dir} is not writable")


def run(config, progress=False):
    """
    Executes an experiment.

    Returns:
        RunResult: status 0 when every seed succeeded, 1 otherwise

    Raises:
        ConfigError: missing model run or unusable output directory, before anything runs
    """
    if config.kind == "ablation":
        return run_ablation(config, progress)

    model_dir = resolve_model_run(config) if config.kind in INFERENCE_KINDS else None
    output_dir = config.output_dir
    _prepare_output(output_dir)
    plain = to_plain(config)
    dump_json(
        dict(config=plain, version=gb.__version__, model_run=model_dir),
        os.path.join(output_dir, "manifest.json"),
    )
    if config.kind == "train":
        save_csv(build_sequence(config.data), os.path.join(output_dir, "data", "train.csv"))

    jobs = [(config.kind, plain, seed, output_dir, model_dir) for seed in config.seeds]
    if config.num_workers > 1:
        with ProcessPoolExecutor(max_workers=config.num_workers) as executor:
            results = list(
                tqdm(executor.map(_seed_job, jobs), total=len(jobs), desc=config.name, disable=not progress)
            )
    else:
        results = [_seed_job(job) for job in tqdm(jobs, desc=config.name, disable=not progress)]

    for r in results:
        if r["status"] != "ok":
            logger.error("%s seed %d failed: %s", config.name, r["seed"], r["error"])
    dump_json(results, os.path.join(output_dir, "results.json"))

    ok = [r["seed"] for r in results if r["status"] == "ok"]
    if config.kind in INFERENCE_KINDS and ok:
        frames = [pd.read_csv(os.path.join(seed_dir(output_dir, s), "metrics.csv")) for s in ok]
        summarize_logs(frames).to_csv(
            os.path.join(output_dir, "summary.csv"), index=False, float_format="%.17g"
        )
    status = 0 if len(ok) == len(results) else 1
    return RunResult(status=status, output_dir=output_dir, seeds=results)


def run_ablation(config, progress=False):
    """Runs every arm on the ablation's seeds and tabulates final-step metrics per arm."""
    _prepare_output(config.output_dir)
    dump_json(
        dict(config=to_plain(config), version=gb.__version__),
        os.path.join(config.output_dir, "manifest.json"),
    )
    rows, status, arm_results = [], 0, []
    for arm, preset in config.ablation.arms.items():
        arm_config = make_config(
            preset,
            overrides=[f"seeds={list(config.seeds)}", f"num_workers={config.num_workers}"],
            output_dir=os.path.join(config.output_dir, arm),
        )
        result = run(arm_config, progress)
        status = max(status, result.status)
        arm_results.append(result)
        summary_path = os.path.join(result.output_dir, "summary.csv")
        if not os.path.exists(summary_path):
            continue
        last = pd.read_csv(summary_path).iloc[-1]
        rows.append(
            dict(
                arm=arm,
                preset=preset,
                runs=int(last["runs"]),
                step=int(last["step"]),
                **{f"{m}_{s}": float(last[f"{m}_{s}"]) for m in ("fbe", "od", "td") for s in ("mean", "std")},
            )
        )
    pd.DataFrame(rows).to_csv(
        os.path.join(config.output_dir, "ablation_summary.csv"), index=False, float_format="%.17g"
    )
    seeds = [dict(arm=os.path.basename(r.output_dir), seeds=r.seeds) for r in arm_results]
    return RunResult(status=status, output_dir=config.output_dir, seeds=seeds)
