"""
Experiment configuration: JSON presets loaded into EasyDict objects, merged with an
optional JSON config file and `--set a.b=value` overrides, then validated against DEFAULTS.
"""

import copy
import json
import os

from easydict import EasyDict

import gestaltbind.gestaltbind as gb
import gestaltbind.gestaltbind.macros as macros
from gestaltbind.gestaltbind.errors import ConfigError
from gestaltbind.gestaltbind.models.vae import SIGNALS
from gestaltbind.gestaltbind.utils import nested_dict_update

KINDS = ("train", "bind", "perspective", "joint", "ablation")
INFERENCE_KINDS = ("bind", "perspective", "joint")
SOURCES = ("pendulum", "walker", "csv")

DEFAULTS = dict(
    name=None,
    kind="train",
    description="",
    data=dict(
        source="pendulum",
        path=None,
        pendulum={},
        walker={},
        crossfade=0,
        permutation=None,
        disturbance=None,
        random_disturbance=None,
        test={},
    ),
    encoding="popcode",
    lattice=dict(counts=[16, 8, 4], zetas=[0.85, 0.85, 0.95], reach=0.0),
    model=dict(
        hidden_size=45,
        latent_size=25,
        lr=dict(posture=1e-3, direction=8e-4, magnitude=5e-4),
        epochs=200,
        batch_size=32,
        kl_weight=1.0,
        kl_warmup=0.1,
    ),
    model_run=None,
    inference=dict(
        steps=1000,
        init_bias=-5.0,
        groups=dict(binding=True, rotation=False, translation=False),
        eta_f=1.0,
        gamma_f=0.9,
        eta_r=1e-2,
        gamma_r=0.9,
        eta_b=8e-2,
        gamma_b=0.9,
        betas=dict(posture=1.0, direction=1.0, magnitude=1.0),
        signal="training",
        od_literal=False,
        fbe_literal=False,
    ),
    ablation=dict(arms={}),
    seeds=[0],
    output_dir=None,
    num_workers=1,
)

# sub-dicts whose keys are not checked here (parameter overrides, disturbance specs, arms)
FREEFORM = {
    "data.pendulum",
    "data.walker",
    "data.disturbance",
    "data.random_disturbance",
    "data.test",
    "ablation.arms",
}


def preset_path(name):
    return os.path.join(gb.presets_root, f"{name}.json")


def available_presets():
    return sorted(f[:-5] for f in os.listdir(gb.presets_root) if f.endswith(".json"))


def load_preset(name):
    path = name if os.path.exists(name) else preset_path(name)
    if not os.path.exists(path):
        raise ConfigError("preset", f"unknown preset '{name}'; available: {available_presets()}")
    with open(path, "r") as f:
        return json.load(f)


def parse_override(text):
    """'a.b=value' -> {'a': {'b': value}}, value parsed as JSON when possible."""
    if "=" not in text:
        raise ConfigError(text, "overrides must look like key.path=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    update = value
    for part in reversed(key.strip().split(".")):
        update = {part: update}
    return update


def _check_keys(config, schema, prefix=""):
    for key, value in config.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(path, "unknown key")
        if path in FREEFORM:
            if value is not None and not isinstance(value, dict):
                raise ConfigError(path, "expected an object")
            continue
        if isinstance(schema[key], dict) and isinstance(value, dict):
            _check_keys(value, schema[key], prefix=f"{path}.")


def _require(cond, field, detail):
    if not cond:
        raise ConfigError(field, detail)


def validate(config):
    _check_keys(config, DEFAULTS)
    c = config
    _require(c.name, "name", "every experiment needs a name")
    _require(c.kind in KINDS, "kind", f"expected one of {KINDS}, got {c.kind!r}")
    _require(c.encoding in ("popcode", "raw"), "encoding", f"expected popcode or raw, got {c.encoding!r}")
    _require(c.data.source in SOURCES, "data.source", f"expected one of {SOURCES}")
    if c.data.source == "csv":
        _require(c.data.path and os.path.exists(c.data.path), "data.path", f"no such file: {c.data.path}")
    _require(
        isinstance(c.seeds, list) and len(c.seeds) > 0 and all(isinstance(s, int) for s in c.seeds),
        "seeds", "expected a non-empty list of integers",
    )
    _require(len(set(c.seeds)) == len(c.seeds), "seeds", "seeds must be distinct")
    _require(len(c.lattice.counts) == 3, "lattice.counts", "expected three neuron counts")
    _require(len(c.lattice.zetas) == 3, "lattice.zetas", "expected three tuning factors")
    _require(c.lattice.reach >= 0, "lattice.reach", "must be >= 0")
    _require(c.model.epochs >= 0, "model.epochs", "must be >= 0")
    _require(c.inference.steps >= 1, "inference.steps", "must be >= 1")
    _require(
        c.inference.signal in SIGNALS, "inference.signal", f"expected one of {SIGNALS}, got {c.inference.signal!r}"
    )
    _require(c.num_workers >= 1, "num_workers", "must be >= 1")
    for group in c.inference.groups:
        _require(group in ("binding", "rotation", "translation"), f"inference.groups.{group}", "unknown group")
    if c.kind in INFERENCE_KINDS:
        _require(c.model_run, "model_run", f"{c.kind} experiments need a trained model run")
    if c.kind == "ablation":
        _require(len(c.ablation.arms) >= 2, "ablation.arms", "need at least two arms")
    if c.data.disturbance is not None:
        _require(
            set(c.data.disturbance) <= {"angles_deg", "translation"},
            "data.disturbance", "expected angles_deg and translation",
        )
    return c


def make_config(preset=None, config_file=None, overrides=(), output_dir=None):
    """
    Builds and validates an ExperimentConfig.

    Args:
        preset (str): preset name or path to a preset JSON file
        config_file (str): JSON file merged on top of the preset
        overrides (list of str): 'a.b=value' strings applied last
        output_dir (str): artifact directory; defaults to <GESTALTBIND_OUTPUT_ROOT>/<name>

    Returns:
        EasyDict
    """
    config = copy.deepcopy(DEFAULTS)
    if preset is not None:
        nested_dict_update(config, load_preset(preset))
    if config_file is not None:
        if not os.path.exists(config_file):
            raise ConfigError("config", f"no such file: {config_file}")
        with open(config_file, "r") as f:
            nested_dict_update(config, json.load(f))
    for text in overrides:
        nested_dict_update(config, parse_override(text))
    if output_dir is not None:
        config["output_dir"] = output_dir
    config = EasyDict(config)
    validate(config)
    if config.output_dir is None:
        config.output_dir = os.path.join(macros.GESTALTBIND_OUTPUT_ROOT, config.name)
    return config


def resolve_model_run(config):
    """Directory of the training run an inference experiment reads its models from."""
    run = config.model_run
    if os.path.isdir(run):
        return os.path.abspath(run)
    path = os.path.join(macros.GESTALTBIND_OUTPUT_ROOT, run)
    if not os.path.isdir(path):
        raise ConfigError("model_run", f"no trained model run at {path}; run `gestaltbind train` first")
    return path


def to_plain(config):
    """EasyDict -> plain nested dicts, for JSON dumps and process pools."""
    return json.loads(json.dumps(config))
