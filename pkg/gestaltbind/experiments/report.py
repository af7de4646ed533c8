"""
Aggregates finished runs into summary tables and static figures.
"""

import glob
import logging
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from gestaltbind.gestaltbind.errors import ReportError
from gestaltbind.gestaltbind.inference import summarize_logs
from gestaltbind.gestaltbind.models import SUBMODALITIES
from gestaltbind.gestaltbind.utils import load_json

from .config import INFERENCE_KINDS

logger = logging.getLogger(__name__)

CURVE_METRICS = (("fbe", "FBE"), ("od", "OD [deg]"), ("td", "TD"))


def _manifest(run_dir):
    path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(path):
        raise ReportError(f"{run_dir} is not a run directory (no manifest.json)")
    return load_json(path)["config"]


def _seed_files(run_dir, name):
    return sorted(glob.glob(os.path.join(run_dir, "seed_*", name)))


def _check_compatible(configs):
    kinds = {c["kind"] for c in configs}
    if len(kinds) > 1:
        raise ReportError(f"cannot mix experiment kinds in one report: {sorted(kinds)}")
    kind = kinds.pop()
    if kind in INFERENCE_KINDS:
        steps = {c["inference"]["steps"] for c in configs}
        if len(steps) > 1:
            raise ReportError(f"runs disagree on the number of inference steps: {sorted(steps)}")
    encodings = {c["encoding"] for c in configs}
    if kind != "ablation" and len(encodings) > 1:
        raise ReportError(f"runs disagree on the encoding: {sorted(encodings)}")
    return kind


def _band(ax, summary, metric, label=None):
    mean = summary[f"{metric}_mean"].to_numpy()
    std = summary[f"{metric}_std"].to_numpy()
    line = ax.plot(summary["step"], mean, label=label)[0]
    ax.fill_between(summary["step"], mean - std, mean + std, color=line.get_color(), alpha=0.25)


def plot_curves(summary, path, title=""):
    fig, axes = plt.subplots(1, len(CURVE_METRICS), figsize=(12, 3.6), constrained_layout=True)
    for ax, (metric, label) in zip(axes, CURVE_METRICS):
        _band(ax, summary, metric)
        ax.set_xlabel("step")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    fig.suptitle(title)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_binding(weights, path, title="binding matrix"):
    fig, ax = plt.subplots(figsize=(5, 4.5), constrained_layout=True)
    im = ax.imshow(weights, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xlabel("slot")
    ax.set_ylabel("observed feature")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_training(curves, path):
    fig, axes = plt.subplots(1, len(SUBMODALITIES), figsize=(12, 3.6), constrained_layout=True)
    for ax, kind in zip(axes, SUBMODALITIES):
        for _, frame in curves:
            ax.plot(frame["epoch"], frame[f"loss_{kind}"], alpha=0.6)
        ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_title(kind)
        ax.grid(True, alpha=0.3)
    axes[0].set_ylabel("loss")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _report_inference(run_dirs, out_dir, name):
    outputs = {}
    frames = [pd.read_csv(p) for d in run_dirs for p in _seed_files(d, "metrics.csv")]
    if not frames:
        raise ReportError(f"no completed seeds under {run_dirs}")
    summary = summarize_logs(frames)
    outputs["summary"] = os.path.join(out_dir, "summary.csv")
    summary.to_csv(outputs["summary"], index=False, float_format="%.17g")
    outputs["curves"] = plot_curves(summary, os.path.join(out_dir, "curves.png"), name)

    bindings = [pd.read_csv(p).to_numpy() for d in run_dirs for p in _seed_files(d, "binding_final.csv")]
    if bindings:
        mean = np.mean(bindings, axis=0)
        outputs["binding_mean"] = os.path.join(out_dir, "binding_mean.csv")
        pd.DataFrame(mean).to_csv(outputs["binding_mean"], index=False, float_format="%.17g")
        outputs["binding_heatmap"] = plot_binding(
            mean, os.path.join(out_dir, "binding_heatmap.png"), f"{name} (mean of {len(bindings)})"
        )
    return outputs


def _report_training(run_dirs, out_dir):
    curves = [(None, pd.read_csv(p)) for d in run_dirs for p in _seed_files(d, "training_curve.csv")]
    if not curves:
        raise ReportError(f"no training curves under {run_dirs}")
    stacked = pd.concat([c for _, c in curves])
    columns = [f"loss_{k}" for k in SUBMODALITIES]
    summary = stacked.groupby("epoch")[columns].agg(["mean", "std"])
    summary.columns = [f"{c}_{stat}" for c, stat in summary.columns]
    summary = summary.fillna(0.0).reset_index()
    summary.insert(1, "runs", stacked.groupby("epoch").size().to_numpy())
    path = os.path.join(out_dir, "training_summary.csv")
    summary.to_csv(path, index=False, float_format="%.17g")
    return dict(
        training_summary=path,
        training_curves=plot_training(curves, os.path.join(out_dir, "training_curves.png")),
    )


def _report_ablation(run_dir, config, out_dir):
    outputs = {}
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    for arm in config["ablation"]["arms"]:
        arm_dir = os.path.join(run_dir, arm)
        arm_out = os.path.join(out_dir, arm)
        os.makedirs(arm_out, exist_ok=True)
        arm_outputs = _report_inference([arm_dir], arm_out, arm)
        outputs.update({f"{arm}/{k}": v for k, v in arm_outputs.items()})
        _band(ax, pd.read_csv(arm_outputs["summary"]), "fbe", label=arm)
    ax.set_xlabel("step")
    ax.set_ylabel("FBE")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    outputs["ablation_fbe"] = os.path.join(out_dir, "ablation_fbe.png")
    fig.savefig(outputs["ablation_fbe"], dpi=150)
    plt.close(fig)
    table = os.path.join(run_dir, "ablation_summary.csv")
    if os.path.exists(table):
        outputs["ablation_summary"] = os.path.join(out_dir, "ablation_summary.csv")
        pd.read_csv(table).to_csv(outputs["ablation_summary"], index=False, float_format="%.17g")
    return outputs


def report(run_dirs, out_dir=None):
    """
    Builds summary tables and figures from one or more finished runs of the same kind.
    Seeds of all given runs are pooled.

    Args:
        run_dirs (list of str): run directories written by the harness
        out_dir (str): where to write; defaults to <first run>/report

    Returns:
        dict: artifact name -> path

    Raises:
        ReportError: no runs, missing artifacts, or incompatible configs
    """
    if not run_dirs:
        raise ReportError("no run directories given")
    configs = [_manifest(d) for d in run_dirs]
    kind = _check_compatible(configs)
    out_dir = out_dir or os.path.join(run_dirs[0], "report")
    os.makedirs(out_dir, exist_ok=True)

    if kind == "ablation":
        if len(run_dirs) > 1:
            raise ReportError("ablation reports take a single run directory")
        outputs = _report_ablation(run_dirs[0], configs[0], out_dir)
    elif kind == "train":
        outputs = _report_training(run_dirs, out_dir)
    else:
        outputs = _report_inference(run_dirs, out_dir, configs[0]["name"])
    logger.info("report for %s written to %s", ", ".join(run_dirs), out_dir)
    return outputs
