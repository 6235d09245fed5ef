"""Figure rendering for result directories.

Every figure is drawn from the delimited files the pipeline already wrote
(binned_*.csv, covariance_*.csv, mcmc_*.csv, sweep CSVs) and saved as PNG
next to them; nothing here recomputes physics.
"""

import csv
import glob
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = {name: [] for name in reader.fieldnames}
        for row in reader:
            for key, value in row.items():
                columns[key].append(float(value))
    return {k: np.asarray(v) for k, v in columns.items()}


def plot_binned_fit(binned_csv, summary_json=None, out_png=None):
    """Replica-averaged probability vs rescaled energy with the fitted line."""
    data = _read_csv(binned_csv)
    out_png = out_png or binned_csv.replace(".csv", ".png")
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.semilogy(data["bin_center"], data["mean_prob"], "o", ms=3, label="binned mean")
    if summary_json and os.path.exists(summary_json):
        with open(summary_json) as fh:
            summary = json.load(fh)
        fit = summary.get("binned_fit")
        if fit:
            x = np.linspace(0, 1, 200)
            span = summary["summary"]["mean_span"]
            y = np.exp(fit["log_intercept"] - fit["beta"] * span * x)
            ax.semilogy(x, y, "-", lw=1.2,
                        label=f"fit: beta={fit['beta']:.3g}, r2={fit['r2']:.3f}")
    ax.set_xlabel("rescaled energy")
    ax.set_ylabel("mean state probability")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def plot_covariance(cov_csv, out_png=None):
    """Replica-averaged energy/Hamming covariance vs rescaled energy."""
    data = _read_csv(cov_csv)
    out_png = out_png or cov_csv.replace(".csv", ".png")
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(data["e_rescaled"], data["mean_sigma_eh"], "o", ms=3)
    coeffs = np.polyfit(data["e_rescaled"], data["mean_sigma_eh"], 1)
    x = np.linspace(0, 1, 100)
    ax.plot(x, np.polyval(coeffs, x), "-", lw=1.2,
            label=f"slope {coeffs[0]:.3g}")
    ax.set_xlabel("rescaled energy")
    ax.set_ylabel("mean sigma_EH")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def plot_sweep(sweep_csv, out_png=None):
    """beta, energy and enhancement along a 1-D angle sweep."""
    data = _read_csv(sweep_csv)
    out_png = out_png or sweep_csv.replace(".csv", ".png")
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
    axes[0].errorbar(data["angle"], data["beta"], yerr=2.576 * data["beta_stderr"],
                     fmt="o-", ms=3, lw=1)
    axes[0].set_ylabel("beta")
    axes[1].plot(data["angle"], data["energy"], "o-", ms=3, lw=1)
    axes[1].set_ylabel("energy")
    axes[2].semilogy(data["angle"], np.maximum(data["xi"], 1e-12), "o-", ms=3, lw=1)
    axes[2].set_ylabel("xi")
    for ax in axes:
        ax.set_xlabel("angle")
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def plot_mixing_gap(mcmc_csvs, out_png):
    """beta_QAOA * ||J|| against ||J||, with the rapid-mixing bound at 1."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for path in mcmc_csvs:
        data = _read_csv(path)
        label = os.path.basename(path).replace("mcmc_", "").replace(".csv", "")
        ax.plot(data["norm_J"], data["product"], ".", ms=3, alpha=0.6, label=label)
    ax.axhline(1.0, color="k", lw=1, ls="--", label="rapid-mixing bound")
    ax.set_xlabel("||J||")
    ax.set_ylabel("beta_QAOA * ||J||")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def render_report(outdir):
    """Render every figure the directory's delimited files support."""
    written = []
    for binned in sorted(glob.glob(os.path.join(outdir, "binned_*.csv"))):
        tag = os.path.basename(binned)[len("binned_"):-len(".csv")]
        summary = os.path.join(outdir, f"summary_{tag}.json")
        written.append(plot_binned_fit(binned, summary))
    for cov in sorted(glob.glob(os.path.join(outdir, "covariance_*.csv"))):
        written.append(plot_covariance(cov))
    for swp in sorted(glob.glob(os.path.join(outdir, "sweep*.csv"))):
        written.append(plot_sweep(swp))
    mcmc_csvs = sorted(glob.glob(os.path.join(outdir, "mcmc_*.csv")))
    if mcmc_csvs:
        written.append(plot_mixing_gap(mcmc_csvs, os.path.join(outdir, "mixing_gap.png")))
    return written
