"""Figure rendering for the report paths; every figure sits next to a CSV."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_histogram_figure(path, centers, series, xlabel, title=None):
    """Overlaid per-class fraction bars; series maps label -> fractions."""
    fig, ax = plt.subplots(figsize=(6, 4))
    width = (centers[1] - centers[0]) * 0.9 if len(centers) > 1 else 0.8
    for label, fractions in series.items():
        ax.bar(centers, fractions, width=width, alpha=0.55, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("fraction")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(path, params, aucs, xlabel, log_x=False):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(params, aucs, marker="o")
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.05)
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_loss_figure(path, report):
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = range(1, report.n_epochs + 1)
    ax.plot(epochs, report.train_losses, label="train")
    ax.plot(epochs, report.val_losses, label="validation")
    if report.best_epoch:
        ax.axvline(report.best_epoch, color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
