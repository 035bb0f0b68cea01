"""CSV report writers and the matplotlib figures rendered next to them."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .hybrid import EvalRow

__all__ = [
    "write_loss_csv",
    "write_eval_csv",
    "plot_loss",
    "plot_evaluation",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_loss_csv(history: list[tuple[int, float, float | None]], path) -> None:
    """Per-epoch losses; header epoch,train_loss,test_loss."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["epoch", "train_loss", "test_loss"])
        for epoch, tr, te in history:
            out.writerow([epoch, _fmt(tr), "" if te is None else _fmt(te)])


def write_eval_csv(rows: list[EvalRow], path) -> None:
    """One row per (level, split, n_train); header fixed."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["h", "split", "n_train", "err_coarse", "err_fine", "err_hybrid"])
        for r in rows:
            out.writerow(
                [_fmt(r.h), r.split, r.n_train,
                 _fmt(r.err_coarse), _fmt(r.err_fine), _fmt(r.err_hybrid)]
            )


def plot_loss(history: list[tuple[int, float, float | None]], path) -> None:
    """Training-loss decay on a log scale, train and held-out curves."""
    epochs = [e for e, _, _ in history]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(epochs, [tr for _, tr, _ in history], label="train")
    if any(te is not None for _, _, te in history):
        ax.semilogy(epochs, [te for _, _, te in history], label="test")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_evaluation(rows: list[EvalRow], path) -> None:
    """Grouped bars of the mean coarse/fine/hybrid errors per split."""
    splits = [r.split for r in rows]
    series = [
        ("coarse", [r.err_coarse for r in rows]),
        ("fine", [r.err_fine for r in rows]),
        ("hybrid", [r.err_hybrid for r in rows]),
    ]
    x = range(len(rows))
    width = 0.27
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for k, (label, vals) in enumerate(series):
        ax.bar([xi + (k - 1) * width for xi in x], vals, width, label=label)
    ax.set_yscale("log")
    ax.set_xticks(list(x))
    ax.set_xticklabels(splits)
    ax.set_ylabel("mean error vs reference")
    if rows:
        ax.set_title(f"h = {rows[0].h:g}, n_train = {rows[0].n_train}")
    ax.grid(True, axis="y", which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
