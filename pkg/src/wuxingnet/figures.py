"""Figure rendering for experiment outputs.

Plots are written next to the delimited files, never shown interactively;
the Agg backend keeps this working on headless machines.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_accuracy_curves(rows, path):
    """Accuracy-vs-epoch figure from metrics rows (header order matters)."""
    epochs = [int(r[0]) for r in rows]
    train_acc = [float(r[1]) for r in rows]
    test_acc = [float(r[2]) for r in rows]
    mae = [float(r[3]) for r in rows]

    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax.plot(epochs, train_acc, "o-", label="train")
    ax.plot(epochs, test_acc, "s-", label="test")
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.legend()
    ax.grid(True, alpha=0.3)

    ax2.plot(epochs, mae, "o-", color="tab:red")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("mean abs error")
    ax2.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion(confusion, path):
    """Heatmap of [true, predicted] counts."""
    confusion = np.asarray(confusion)
    n = confusion.shape[0]
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(confusion, cmap="Blues")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    # annotate cells only while they stay readable
    if n <= 12:
        thresh = confusion.max() / 2 if confusion.max() else 1
        for i in range(n):
            for j in range(n):
                ax.text(j, i, str(confusion[i, j]), ha="center", va="center",
                        fontsize=7,
                        color="white" if confusion[i, j] > thresh else "black")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
