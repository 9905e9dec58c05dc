"""Figures written next to the summary CSVs."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIG_WIDTH = 7.0
PLOT_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _figure(nrows=1, ncols=1, height=None):
    golden = (math.sqrt(5) - 1) / 2
    height = height or FIG_WIDTH * golden * nrows / max(ncols, 1)
    return plt.subplots(nrows, ncols, figsize=(FIG_WIDTH, height), squeeze=False)


def plot_ppi(predictor_ppi, threshold, path):
    """Bar chart of predictor PPIs with the selection cutoff."""
    with plt.rc_context(PLOT_RC):
        fig, axes = _figure(height=3.0)
        ax = axes[0, 0]
        ppi = np.asarray(predictor_ppi)
        idx = np.arange(1, ppi.size + 1)
        colors = np.where(ppi > threshold, "tab:blue", "tab:gray")
        ax.bar(idx, ppi, color=colors, width=0.8)
        ax.axhline(threshold, color="tab:red", lw=0.8, ls="--")
        ax.set_xlabel("predictor")
        ax.set_ylabel("PPI")
        ax.set_ylim(0, 1.02)
        ax.set_xlim(0.3, ppi.size + 0.7)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_coefficient_curves(Z, curves, covariates, path):
    """One panel per selected predictor: estimated coefficient against a covariate.

    ``curves`` maps predictor index to per-subject coefficient estimates;
    ``covariates`` maps predictor index to its selected covariate indices,
    and the first one is used as the horizontal axis (subject order when
    none is selected).
    """
    keys = sorted(curves)
    if not keys:
        return False
    ncols = min(3, len(keys))
    nrows = math.ceil(len(keys) / ncols)
    with plt.rc_context(PLOT_RC):
        fig, axes = _figure(nrows, ncols, height=2.4 * nrows)
        for ax in axes.ravel()[len(keys):]:
            ax.set_visible(False)
        for ax, j in zip(axes.ravel(), keys):
            ks = covariates.get(j) or []
            if ks:
                x = Z[:, ks[0]]
                ax.set_xlabel(f"z{ks[0] + 1}")
            else:
                x = np.arange(Z.shape[0])
                ax.set_xlabel("subject")
            order = np.argsort(x, kind="stable")
            ax.plot(x[order], np.asarray(curves[j])[order], ".", ms=3)
            ax.set_title(f"x{j + 1}")
            ax.set_ylabel("coefficient")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return True
