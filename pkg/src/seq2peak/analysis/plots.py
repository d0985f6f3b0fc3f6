"""Static PNG figures for experiment outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_acf_comparison(full, peak, path, channel=""):
    """Hourly-series ACF next to the daily peak-series ACF, with 95% bands."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.2))
    for ax, table, title, unit in (
        (axes[0], full, "Full series", "hours"),
        (axes[1], peak, "Peak-hour series", "days"),
    ):
        ax.vlines(table["lag"], 0, table["acf"], color="tab:blue", linewidth=1)
        ax.axhspan(-table["limit"].iloc[0], table["limit"].iloc[0], color="tab:gray", alpha=0.2)
        ax.axhline(0, color="black", linewidth=0.5)
        ax.set_title(f"{title} {channel}".strip())
        ax.set_xlabel(f"lag ({unit})")
        ax.set_ylabel("ACF")
    return _save(fig, path)


def plot_alpha_curve(curve, path):
    """Test peak MSE against the hybrid-loss weight."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(curve["alpha"], curve["mse"], marker="o")
    ax.set_xlabel("alpha")
    ax.set_ylabel("peak MSE")
    ax.set_title("Effect of peak weighting")
    return _save(fig, path)


def plot_traces(traces, path, channel=None, window=0):
    """
    Predicted vs true daily peaks of the given window for each paradigm.

    Args:
        traces: Mapping paradigm -> trace DataFrame from forecast_traces
    """
    fig, ax = plt.subplots(figsize=(6, 3.2))
    truth_drawn = False
    for name, df in traces.items():
        sel = df[df["window"] == window]
        if channel is not None:
            sel = sel[sel["channel"] == channel]
        else:
            sel = sel[sel["channel"] == sel["channel"].iloc[0]]
        if not truth_drawn:
            ax.plot(sel["day"], sel["y_true_peak"], color="black", linewidth=2, label="truth")
            truth_drawn = True
        ax.plot(sel["day"], sel["y_pred_peak"], marker=".", label=name)
    ax.set_xlabel("forecast day")
    ax.set_ylabel("daily peak")
    ax.legend(fontsize=8)
    return _save(fig, path)
