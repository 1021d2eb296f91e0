"""Plot a series.csv produced by `otoc-qsl run` (or a sweep's series_*.csv)."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv", nargs="+")
    ap.add_argument("-o", "--output", default="series.png")
    args = ap.parse_args()

    fig, (ax_o, ax_r) = plt.subplots(1, 2, figsize=(10, 4))
    for path in args.csv:
        d = np.genfromtxt(path, delimiter=",", names=True)
        ax_o.plot(d["Jt"], d["otoc_exact"], label=f"exact {path}")
        ax_o.plot(d["Jt"], d["bound_liouville"], "--", label="Liouville bound")
        ax_o.plot(d["Jt"], d["bound_state_relaxed"], ":", label="state bound (relaxed)")
        ax_r.plot(d["Jt"], d["rate_exact"], label="exact")
        ax_r.plot(d["Jt"], d["rate_liouville"], "--", label="Liouville")
        ax_r.plot(d["Jt"], d["rate_state"], ":", label="state")
    ax_o.axhline(0.5, color="gray", ls="--", lw=0.8)
    ax_o.set_xlabel("Jt")
    ax_o.set_ylabel("averaged OTOC")
    ax_r.set_xlabel("Jt")
    ax_r.set_ylabel("|ln|")
    ax_o.legend(fontsize=7)
    ax_r.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
