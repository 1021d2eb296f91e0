"""Plot min OTOC and max bound gap against the swept parameter of a sweep.csv."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("-o", "--output", default="sweep.png")
    args = ap.parse_args()

    d = np.genfromtxt(args.csv, delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(d["value"], d["min_otoc"], "o-", label="min OTOC")
    ax.plot(d["value"], d["max_gap"], "s--", label="max gap to Liouville bound")
    ax.set_xlabel("swept value")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
