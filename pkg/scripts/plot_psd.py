"""Plot PSD CSVs emitted by `dpdengine evaluate` (convenience script).

Usage: python scripts/plot_psd.py out/psd_nodpd.csv out/psd_dpd.csv
"""

import sys

import numpy as np


def main(paths):
    import matplotlib.pyplot as plt

    for path in paths:
        data = np.genfromtxt(path, delimiter=",", names=True)
        plt.plot(data["freq_hz"] / 1e6, data["power_db"], label=path)
    plt.xlabel("frequency (MHz)")
    plt.ylabel("power (dB/bin)")
    plt.legend()
    plt.grid(True)
    plt.show()


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit("usage: plot_psd.py <psd.csv> [psd.csv ...]")
    main(sys.argv[1:])
