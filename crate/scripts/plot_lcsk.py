#!/usr/bin/env python3
"""Plot channels of an LCSK grid file, optionally with curves from curves.csv.

    python3 scripts/plot_lcsk.py out/field.lcsk ftle_f --curves out/curves.csv -o ftle.png
"""

import argparse
import csv
import struct

import matplotlib.pyplot as plt
import numpy as np


def read_lcsk(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != b"LCSK":
        raise ValueError(f"{path}: not an LCSK file")
    version, nx, ny, count = struct.unpack_from("<4I", data, 4)
    if version != 1:
        raise ValueError(f"{path}: unsupported version {version}")
    extent = struct.unpack_from("<4d", data, 20)
    pos = 52
    names = []
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, pos)
        names.append(data[pos + 2 : pos + 2 + n].decode())
        pos += 2 + n
    channels = {}
    for name in names:
        values = np.frombuffer(data, dtype="<f8", count=nx * ny, offset=pos)
        channels[name] = values.reshape(ny, nx)
        pos += 8 * nx * ny
    return extent, channels


def read_curves(path):
    curves = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            c = curves.setdefault(int(row["curve_id"]), ([], [], row["class"]))
            c[0].append(float(row["x"]))
            c[1].append(float(row["y"]))
    return curves.values()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("file")
    ap.add_argument("channel", nargs="?", default="ftle_f")
    ap.add_argument("--curves")
    ap.add_argument("-o", "--output")
    args = ap.parse_args()

    extent, channels = read_lcsk(args.file)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(channels[args.channel], origin="lower", extent=extent, cmap="viridis")
    fig.colorbar(im, ax=ax, label=args.channel)
    colours = {"repelling": "red", "attracting": "blue"}
    if args.curves:
        for xs, ys, cls in read_curves(args.curves):
            ax.plot(xs, ys, color=colours.get(cls, "white"), lw=1.5)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if args.output:
        fig.savefig(args.output, dpi=150, bbox_inches="tight")
    else:
        plt.show()


if __name__ == "__main__":
    main()
