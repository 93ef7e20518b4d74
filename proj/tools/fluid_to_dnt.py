#!/usr/bin/env python3
"""Convert the cylinder-wake vorticity data to a 199 x 449 x 150 DNT tensor.

Input is CYLINDER_ALL.mat from the data bundle of the book "Data-Driven Science
and Engineering" (dmdbook.com). Its VORTALL matrix holds one flattened
199 x 449 vorticity field per column (column-major, 199 fastest) and 151
snapshots; the first 150 are kept.

    python3 tools/fluid_to_dnt.py CYLINDER_ALL.mat fluid.dnt

A .npy file already shaped (199, 449, 150) is accepted too.
"""

import argparse
import struct
import sys

import numpy as np

ROWS, COLS, SNAPSHOTS = 199, 449, 150


def load(path):
    if path.endswith(".npy"):
        t = np.load(path)
        if t.shape != (ROWS, COLS, SNAPSHOTS):
            sys.exit(f"{path}: expected shape {(ROWS, COLS, SNAPSHOTS)}, got {t.shape}")
        return t
    from scipy.io import loadmat

    mat = loadmat(path)
    if "VORTALL" not in mat:
        sys.exit(f"{path}: no VORTALL variable")
    vort = mat["VORTALL"]
    if vort.shape[0] != ROWS * COLS or vort.shape[1] < SNAPSHOTS:
        sys.exit(f"{path}: VORTALL has shape {vort.shape}, expected ({ROWS * COLS}, >= {SNAPSHOTS})")
    frames = vort[:, :SNAPSHOTS].reshape(ROWS, COLS, SNAPSHOTS, order="F")
    return frames


def write_dnt(path, t):
    t = np.ascontiguousarray(t, dtype="<f8")
    with open(path, "wb") as f:
        f.write(b"DNT1")
        f.write(struct.pack("<B", t.ndim))
        f.write(struct.pack(f"<{t.ndim}Q", *t.shape))
        f.write(t.tobytes(order="C"))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("input", help="CYLINDER_ALL.mat or a (199, 449, 150) .npy")
    ap.add_argument("output", help="destination .dnt")
    args = ap.parse_args()
    t = load(args.input)
    write_dnt(args.output, t)
    print(f"wrote {args.output}: shape {t.shape}, |Y|_F = {np.linalg.norm(t):.6g}")


if __name__ == "__main__":
    main()
