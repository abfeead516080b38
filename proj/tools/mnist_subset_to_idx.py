#!/usr/bin/env python3
"""Write the 5000-image MNIST subset bundled with mlxtend as an IDX3 file.

The official MNIST mirrors are often unreachable from build sandboxes. The
mlxtend wheel ships the first 5000 training images as CSV, which is enough
for the tomography experiments (3000 systems). The output is a standard
big-endian IDX3 file (magic 0x00000803) plus a matching IDX1 label file.

usage: mnist_subset_to_idx.py OUT_DIR [--wheel PATH]
"""

import argparse
import gzip
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def find_wheel(explicit):
    if explicit:
        return Path(explicit)
    tmp = Path(tempfile.mkdtemp())
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--retries", "10",
         "-d", str(tmp), "mlxtend"],
        check=True,
    )
    wheels = sorted(tmp.glob("mlxtend-*.whl"))
    if not wheels:
        sys.exit("mlxtend wheel download failed")
    return wheels[-1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--wheel")
    args = ap.parse_args()

    wheel = find_wheel(args.wheel)
    rows = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER)).decode().splitlines()

    images = bytearray()
    labels = bytearray()
    for line in rows:
        vals = [int(float(v)) for v in line.split(",")]
        images.extend(bytes(vals[:784]))
        labels.append(vals[784])

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        f.write(images)
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(labels)
    print(f"wrote {len(rows)} images to {out}")


if __name__ == "__main__":
    main()
