"""Repackage the 10,000-digit MNIST subset shipped in the `mnist` npm package
(src/digits/<d>.json, pixel/255 rounded to 3 decimals) as gzipped IDX files.

The 3-decimal rounding error is below 0.5/255, so round(v * 255) restores the
original bytes exactly.

usage: python3 scripts/mnist_subset.py <npm-package-dir> <out-dir>
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np

TRAIN_FRACTION = 0.7
SEED = 0


def write_idx(path, images, labels_path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())
    with gzip.GzipFile(labels_path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    train_x, train_y, test_x, test_y = [], [], [], []
    for digit in range(10):
        data = json.loads((src / "src" / "digits" / f"{digit}.json").read_text())["data"]
        pixels = np.rint(np.asarray(data) * 255.0).astype(np.uint8).reshape(-1, 784)
        cut = int(round(TRAIN_FRACTION * len(pixels)))
        train_x.append(pixels[:cut])
        train_y.append(np.full(cut, digit))
        test_x.append(pixels[cut:])
        test_y.append(np.full(len(pixels) - cut, digit))
    rng = np.random.default_rng(SEED)
    for name, xs, ys in (("train", train_x, train_y), ("t10k", test_x, test_y)):
        x, y = np.concatenate(xs), np.concatenate(ys)
        order = rng.permutation(len(x))
        write_idx(
            out / f"{name}-images-idx3-ubyte.gz",
            x[order],
            out / f"{name}-labels-idx1-ubyte.gz",
            y[order],
        )
        print(name, len(x), np.bincount(y))


if __name__ == "__main__":
    main()
