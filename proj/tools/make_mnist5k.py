#!/usr/bin/env python3
"""Write the 5,000-digit MNIST sample bundled with mlxtend as IDX files.

Produces a 4,000/1,000 train/test split (400/100 per class) under
data/mnist5k/. Pixel bytes are copied unchanged.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 -m zipfile -e /tmp/mlx/mlxtend-*.whl /tmp/mlx
    python3 tools/make_mnist5k.py /tmp/mlx/mlxtend/data/data/mnist_5k.csv.gz data/mnist5k
"""
import gzip
import struct
import sys
from pathlib import Path

import numpy as np


def write_idx(path, array, magic):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in array.shape:
            f.write(struct.pack(">I", d))
        f.write(array.astype(np.uint8).tobytes())


def main():
    src, out = sys.argv[1], Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    table = np.genfromtxt(gzip.open(src, "rt"), delimiter=",")
    images = table[:, :-1].reshape(-1, 28, 28)
    labels = table[:, -1].astype(int)
    train, test = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        train.extend(idx[:400])
        test.extend(idx[400:])
    for name, idx in (("train", np.array(train)), ("test", np.array(test))):
        write_idx(out / f"{name}-images-idx3-ubyte.gz", images[idx], 0x00000803)
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", labels[idx], 0x00000801)


if __name__ == "__main__":
    main()
