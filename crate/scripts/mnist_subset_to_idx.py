#!/usr/bin/env python3
"""Write a small MNIST subset in IDX format.

The source is the 5000-image MNIST sample shipped inside the `mlxtend`
wheel (mlxtend/data/data/mnist_5k.csv.gz, 784 pixel columns followed by the
label, 500 images per class, sorted by label). Each class contributes
TRAIN/10 training and TEST/10 test images; both splits are shuffled with a
fixed seed so the output is reproducible.

    pip download --no-deps -d /tmp/mlx mlxtend
    python3 scripts/mnist_subset_to_idx.py /tmp/mlx/mlxtend-*.whl data/mnist
"""
import gzip
import random
import struct
import sys
import zipfile
from pathlib import Path

TRAIN = 2000
TEST = 1000


def write_idx(path, dims, payload):
    with open(path, "wb") as f:
        f.write(bytes([0, 0, 0x08, len(dims)]))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(bytes(payload))


def main():
    wheel, out = sys.argv[1], Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    rows = [list(map(int, map(float, line.split(",")))) for line in text.splitlines()]
    by_class = {}
    for r in rows:
        by_class.setdefault(r[784], []).append(r)
    per_train, per_test = TRAIN // 10, TEST // 10
    train = [r for c in sorted(by_class) for r in by_class[c][:per_train]]
    test = [r for c in sorted(by_class) for r in by_class[c][per_train:per_train + per_test]]
    rng = random.Random(0)
    rng.shuffle(train)
    rng.shuffle(test)
    splits = {"train": train, "t10k": test}
    for name, part in splits.items():
        pixels = [p for r in part for p in r[:784]]
        labels = [r[784] for r in part]
        write_idx(out / f"{name}-images-idx3-ubyte", [len(part), 28, 28], pixels)
        write_idx(out / f"{name}-labels-idx1-ubyte", [len(part)], labels)


if __name__ == "__main__":
    main()
