"""Rebuild the bundled MNIST subset IDX files from the npm `mnist` package.

That package (MIT licensed) ships a subset of the canonical MNIST digits as
per-digit JSON arrays of floats in [0, 1], originally produced by dividing
the byte images by 255. round(v * 255) recovers the original bytes exactly.

Usage: python3 tools/make_mnist_idx.py <digits_dir> [out_dir]

<digits_dir> holds 0.json .. 9.json, each {"data": [flat floats]} with one
784-float row per image. Output goes to data/mnist/ by default. The shuffle
seed is fixed so the output is reproducible byte for byte.
"""

import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from wuxingnet.mnist import (ImageSet, LabelSet, write_idx_images,
                             write_idx_labels)

SHUFFLE_SEED = 0


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__.strip())
    digits_dir = pathlib.Path(sys.argv[1])
    out_dir = pathlib.Path(sys.argv[2]) if len(sys.argv) > 2 else (
        pathlib.Path(__file__).resolve().parents[1] / "data" / "mnist")
    out_dir.mkdir(parents=True, exist_ok=True)

    blocks, labels = [], []
    for digit in range(10):
        raw = json.loads((digits_dir / f"{digit}.json").read_text())
        flat = np.asarray(raw["data"], dtype=np.float64)
        imgs = flat.reshape(-1, 28, 28)
        bytes_ = np.round(imgs * 255.0).astype(np.uint8)
        # the package stores round(byte/255, 3); recovery is exact iff the
        # bytes reproduce the stored floats under that same rounding
        if not np.array_equal(np.round(bytes_ / 255.0, 3), imgs):
            sys.exit(f"digit {digit}: data is not byte-exact")
        blocks.append(bytes_)
        labels.append(np.full(len(bytes_), digit, dtype=np.uint8))
        print(f"digit {digit}: {len(bytes_)} images")

    pixels = np.concatenate(blocks)
    labs = np.concatenate(labels)
    perm = np.random.default_rng(SHUFFLE_SEED).permutation(len(labs))
    pixels, labs = pixels[perm], labs[perm]

    img_path = out_dir / "subset-images-idx3-ubyte"
    lab_path = out_dir / "subset-labels-idx1-ubyte"
    img_path.write_bytes(write_idx_images(
        ImageSet(len(labs), 28, 28, pixels)))
    lab_path.write_bytes(write_idx_labels(LabelSet(len(labs), labs)))
    print(f"wrote {img_path} ({len(labs)} images) and {lab_path}")


if __name__ == "__main__":
    main()
