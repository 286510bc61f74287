#!/usr/bin/env python3
"""Regenerate the bundled image corpus in testdata/.

Crops are taken from photographs that ship with scikit-image, scikit-learn
and matplotlib, so the corpus can be rebuilt on any machine with those
packages installed. Train and eval splits use disjoint source photographs.

Usage: python3 tools/make_testdata.py
"""
import os

from PIL import Image
import matplotlib
import skimage
import sklearn

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
SKIMAGE = os.path.join(os.path.dirname(skimage.__file__), "data")
SKLEARN = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "images")
MPL = os.path.join(matplotlib.get_data_path(), "sample_data")

TILE = 168

# (name, source file) for the training split; every full TILE x TILE tile
# on a regular grid is kept.
TRAIN_SOURCES = [
    ("astronaut", os.path.join(SKIMAGE, "astronaut.png")),
    ("chelsea", os.path.join(SKIMAGE, "chelsea.png")),
    ("china", os.path.join(SKLEARN, "china.jpg")),
    ("flower", os.path.join(SKLEARN, "flower.jpg")),
    ("ihc", os.path.join(SKIMAGE, "ihc.png")),
]

# (name, source file, crop height, crop width) for the eval split; a single
# centered crop per photograph.
EVAL_SOURCES = [
    ("coffee", os.path.join(SKIMAGE, "coffee.png"), 320, 480),
    ("hubble", os.path.join(SKIMAGE, "hubble_deep_field.jpg"), 384, 384),
    ("hopper", os.path.join(MPL, "grace_hopper.jpg"), 384, 320),
    ("rocket", os.path.join(SKIMAGE, "rocket.jpg"), 320, 480),
    ("motorcycle", os.path.join(SKIMAGE, "motorcycle_right.png"), 320, 480),
]


def main():
    train_dir = os.path.join(ROOT, "testdata", "train")
    eval_dir = os.path.join(ROOT, "testdata", "eval")
    os.makedirs(train_dir, exist_ok=True)
    os.makedirs(eval_dir, exist_ok=True)

    n = 0
    for name, path in TRAIN_SOURCES:
        im = Image.open(path).convert("RGB")
        w, h = im.size
        for r in range(h // TILE):
            for c in range(w // TILE):
                tile = im.crop((c * TILE, r * TILE, (c + 1) * TILE, (r + 1) * TILE))
                tile.save(os.path.join(train_dir, f"{name}_r{r}c{c}.png"))
                n += 1
    print(f"wrote {n} training tiles ({TILE}x{TILE})")

    for name, path, ch, cw in EVAL_SOURCES:
        im = Image.open(path).convert("RGB")
        w, h = im.size
        x0, y0 = (w - cw) // 2, (h - ch) // 2
        im.crop((x0, y0, x0 + cw, y0 + ch)).save(os.path.join(eval_dir, f"{name}.png"))
    print(f"wrote {len(EVAL_SOURCES)} eval images")


if __name__ == "__main__":
    main()
