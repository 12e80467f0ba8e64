#!/usr/bin/env python3
"""Regenerates the binary test fixtures in this directory.

digits_28x28.idx : 1797 handwritten digit images (sklearn load_digits, 8x8
                   u8 0..16) bilinearly zoomed to 28x28 and rescaled to 0..255,
                   stored as an IDX u8 3-D tensor.
rgb8.raw         : 512 synthetic 8x8 RGB images, planar u8 (3*8*8 per image):
                   smooth two-tone gradients with a random colored square.
"""
import struct
import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits


def write_idx(path, images):
    n, r, c = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">BBBB", 0, 0, 0x08, 3))
        f.write(struct.pack(">III", n, r, c))
        f.write(images.astype(np.uint8).tobytes())


def digits():
    d = load_digits().images  # (1797, 8, 8), 0..16
    out = np.zeros((d.shape[0], 28, 28), dtype=np.uint8)
    for i, img in enumerate(d):
        z = zoom(img / 16.0, 28 / 8, order=1)[:28, :28]
        out[i] = np.clip(z * 255.0, 0, 255).astype(np.uint8)
    write_idx("digits_28x28.idx", out)


def rgb_corpus(count=512, side=8, seed=7):
    rng = np.random.default_rng(seed)
    imgs = np.zeros((count, 3, side, side), dtype=np.uint8)
    yy, xx = np.mgrid[0:side, 0:side] / (side - 1)
    for i in range(count):
        c0 = rng.integers(0, 256, 3)
        c1 = rng.integers(0, 256, 3)
        ang = rng.uniform(0, 2 * np.pi)
        t = (np.cos(ang) * xx + np.sin(ang) * yy + 1) / 2
        img = c0[:, None, None] * (1 - t) + c1[:, None, None] * t
        if rng.random() < 0.7:
            w = int(rng.integers(2, side // 2 + 1))
            y0 = int(rng.integers(0, side - w))
            x0 = int(rng.integers(0, side - w))
            img[:, y0:y0 + w, x0:x0 + w] = rng.integers(0, 256, 3)[:, None, None]
        imgs[i] = np.clip(img, 0, 255).astype(np.uint8)
    with open("rgb8.raw", "wb") as f:
        f.write(imgs.tobytes())


if __name__ == "__main__":
    digits()
    rgb_corpus()
    print("fixtures written")
