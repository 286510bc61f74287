#!/usr/bin/env python3
"""Independent float64 reference for the bicubic degradation baseline.

Implements cubic-convolution resampling (a = -0.5, half-pixel centers,
edge replication, antialias on downscale), BT.601 studio-swing YCbCr,
PSNR/SSIM/MS-SSIM, and the evaluation protocol (modcrop, degrade, shave)
in plain numpy. Used to freeze the expected baseline values asserted by
the Rust acceptance tests; it shares no code with the Rust crate.

Usage: python3 tools/oracle_baseline.py [eval_dir]
"""
import os
import sys

import numpy as np
from PIL import Image


def cubic(x):
    x = np.abs(x)
    a = -0.5
    return np.where(
        x <= 1,
        (a + 2) * x**3 - (a + 3) * x**2 + 1,
        np.where(x < 2, a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a, 0.0),
    )


def resize_taps(n_in, n_out, scale, antialias):
    kscale = scale if (antialias and scale < 1) else 1.0
    width = 4.0 / kscale
    taps = int(np.ceil(width)) + 2
    out = np.arange(n_out, dtype=np.float64)
    u = (out + 0.5) / scale - 0.5
    left = np.floor(u - width / 2).astype(np.int64)
    idx = left[:, None] + np.arange(taps)[None, :]
    w = cubic((u[:, None] - idx) * kscale)
    w = w / w.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, n_in - 1)
    return idx, w


def resize_axis(img, n_out, scale, antialias, axis):
    idx, w = resize_taps(img.shape[axis], n_out, scale, antialias)
    moved = np.moveaxis(img, axis, 0)
    res = np.zeros((n_out,) + moved.shape[1:], dtype=np.float64)
    for o in range(n_out):
        res[o] = np.tensordot(w[o], moved[idx[o]], axes=([0], [0]))
    return np.moveaxis(res, 0, axis)


def resize(img, scale, antialias):
    h, w = img.shape[:2]
    oh, ow = int(round(h * scale)), int(round(w * scale))
    tmp = resize_axis(img, oh, scale, antialias, 0)
    return resize_axis(tmp, ow, scale, antialias, 1)


def modcrop(img, s):
    h, w = img.shape[:2]
    return img[: h - h % s, : w - w % s]


def degrade(img, s):
    lo = resize(img, 1.0 / s, antialias=True)
    return resize(lo, float(s), antialias=False)


def rgb_to_ycbcr(img):
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    y = (16 + 65.481 * r + 128.553 * g + 24.966 * b) / 255
    cb = (128 - 37.797 * r - 74.203 * g + 112.0 * b) / 255
    cr = (128 + 112.0 * r - 93.786 * g - 18.214 * b) / 255
    return np.stack([y, cb, cr], axis=-1)


def shave(img, px):
    return img[px:-px, px:-px] if px > 0 else img


def psnr(a, b):
    mse = np.mean((255.0 * (a - b)) ** 2)
    return 10 * np.log10(255.0**2 / mse)


def gaussian_window(size=11, sigma=1.5):
    k = np.arange(size) - (size - 1) / 2
    g = np.exp(-(k**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def filter2_valid(img, win):
    kh, kw = win.shape
    h, w = img.shape
    out = np.zeros((h - kh + 1, w - kw + 1))
    for i in range(kh):
        for j in range(kw):
            out += win[i, j] * img[i : i + h - kh + 1, j : j + w - kw + 1]
    return out


def ssim_maps(a, b):
    a = a * 255.0
    b = b * 255.0
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    win = gaussian_window()
    mu1, mu2 = filter2_valid(a, win), filter2_valid(b, win)
    s11 = filter2_valid(a * a, win) - mu1 * mu1
    s22 = filter2_valid(b * b, win) - mu2 * mu2
    s12 = filter2_valid(a * b, win) - mu1 * mu2
    lum = (2 * mu1 * mu2 + c1) / (mu1**2 + mu2**2 + c1)
    cs = (2 * s12 + c2) / (s11 + s22 + c2)
    return lum * cs, cs


def ssim(a, b):
    return ssim_maps(a, b)[0].mean()


def downsample2(img):
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    img = img[:h, :w]
    return (img[0::2, 0::2] + img[0::2, 1::2] + img[1::2, 0::2] + img[1::2, 1::2]) / 4


def msssim(a, b, weights=(0.0448, 0.2856, 0.3001, 0.2363, 0.1333)):
    levels = len(weights)
    vals = []
    for lvl in range(levels):
        smap, csmap = ssim_maps(a, b)
        vals.append(smap.mean() if lvl == levels - 1 else csmap.mean())
        if lvl != levels - 1:
            a, b = downsample2(a), downsample2(b)
    out = 1.0
    for v, w in zip(vals, weights):
        out *= max(v, 0.0) ** w
    return out


def main():
    eval_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "testdata", "eval")
    names = sorted(f for f in os.listdir(eval_dir) if f.endswith(".png"))
    print(f"dataset: {eval_dir} ({len(names)} images)")
    for scale in (2, 3, 4):
        rows = {"y_psnr": [], "y_ssim": [], "y_msssim": [], "cb_psnr": [],
                "cr_psnr": [], "rgb_psnr": []}
        for name in names:
            img = np.asarray(Image.open(os.path.join(eval_dir, name)),
                             dtype=np.float64) / 255.0
            hr = modcrop(img, scale)
            sr = degrade(hr, scale)
            hr_s, sr_s = shave(hr, scale), shave(sr, scale)
            hy, sy = rgb_to_ycbcr(hr_s), rgb_to_ycbcr(sr_s)
            rows["y_psnr"].append(psnr(hy[..., 0], sy[..., 0]))
            rows["y_ssim"].append(ssim(hy[..., 0], sy[..., 0]))
            rows["y_msssim"].append(msssim(hy[..., 0], sy[..., 0]))
            rows["cb_psnr"].append(psnr(hy[..., 1], sy[..., 1]))
            rows["cr_psnr"].append(psnr(hy[..., 2], sy[..., 2]))
            rows["rgb_psnr"].append(psnr(hr_s, sr_s))
        print(f"scale {scale}:")
        for k, v in rows.items():
            per = " ".join(f"{x:.4f}" for x in v)
            print(f"  {k:9s} avg {np.mean(v):.6f}  [{per}]")


if __name__ == "__main__":
    main()
