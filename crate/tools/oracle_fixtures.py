#!/usr/bin/env python3
"""Prints float64 fixture values frozen into the Rust unit tests.

Shares the resampling/metric code with oracle_baseline.py and uses a
64-bit LCG for test patterns so the same inputs can be regenerated
exactly from Rust.

Usage: python3 tools/oracle_fixtures.py
"""
import numpy as np

from oracle_baseline import resize, ssim, msssim, psnr

MASK = (1 << 64) - 1


def lcg_stream(seed, n):
    state = seed & MASK
    out = []
    for _ in range(n):
        state = (state * 6364136223846793005 + 1442695040888963407) & MASK
        out.append((state >> 11) / float(1 << 53))
    return np.array(out)


def dump(name, arr):
    flat = ", ".join(f"{v:.17e}" for v in np.asarray(arr).ravel())
    print(f"{name} (shape {np.asarray(arr).shape}):\n[{flat}]\n")


def main():
    src = lcg_stream(42, 8 * 6).reshape(8, 6)
    dump("src_8x6_seed42", src)
    dump("resize_up_x2", resize(src, 2.0, antialias=False))
    dump("resize_down_half_aa", resize(src, 0.5, antialias=True))
    dump("resize_up_x1_5", resize(src, 1.5, antialias=False))

    a = lcg_stream(7, 48 * 40).reshape(48, 40)
    b = np.clip(0.75 * a + 0.1 + 0.08 * lcg_stream(9, 48 * 40).reshape(48, 40), 0, 1)
    print(f"ssim_48x40 = {ssim(a, b):.15f}")
    print(f"psnr_48x40 = {psnr(a, b):.15f}")

    am = lcg_stream(11, 200 * 184).reshape(200, 184)
    bm = np.clip(am + 0.05 * (lcg_stream(13, 200 * 184).reshape(200, 184) - 0.5), 0, 1)
    print(f"msssim_200x184 = {msssim(am, bm):.15f}")
    print(f"ssim_200x184   = {ssim(am, bm):.15f}")


if __name__ == "__main__":
    main()
