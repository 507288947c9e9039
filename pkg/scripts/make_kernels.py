#!/usr/bin/env python3
"""Write the standard kernel and mask files the CLI examples use.

Produces, under the output directory (default ./assets):
  gauss5_std10.txt   5x5 Gaussian blur taps, std 10, normalized to sum 1
  bicubic_x2.txt     bicubic (a = -0.5) anti-aliasing taps for scale 2
  bicubic_x4.txt     same for scale 4
  mask_half_<H>x<W>.txt   seeded random mask keeping ~50% of pixels
"""

import argparse
from pathlib import Path

import numpy as np

from pgrestore.io import write_kernel, write_mask
from pgrestore.kernels import bicubic_kernel, gaussian_kernel


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="assets", help="output directory")
    parser.add_argument("--mask-size", type=int, nargs=2, default=(32, 32),
                        metavar=("H", "W"))
    parser.add_argument("--mask-density", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_kernel(out / "gauss5_std10.txt", gaussian_kernel(5, 10.0))
    write_kernel(out / "bicubic_x2.txt", bicubic_kernel(2))
    write_kernel(out / "bicubic_x4.txt", bicubic_kernel(4))
    h, w = args.mask_size
    mask = np.random.default_rng(args.seed).random((h, w)) < args.mask_density
    write_mask(out / f"mask_half_{h}x{w}.txt", mask)
    print(f"wrote kernels and mask to {out}/")


if __name__ == "__main__":
    main()
