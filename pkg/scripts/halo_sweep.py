#!/usr/bin/env python3
"""Halo-function sweep for the two-edge interval basis.

Estimates the halo ratio over a dyadic h ladder, reports the growth-model
band Phi(h)/(h(1+ln h)) and checks strict monotonicity of Phi(h)/h.
"""

import sys

from gridhalo.cli import main

if __name__ == "__main__":
    args = [
        "halo",
        "--grid", "10",
        "--h-list", "4,8,16,32,64,128,256",
        "--t-list", "inf",
        "--r-list", "1",
        "--mode", "double",
        "--out", "out/halo",
    ]
    sys.exit(main(args + sys.argv[1:]))
