"""Exact eluder dimension of a tiny class as the scale epsilon varies.

Usage: python3 demos/eluder_example.py
"""

import numpy as np

from activepref.funcspace import FunctionClass, eluder_dimension


def main():
    # a flat member and "needle" members that each favour one arm
    for height in (0.5, 1.0):
        needles = [height * np.eye(3)[[i]] for i in range(3)]
        fc = FunctionClass([np.zeros((1, 3))] + needles)
        dims = {eps: eluder_dimension(fc, eps) for eps in (0.1, 0.5, 0.9, 1.0)}
        print(f"needle height {height}: " + ", ".join(f"eps {e} -> {d}" for e, d in dims.items()))
    # two near-identical members: no pair is ever distinguishable at scale 0.3
    fc = FunctionClass([np.array([[0.5, 0.5]]), np.array([[0.6, 0.5]])])
    print(f"close pair: eps 0.05 -> {eluder_dimension(fc, 0.05)}, "
          f"eps 0.3 -> {eluder_dimension(fc, 0.3)}")


if __name__ == "__main__":
    main()
