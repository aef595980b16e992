"""Compare query growth on a positive-gap instance and on one with tied contexts.

In both cases the query count flattens once every decoy is refuted and the
version space holds only the truth. Ties cost no regret on their own, because
tied arms are equally good under the truth.

Usage: python3 demos/gap_vs_tie_sweep.py
"""

from activepref.harness import sweep

BASE = {"num_contexts": 5, "num_actions": 4, "class_size": 16, "gap": 0.25}


def main():
    for label, instance in (("gap 0.25", BASE), ("two tied contexts", {**BASE, "tie_contexts": 2})):
        res = sweep({"T_grid": [10000, 20000, 40000], "seeds": [0, 1, 2], "instance_seed": 0,
                     "instance": instance}, workers=3)
        print(label)
        for T, row in res.summary["aggregate"].items():
            print(f"  T={T:>6}: median queries {row['median_cum_queries']:>8.0f}, "
                  f"median regret {row['median_cum_regret']:>8.1f}")


if __name__ == "__main__":
    main()
