"""Run the dueling bandit on a planted-gap instance and watch it stop asking.

Usage: python3 demos/cb_walkthrough.py
"""

from activepref.harness import run_cb


def main():
    res = run_cb({"T": 20000, "seed": 0, "instance_seed": 0, "check_invariants": True,
                  "instance": {"num_contexts": 5, "num_actions": 4, "class_size": 16,
                               "gap": 0.25}})
    s = res.summary
    print(f"beta = {s['beta']:.1f}, gamma = {s['gamma']:.3f}, gap = {s['gap']}")
    print(f"{'round':>6} {'queries':>8} {'regret':>8} {'versions':>9}")
    for rec in res.records:
        if rec.t in (1, 100, 1000, 5000, 10000, 15000, 20000):
            print(f"{rec.t:>6} {rec.cum_queries:>8} {rec.cum_regret:>8.1f} "
                  f"{rec.version_space_size:>9}")
    print(f"truth kept: {s['realizability_held']}; invariant counts: {s['invariants']}")


if __name__ == "__main__":
    main()
