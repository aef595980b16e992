"""Imitation from preference feedback on a small chain MDP with a noisy expert.

Usage: python3 demos/il_chain.py [episodes]
"""

import sys

import numpy as np

from activepref.aurorae import run_il


def main(T=8000):
    res = run_il({"T": T, "seed": 0})
    s = res.summary
    print(f"expert V(x0) = {s['expert_value_x0']:.4f}")
    print(f"learner V(x0) = {s['final_policy_value_x0']:.4f}")
    print(f"cumulative advantage {s['adv_T']:.1f}, IL regret {s['il_regret']:.1f}")
    print(f"queries per step: {s['per_step_queries']}")
    greedy = np.argmax(res.extra["model"].q, axis=2)
    print("final greedy actions per (step, state):")
    print(np.argmax(res.extra["final_policy"], axis=2))
    print("expert Q greedy actions:")
    print(greedy)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 8000)
