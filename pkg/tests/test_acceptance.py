"""Acceptance suite: one printed PASS/FAIL line per criterion.

Runs in a few minutes on one core. Invoke with ``pytest tests/test_acceptance.py -v``
or directly with ``python tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest

from activepref.aurorae import run_il, single_step_problem, steps_csv
from activepref.funcspace import FunctionClass, eluder_dimension, eluder_dimension_values
from activepref.harness import run_cb, sweep
from activepref.links import LOGISTIC, SQUARE, sample_feedback
from activepref.oracle import OracleState, oracle_regret, upsilon_bound
from eluder_reference import reference_eluder

GAP_INSTANCE = {"num_contexts": 5, "num_actions": 4, "class_size": 16, "gap": 0.25}
HARD_INVARIANTS = ("width_domination", "gap_implies_width", "igw_inequality",
                   "igw_feasibility", "lambda_monotone")


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def invariant_runs():
    start = time.perf_counter()
    runs = [run_cb({"T": 5000, "seed": seed, "link": "square", "delta": 0.05,
                    "check_invariants": True, "instance": GAP_INSTANCE}).summary
            for seed in range(20)]
    return runs, time.perf_counter() - start


def test_criterion_1_invariant_suite(invariant_runs, report):
    runs, elapsed = invariant_runs
    totals = {k: sum(r["invariants"][k] for r in runs) for k in HARD_INVARIANTS}
    checked = sum(r["invariants"]["feasibility_checked"] for r in runs)
    ok = all(v == 0 for v in totals.values()) and elapsed <= 120
    detail = (f"violations {totals} over 20 runs of 5000 rounds; "
              f"{checked} rounds had gamma >= 2A; {elapsed:.1f} s")
    assert report(1, ok, detail)


def test_criterion_2_realizability(invariant_runs, report):
    runs, _ = invariant_runs
    held = sum(r["realizability_held"] for r in runs)
    assert report(2, held >= 19, f"truth stayed in every version space in {held}/20 runs")


def test_criterion_3_query_plateau(report):
    start = time.perf_counter()
    res = sweep({"T_grid": [20000, 40000], "seeds": list(range(10)), "instance_seed": 0,
                 "instance": GAP_INSTANCE})
    agg = res.summary["aggregate"]
    q20, q40 = agg[20000]["median_cum_queries"], agg[40000]["median_cum_queries"]
    r20, r40 = agg[20000]["median_cum_regret"], agg[40000]["median_cum_regret"]
    ok = (q40 - q20 <= 0.10 * q20) and (r40 <= 1.25 * r20)
    detail = (f"median queries {q20:.0f} -> {q40:.0f} (+{(q40 - q20) / q20:.1%}), "
              f"median regret {r20:.1f} -> {r40:.1f} (x{r40 / r20:.2f}); "
              f"{time.perf_counter() - start:.0f} s")
    assert report(3, ok, detail)


def test_criterion_4_zero_gap_scaling(report):
    start = time.perf_counter()
    res = sweep({"T_grid": [5000, 20000], "seeds": list(range(5)), "instance_seed": 0,
                 "instance": {**GAP_INSTANCE, "tie_contexts": 2}})
    agg = res.summary["aggregate"]
    ratio = agg[20000]["median_cum_regret"] / agg[5000]["median_cum_regret"]
    q = agg[5000]["median_cum_queries"]
    ok = ratio <= 2.6 and q >= 0.9 * 5000
    detail = (f"median regret ratio R(20000)/R(5000) = {ratio:.2f}, "
              f"median queries at T=5000 = {q:.0f}; {time.perf_counter() - start:.0f} s")
    assert report(4, ok, detail)


def _oracle_stream(seed, link, size=16, rounds=2000):
    rng = np.random.default_rng(seed)
    fc = FunctionClass(list(rng.random((size, 3, 4))))
    truth = fc[int(rng.integers(size))]
    o = OracleState(fc, link)
    for _ in range(rounds):
        z = (int(rng.integers(3)), int(rng.integers(4)), int(rng.integers(4)))
        o.update(z, sample_feedback(rng, link, truth(*z)))
    return oracle_regret(o)


def test_criterion_5_oracle_regret(report):
    worst = {}
    ok = True
    for link in (SQUARE, LOGISTIC):
        regrets = [_oracle_stream(seed, link) for seed in range(50)]
        bound = upsilon_bound(16, link)
        worst[link.name] = (max(regrets), bound)
        ok &= max(regrets) <= bound
    detail = ", ".join(f"{k}: worst {r:.3f} <= bound {b:.3f}" for k, (r, b) in worst.items())
    assert report(5, ok, detail + " over 50 streams of 2000 rounds")


def test_criterion_6_eluder_equivalence(report):
    rng = np.random.default_rng(2024)
    mismatches, checked, nonzero = 0, 0, 0
    for i in range(100):
        size = int(rng.integers(1, 6))
        if i % 4 == 0:
            # a genuine class over the 1 x 2 x 2 domain
            fc = FunctionClass(list(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=(size, 1, 2))))
            values = np.array([[m(0, a, b) for a in range(2) for b in range(2)] for m in fc])
            compute = lambda eps, fc=fc: eluder_dimension(fc, eps)
        else:
            points = int(rng.integers(1, 7))
            if i % 2:
                values = rng.choice(np.linspace(-1, 1, 9), size=(size, points))
            else:
                values = rng.uniform(-1, 1, size=(size, points))
            compute = lambda eps, v=values: eluder_dimension_values(v, eps)
        for eps in (0.1, 0.3, 0.5):
            got, ref = compute(eps), reference_eluder(values, eps)
            mismatches += got != ref
            nonzero += ref > 0
            checked += 1
    detail = f"{checked - mismatches}/{checked} exact matches ({nonzero} with dimension > 0)"
    assert report(6, mismatches == 0, detail)


def test_criterion_7_il_beats_suboptimal_expert(report):
    start = time.perf_counter()
    res = run_il({"T": 8000, "seed": 0,
                  "mdp": {"num_states": 6, "num_actions": 3, "horizon": 4,
                          "greedy_prob": 0.7}})
    elapsed = time.perf_counter() - start
    s = res.summary
    model, final = res.extra["model"], res.extra["final_policy"]
    greedy = np.argmax(model.q, axis=2)
    unqueried = final.max(axis=2) == 1.0
    agree = bool(np.all(np.argmax(final, axis=2)[unqueried] == greedy[unqueried]))
    ok = (s["final_policy_value_x0"] > s["expert_value_x0"] and s["adv_T"] > 0 and agree
          and int(unqueried.sum()) > 0 and elapsed <= 300)
    detail = (f"V_final(x0) = {s['final_policy_value_x0']:.4f} vs V_expert(x0) = "
              f"{s['expert_value_x0']:.4f}, Adv_T = {s['adv_T']:.1f}, "
              f"{int(unqueried.sum())} unqueried (h, x) all greedy = {agree}; {elapsed:.0f} s")
    assert report(7, ok, detail)


def test_criterion_8_il_reduces_to_cb(report):
    fields_cb = ("Z_t", "lambda_t", "w_t", "a_t", "b_t", "oracle_cum_loss",
                 "version_space_size", "cum_queries")
    mismatched = 0
    rows = 0
    for seed in range(3):
        cfg = {"T": 2000, "seed": seed, "check_invariants": True}
        cb = run_cb(cfg)
        inst = cb.extra["instance"]
        il = run_il(cfg, single_step_problem(inst), ([inst.fclass], [inst.truth_index]))
        for rec, step, ep in zip(cb.records, il.extra["steps"], il.records):
            left = tuple(getattr(rec, f) for f in fields_cb) + (cb.extra["contexts"][rec.t - 1],)
            right = (step.Z, step.lam, step.w, step.a, step.b, step.oracle_cum_loss,
                     step.version_space_size, ep.cum_queries, step.x)
            mismatched += left != right
            rows += 1
        mismatched += len(cb.records) != len(il.records)
    assert report(8, mismatched == 0 and rows == 6000,
                  f"{rows - mismatched}/{rows} rounds identical across 3 seeds")


def test_criterion_9_determinism(report):
    cb = [run_cb({"T": 3000, "seed": 11, "check_invariants": True}).csv() for _ in range(2)]
    il_runs = [run_il({"T": 300, "seed": 11}) for _ in range(2)]
    il = [r.csv() + steps_csv(r) for r in il_runs]
    ok = cb[0].encode() == cb[1].encode() and il[0].encode() == il[1].encode()
    assert report(9, ok, "repeated run-cb and run-il produce byte-identical CSVs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
