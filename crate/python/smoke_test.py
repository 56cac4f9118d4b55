"""Smoke test for the rateprivacy Python bindings.

Build and install the extension first, e.g. `pip install ./crates/py`.
"""

import math
import random
import tempfile
from pathlib import Path

import rateprivacy as rp


def check_estimators():
    rng = random.Random(1)
    t, times = 0.0, []
    for _ in range(20000):
        t += rng.expovariate(0.2)
        times.append(t)
    lam = rp.estimate_interarrival(times)
    assert abs(lam - 0.2) / 0.2 < 0.03, lam
    assert rp.estimate_count([1.0, 2.0, 3.0], 0.0, 10.0) == 0.3
    assert math.isclose(rp.crlb_variance(0.2, 1000), 4.0e-5)
    assert math.isclose(rp.relative_error(0.25, 0.2), 0.25)
    gaps = [b - a for a, b in zip(times, times[1:])]
    stat, crit, passed = rp.ks_exponential(gaps, 0.2)
    assert passed and stat < crit
    assert rp.quartiles([1.0, 2.0, 3.0, 4.0, 5.0]) == (2.0, 3.0, 4.0, 2.0)
    try:
        rp.estimate_interarrival([2.0, 1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("unsorted arrivals accepted")


def check_scenario():
    sc = rp.Scenario("[source]\ninterarrival_s = 5\n[run]\nduration_s = 900\n", ["buffer_q=10"])
    assert sc.lambda_per_s == 0.2 and sc.buffer_q == 10
    assert sc.with_override("discipline=fifo").discipline == "fifo"
    try:
        rp.Scenario(overrides=["buffer_q=0"])
    except rp.ConfigError as e:
        assert "buffer_q" in str(e)
    else:
        raise AssertionError("buffer_q=0 accepted")

    res = rp.run(sc)
    assert res.conservation_ok
    assert res.generated == res.delivered + res.resident + res.dropped
    assert len(res.observations) > 100 and res.lambda_hat > 0
    assert res.estimates[-1][0] <= 900.0
    with tempfile.TemporaryDirectory() as d:
        written = res.write_reports(Path(d))
        assert sorted(p.name for p in written) == ["arrivals.csv", "estimates.csv", "summary.json"]
    print(f"run: lambda_hat={res.lambda_hat:.4f} rel_error={res.relative_error:.4f} "
          f"latency={res.mean_latency_s:.1f}s")


def check_sweep_and_compare():
    sc = rp.Scenario(overrides=["duration_s=900"])
    table = rp.sweep(sc, "buffer_q", ["5", "20"], reps=4)
    assert len(table) == 8 and table.param == "buffer_q"
    rows = table.rows()
    assert [r["rep"] for r in rows] == [0, 1, 2, 3] * 2
    lat = {s["value"]: s["mean_latency_s"]["mean"] for s in table.summaries()}
    assert lat["20"] > lat["5"]
    assert table.to_csv().startswith("param,")

    rows = rp.compare(sc, ["fifo", "random-shuffle"], reps=3)
    assert rows[0][1] == rows[1][1], rows
    try:
        rp.sweep(sc, "color", ["1"])
    except rp.ConfigError:
        pass
    else:
        raise AssertionError("unknown sweep parameter accepted")
    print("sweep:", {k: round(v, 1) for k, v in lat.items()})


if __name__ == "__main__":
    check_estimators()
    check_scenario()
    check_sweep_and_compare()
    print("smoke test ok")
