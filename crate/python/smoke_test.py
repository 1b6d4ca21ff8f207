"""Smoke test for the `pawl` extension module.

Build first, e.g.

    cargo build --release -p pawl-python --features extension-module
    cp target/release/libpawl.so python/pawl.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pawl  # noqa: E402


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    m = pawl.GaussianMixture.bimodal()
    assert close(m.log_density(15.0), math.log(0.5) - 0.5 * math.log(2 * math.pi), 1e-12)
    assert m.log_density(-7.5) == m.log_density(7.5)
    assert close(m.tempered_log_density(15.0, 10.0), m.log_density(15.0) / 10.0, 1e-15)
    assert close(m.log_partition(1.0), 0.0, 1e-9)

    ladder = pawl.TemperatureLadder.arithmetic(10.0, 10)
    assert ladder.temps == [float(t) for t in range(1, 11)]
    assert ladder.neighbors(0) == [1]
    two = pawl.TemperatureLadder([1.0, 10.0])
    split, mapping = two.maybe_split([(20, 180), (100, 100)])
    assert split.temps == [1.0, 5.5, 10.0] and mapping == [0, 2]

    assert pawl.StepSchedule.deterministic(1).step_size(4) == 0.25
    assert pawl.StepSchedule.wang_landau(0.1).step_size(10, 3) == 0.125
    assert pawl.flat_histogram_met([50, 50], 0.1)
    assert not pawl.flat_histogram_met([60, 40], 0.1)

    b = pawl.BiasState(2)
    b.update([1, 0], 1.0)
    assert close(b.weights[0], 1.0 / (1.0 + math.exp(-1.0)), 1e-12)
    assert pawl.rmse([1.0, -1.0]) == 1.0

    trace, summary = pawl.run("[engine]\niterations = 2000\nparticles = 4\nseed = 3\n")
    assert len(trace) == 2000 * 4
    assert close(sum(summary.occupation), 1.0, 1e-12)
    assert math.isfinite(summary.posterior_mean())
    assert trace.to_csv().startswith("t,particle,x,rung,acc_x,acc_rung,sigma,gamma,fh_events\n")

    again, _ = pawl.run("[engine]\niterations = 2000\nparticles = 4\nseed = 3\n")
    assert again.to_csv() == trace.to_csv()

    s = pawl.Sampler("[engine]\niterations = 100\nparticles = 2\n")
    s.sweep()
    assert s.t == 1 and len(s.particles()) == 2
    assert s.finish().fh_events >= 0

    try:
        pawl.run("[engine]\nbogus = 1\n")
    except ValueError as e:
        assert "bogus" in str(e)
    else:
        raise AssertionError("unknown config key accepted")

    print("pawl smoke test ok:", summary.posterior_mean(), summary.accept_x)


if __name__ == "__main__":
    main()
