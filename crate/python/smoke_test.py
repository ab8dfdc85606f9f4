"""Smoke test for the nanodimer_py extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`
or `pip install --no-build-isolation crates/py`.
"""

import math

import nanodimer_py as nd


def main():
    p = nd.Params.nanolaser()
    assert abs(p.get("beta") - 0.017) < 1e-15
    assert len(nd.Params.keys()) == 11
    macro = p.with_beta(1.7e-5)
    assert abs(macro.get("beta") * macro.get("n0") - p.get("beta") * p.get("n0")) < 1e-9 * p.get("n0")

    fp = nd.bonding_fixed_point(p, 6.02)
    assert fp is not None and fp["intensity"] > 0
    assert nd.bonding_fixed_point(p, 0.5) is None

    traj = nd.trajectory(p, 6.02, 1000, record_stride=10, seed=1)
    assert len(traj["t"]) == 101
    assert all(-1.0 <= x <= 1.0 for x in traj["x"])
    again = nd.trajectory(p, 6.02, 1000, record_stride=10, seed=1)
    assert traj["I1"] == again["I1"]

    assert abs(nd.g2_zero([1.0, 3.0], [1.0, 3.0]) - 1.25) < 1e-12
    assert abs(nd.cross_from_imbalance(1.0, 0.0, 1.0 / 3.0) - 2.0 / 3.0) < 1e-12
    assert abs(nd.amplitude_from_cross(2.0 / 3.0) - math.sqrt(2.0 / 3.0)) < 1e-12

    scan = nd.bifurcation_scan(p, [6.008, 6.020, 6.036])
    assert scan["label"] == ["B", "cycle", "A"], scan["label"]

    stat = nd.stationary_scan(p, [6.0, 6.04], n_traj=1, transient=0.2, window=1.0)
    assert len(stat["P/P0"]) == 2
    assert all(0.0 <= a <= 1.0 for a in stat["mean_A"])

    try:
        p.set("kapa", 1.0)
    except KeyError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    print("nanodimer_py", nd.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
