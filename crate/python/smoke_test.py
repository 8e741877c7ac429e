"""Smoke test for the pyeigengeo extension.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`
or `pip install` the wheel from `maturin build -m crates/python/Cargo.toml`.
"""

import math

import pyeigengeo as eg


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    g_lambda, g_u = eg.metric_spectral([2.0, 1.0])
    assert g_lambda == [0.125, 0.5] and g_u == [0.5]
    assert close(eg.statistical_curvature([2.0, 1.0]), 10.0)
    assert eg.loss_first_order([2.0, 1.0]) == [[0.125, -0.5], [-0.5, 2.0]]
    _, pd = eg.info_carried_by_l([1.0, 0.99], 10)
    assert not pd

    s = eg.SpdMatrix([[7.0, 1.5], [1.5, 3.0]])
    assert s.dim == 2
    lam, gamma = s.spectral()
    assert close(sum(lam), 10.0)
    assert eg.lbar(eg.SpdMatrix.diagonal([4.0, 2.0]), 2) == [2.0, 1.0]
    assert eg.lambda_hat(s, 10, [[1.0, 0.0], [0.0, 1.0]]) == [0.7, 0.3]
    star = eg.lambda_star(s, 10, ensemble="equidistant:50")
    assert close(sum(star), 1.0, 1e-10)
    assert eg.kl_divergence(s, s) < 1e-12

    assert eg.full_lrt_stat(s, 10) <= 0.0
    stat = eg.eigen_lrt_stat(lam, 10, ensemble="equidistant:100")
    assert stat <= 0.0 and math.isfinite(stat)

    try:
        eg.metric_spectral([1.0, 1.0])
    except ValueError as e:
        assert "too close" in str(e)
    else:
        raise AssertionError("degenerate spectrum accepted")

    csv = eg.run_experiment("fig4", 200, seed=7)
    rows = [line for line in csv.splitlines() if not line.startswith("#")]
    assert len(rows) == 51
    assert csv == eg.run_experiment("fig4", 200, seed=7)
    print("pyeigengeo", eg.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
