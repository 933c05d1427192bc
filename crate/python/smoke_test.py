"""Quick end-to-end check of the Python bindings.

Build first with `pip install --no-build-isolation -e crates/py`.
"""

from pathlib import Path
import cmath

import netident

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    tf = netident.TransferFunction([0.6], [1.0, -0.4], 1)
    assert abs(tf.response(1e-9) - 1.0) < 1e-6
    assert abs(tf.response(cmath.pi) - (-0.6 / 1.4)) < 1e-12
    assert tf.filter([1.0, 0.0, 0.0]) == [0.0, 0.6, 0.6 * 0.4]

    net = netident.load(str(CONFIGS / "example2.cfg"))
    sel = netident.analyze(net, 1, 2)
    assert sel["B"] == [8], sel
    assert sel["passed"]
    assert not netident.analyze(net, 1, 2, blocking=[6])["passed"]

    net = netident.load(str(CONFIGS / "example1.cfg"))
    blocks = netident.check_spectra(net, 2, 1, grid_size=64)
    assert all(v < 1e-8 for v in blocks.values()), blocks

    data = netident.simulate(net, 3000, seed=7)
    assert len(data) == 3000
    est = netident.estimate(net, data, 2, 1, starts=2, seed=7)
    g = est.module(2, 1)
    truth = net.module(2, 1)
    err = max(abs(g.response(w) - truth.response(w)) for w in (0.01, 0.3, 1.0, 3.0))
    assert err < 0.2, err
    print(f"{net}: G[2,1] estimate {g}, max error {err:.3f}")

    try:
        netident.analyze(net, 1, 4)
    except ValueError as e:
        print(f"absent target refused: {e}")
    else:
        raise AssertionError("absent target accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
