"""Smoke test for the kerrblockade extension module.

Build and install first, e.g.
    pip install --no-build-isolation -e crates/python
then run
    python python/smoke_test.py
"""

import math

import kerrblockade as kb


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    u = kb.kerr_strength(1.215e15, 1e-20, chi3=0.45e-18, eps_r=12.1)
    assert close(u, 4.4e6, 0.15), u

    p = kb.BlockadeParams(4.4e6, complex(2.0, 0.0), 1.934e8)
    assert close(p.lambda_nl.real, 1.76e7, 1e-12)
    assert close(p.delta, -7.04e7, 1e-12)

    lnl, alpha = kb.alpha_from_drive(abs(p.lambda1), 4.4e6, 1.934e8)
    assert close(alpha, 2.0, 1e-9), alpha

    p1 = kb.one_photon_power(complex(7.3537e10, 0.0), 1.215e15, 1.934e8)
    assert close(p1, 3.57e-6, 0.02), p1

    for state, want in [
        (kb.QuantumState.coherent(1.5, 40), 1.0),
        (kb.QuantumState.fock(1, 10), 0.0),
        (kb.QuantumState.thermal(0.5, 60), 2.0),
    ]:
        assert abs(state.g2() - want) < 1e-3, (state.g2(), want)

    _, _, w = kb.QuantumState.vacuum(10).wigner(points=41)
    peak = max(max(row) for row in w)
    assert close(peak, 2.0 / math.pi, 0.01), peak

    run = kb.run_protocol(p, hold="fixed", hold_s=1.0 / 1.934e8, samples=50)
    assert run["g2_one_lifetime"] < 1e-3, run["g2_one_lifetime"]
    assert len(run["t_s"]) == len(run["p1"]) > 0

    opt = kb.optimize_initialization(kb.BlockadeParams.linear_cavity(2.0, 1.934e8))
    assert opt["loss"] < 1e-3, opt

    print("kerrblockade smoke test passed")


if __name__ == "__main__":
    main()
