"""Smoke test for the cchannels extension module.

Build and install first:  pip install maturin && maturin develop --release
(run from crates/python), then:  python python/smoke_test.py
"""

import json
import math
import os

import cchannels

HERE = os.path.dirname(os.path.abspath(__file__))
SCENARIOS = os.path.join(HERE, "..", "..", "cli", "scenarios")


def constant_box():
    n = 801
    c = 0.5
    pot = [[[0.0, c], [c, 0.0]] for _ in range(n)]
    return cchannels.Scenario(0.0, math.pi, [0.0, 0.0], pot, "bound-box")


def main():
    s = constant_box()
    assert s.validate() == []
    states = s.bound_states(0.0, 5.0)
    energies = [st.energy for st in states]
    for e, want in zip(energies, [0.5, 1.5, 3.5, 4.5]):
        assert abs(e - want) < 1e-5, energies
    print("constant-coupling box:", ["%.8f" % e for e in energies])

    shifted = s.with_diagonal_shift(2.0).bound_states(2.0, 7.0)
    assert all(abs(b.energy - a.energy - 2.0) < 1e-9 for a, b in zip(states, shifted))

    # lowest mode has opposite-sign components: every coupling term is inverted
    ground = states[0]
    codes = dict(s.classify(ground))
    assert set(codes[(0, 1)]) <= {"A", "U"}, set(codes[(0, 1)])
    intervals = s.inversion_intervals(ground)
    print("inversion intervals:", [(a, b, round(x0, 4), round(x1, 4)) for a, b, x0, x1 in intervals])
    assert intervals

    assert cchannels.classify_term(1.0, 0.3, 0.6) == "R"
    assert cchannels.classify_term(1.0, 0.3, -0.6) == "A"
    assert cchannels.classify_term(1.0, 0.3, 0.0) == "N"

    sc = cchannels.Scenario.from_file(os.path.join(SCENARIOS, "gaussian_pair_scatter.json"))
    r = sc.scatter(1.5)
    flux = [sum(col) for col in zip(*(r.reflection + r.transmission))]
    print("scattering at E=1.5: flux per incident channel", flux, "defect", r.unitarity_defect)
    assert r.unitarity_defect < 1e-6

    try:
        sc.scatter(1.0)
    except RuntimeError as err:
        assert "threshold" in str(err)
    else:
        raise AssertionError("threshold energy accepted")

    spec = json.dumps({"form": "bilinear", "strength": 0.2})
    e2d = cchannels.solve_2d_eigen(spec, (0.0, math.pi, 61), (0.0, math.pi, 61), 1)[0]
    recipe = json.dumps({
        "basis": {"kind": "box", "xi_min": 0.0, "xi_max": math.pi, "n_functions": 4},
        "spec": json.loads(spec),
        "n_xi": 801,
    })
    rows, monotone = cchannels.convergence_study(recipe, (0.0, math.pi, 801), [1, 2, 4])
    print("convergence:", rows, "monotone", monotone, "2D", e2d)
    assert monotone and abs(rows[-1][1] - e2d) / e2d < 1e-2
    print("smoke test passed")


if __name__ == "__main__":
    main()
