"""Quick check that the extension module loads and its main entry points work."""

import math

import umbilic_py as u


def main():
    s = u.Surface.builtin("cubic_x1", 6)
    assert s.n == 6 and s.name == "cubic_x1", repr(s)
    assert s.umbilical_data() == ("6", "x1^3")
    assert max(abs(r) for r in s.rho_residuals([0.1, -0.2, 0.05, 0.0, 0.3, 0.1])) < 1e-7

    exp = s.expansion(4)
    assert exp["c0_zero"] and exp["c1_zero"] and exp["c2_matches_C"]
    lhs, rhs = s.integral_identity()
    assert lhs == rhs

    k, verdict = s.integrability()
    assert (k, verdict) == (2, "not_integrable")
    assert u.Surface.builtin("cubic_x1", 5).integrability()[1] == "integrable"

    sphere = u.Surface.builtin("sphere", 4)
    assert abs(sphere.conformal_scalar([0.1, 0.2, 0.3, 0.1])) < 1e-6
    fit = sphere.decay("y", [10.0, 31.6, 100.0, 316.0, 1000.0])
    assert 1.9 <= fit["tau"] <= 2.1, fit["tau"]
    assert abs(sphere.adm_mass("y", "standard_adm", 100.0)) < 1e-4
    g = sphere.ghat_components("y", [20.0, 0.0, 0.0, 0.0])
    assert len(g) == 4 and abs(g[0][0] - 1.0) < 1e-2

    m = u.schwarzschild_mass(0.5, 1000.0)
    assert abs(m - 0.5) < 1e-3
    radii = [10.0, 31.6, 100.0, 316.0, 1000.0]
    e = u.extrapolate_mass(radii, [0.25 + 3.0 * r**-2 for r in radii])
    assert math.isclose(e["m_inf"], 0.25, abs_tol=1e-8)

    rep = u.symbolic_mass_cancellation(6)
    assert rep["s5_cancels"] and rep["s6_cancels"]

    assert u.run_cli(["ctheta", "--builtin", "cubic_x1", "--n", "3", "--out", "/dev/null"]) == 0
    assert u.run_cli(["verify"]) == 2
    print("smoke test passed")


if __name__ == "__main__":
    main()
