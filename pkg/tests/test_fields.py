"""Field radiation of recovered currents and the error diagnostics."""
import csv

import numpy as np
import pytest

from lovebem.dipole import DipoleSource, field_arrays, sample_measurement
from lovebem.fields import (ErrorCurve, check_love_condition, error_curve,
                            fibonacci_directions, radiate_arrays,
                            radiate_currents, save_error_curve)
from lovebem.formulations import CurrentSolution
from lovebem.mesh import generate_sphere_mesh
from lovebem.operators import ETA0, FrequencyContext
from lovebem.spaces import basis_pair, gram_matrix

CTX = FrequencyContext(3.16e9)


@pytest.fixture(scope="module")
def surface():
    gamma = generate_sphere_mesh(0.04, 0.02)
    return (gamma,) + basis_pair(gamma)


@pytest.fixture(scope="module")
def source():
    return DipoleSource(np.array([0.007, 0.004, -0.005]),
                        np.array([0.2 + 0.1j, -0.3, 1.0]) * 1e-3, CTX)


@pytest.fixture(scope="module")
def traced_pair(surface, source):
    """Analytic surface traces projected onto the coefficient spaces."""
    gamma, rwg, bc = surface
    ef, _ = sample_measurement(source, gamma, rwg)
    _, hg = sample_measurement(source, gamma, bc)
    m = np.linalg.solve(gram_matrix(rwg, rwg).toarray(), ef)
    j = np.linalg.solve(gram_matrix(bc, bc).toarray(), -ETA0 * hg)
    return CurrentSolution(m=m, j=j, wavenumber=CTX.wavenumber,
                           formulation="projected", report=None)


def shell_points(radius, n=50):
    return radius * fibonacci_directions(n)


class TestDirections:
    def test_unit_norm(self):
        dirs = fibonacci_directions(97)
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0,
                                   rtol=0, atol=1e-14)

    def test_deterministic(self):
        assert np.array_equal(fibonacci_directions(64),
                              fibonacci_directions(64))

    def test_nearly_centered(self):
        assert np.linalg.norm(fibonacci_directions(400).mean(axis=0)) < 1e-2

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="direction"):
            fibonacci_directions(0)


class TestRadiation:
    def test_zero_currents_zero_fields(self, surface):
        _, rwg, bc = surface
        sol = CurrentSolution(m=np.zeros(rwg.n_dofs), j=np.zeros(bc.n_dofs),
                              wavenumber=CTX.wavenumber,
                              formulation="projected", report=None)
        e, h = radiate_arrays(sol, rwg, bc, shell_points(0.2))
        assert np.all(e == 0.0) and np.all(h == 0.0)

    def test_linear_in_the_currents(self, surface, traced_pair):
        _, rwg, bc = surface
        pts = shell_points(0.25)
        scaled = CurrentSolution(m=(2.0 - 1j) * traced_pair.m,
                                 j=(2.0 - 1j) * traced_pair.j,
                                 wavenumber=CTX.wavenumber,
                                 formulation="projected", report=None)
        e1, h1 = radiate_arrays(traced_pair, rwg, bc, pts)
        e2, h2 = radiate_arrays(scaled, rwg, bc, pts)
        np.testing.assert_allclose(e2, (2.0 - 1j) * e1, rtol=1e-12)
        np.testing.assert_allclose(h2, (2.0 - 1j) * h1, rtol=1e-12)

    def test_missing_j_equals_zero_j(self, surface, traced_pair):
        _, rwg, bc = surface
        pts = shell_points(0.3, 20)
        without = CurrentSolution(m=traced_pair.m, j=None,
                                  wavenumber=CTX.wavenumber,
                                  formulation="projected", report=None)
        zeroed = CurrentSolution(m=traced_pair.m, j=np.zeros(bc.n_dofs),
                                 wavenumber=CTX.wavenumber,
                                 formulation="projected", report=None)
        e1, h1 = radiate_arrays(without, rwg, bc, pts)
        e2, h2 = radiate_arrays(zeroed, rwg, bc, pts)
        np.testing.assert_allclose(e1, e2, rtol=0, atol=1e-30)
        np.testing.assert_allclose(h1, h2, rtol=0, atol=1e-30)

    def test_rejects_near_surface_points(self, surface, traced_pair):
        _, rwg, bc = surface
        with pytest.raises(ValueError, match="triangle diameter"):
            radiate_arrays(traced_pair, rwg, bc, shell_points(0.041))

    def test_rejects_bad_point_shape(self, surface, traced_pair):
        _, rwg, bc = surface
        with pytest.raises(ValueError, match="shape"):
            radiate_arrays(traced_pair, rwg, bc, np.zeros(3))

    def test_rejects_mismatched_spaces(self, surface, traced_pair):
        gamma, rwg, _ = surface
        other_bc = basis_pair(gamma)[1]
        with pytest.raises(ValueError, match="refined mesh"):
            radiate_arrays(traced_pair, rwg, other_bc, shell_points(0.2))

    def test_sample_list_matches_arrays(self, surface, traced_pair):
        _, rwg, bc = surface
        pts = shell_points(0.2, 7)
        e, h = radiate_arrays(traced_pair, rwg, bc, pts)
        samples = radiate_currents(traced_pair, rwg, bc, pts)
        assert len(samples) == 7
        for i, sample in enumerate(samples):
            assert np.array_equal(sample.point, pts[i])
            assert np.array_equal(sample.E, e[i])
            assert np.array_equal(sample.H, h[i])


class TestAgainstSource:
    def test_traced_pair_reproduces_the_source(self, surface, source,
                                               traced_pair):
        _, rwg, bc = surface
        pts = shell_points(0.04 + 2 * CTX.wavelength)
        e_rec, h_rec = radiate_arrays(traced_pair, rwg, bc, pts)
        e_ref, h_ref = field_arrays(source, pts)
        e_err = np.linalg.norm(e_rec - e_ref) / np.linalg.norm(e_ref)
        h_err = np.linalg.norm(h_rec - h_ref) / np.linalg.norm(h_ref)
        assert 1e-3 < e_err < 5e-2
        assert 1e-3 < h_err < 5e-2

    def test_far_zone_impedance(self, surface, traced_pair):
        _, rwg, bc = surface
        pts = shell_points(20 * CTX.wavelength, 30)
        e, h = radiate_arrays(traced_pair, rwg, bc, pts)
        ratio = (np.linalg.norm(e, axis=1)
                 / (ETA0 * np.linalg.norm(h, axis=1)))
        np.testing.assert_allclose(ratio, 1.0, rtol=1e-2)

    def test_radial_decay(self, surface, traced_pair):
        _, rwg, bc = surface
        r1, r2 = 20 * CTX.wavelength, 40 * CTX.wavelength
        e1, _ = radiate_arrays(traced_pair, rwg, bc, shell_points(r1, 30))
        e2, _ = radiate_arrays(traced_pair, rwg, bc, shell_points(r2, 30))
        scaled1 = r1 * np.linalg.norm(e1, axis=1)
        scaled2 = r2 * np.linalg.norm(e2, axis=1)
        np.testing.assert_allclose(scaled1, scaled2, rtol=1e-2)


class TestLoveCondition:
    def test_traced_pair_is_quiet_inside(self, surface, traced_pair):
        _, rwg, bc = surface
        assert check_love_condition(traced_pair, rwg, bc,
                                    shell_points(0.01)) < 0.1

    def test_dropping_j_breaks_the_condition(self, surface, traced_pair):
        _, rwg, bc = surface
        broken = CurrentSolution(m=traced_pair.m, j=None,
                                 wavenumber=CTX.wavenumber,
                                 formulation="projected", report=None)
        assert check_love_condition(broken, rwg, bc,
                                    shell_points(0.01)) > 0.5

    def test_zero_solution_returns_zero(self, surface):
        _, rwg, bc = surface
        sol = CurrentSolution(m=np.zeros(rwg.n_dofs), j=None,
                              wavenumber=CTX.wavenumber,
                              formulation="projected", report=None)
        assert check_love_condition(sol, rwg, bc, shell_points(0.01)) == 0.0

    def test_scale_invariant(self, surface, traced_pair):
        _, rwg, bc = surface
        pts = shell_points(0.01, 20)
        scaled = CurrentSolution(m=5.0 * traced_pair.m, j=5.0 * traced_pair.j,
                                 wavenumber=CTX.wavenumber,
                                 formulation="projected", report=None)
        first = check_love_condition(traced_pair, rwg, bc, pts)
        second = check_love_condition(scaled, rwg, bc, pts)
        assert first == pytest.approx(second, rel=1e-12)


class TestErrorCurve:
    def test_validation(self):
        with pytest.raises(ValueError, match="matching"):
            ErrorCurve(np.array([1.0, 2.0]), np.array([0.1]), "x")
        with pytest.raises(ValueError, match="increasing"):
            ErrorCurve(np.array([2.0, 1.0]), np.array([0.1, 0.2]), "x")
        with pytest.raises(ValueError, match="nonnegative"):
            ErrorCurve(np.array([1.0, 2.0]), np.array([0.1, -0.2]), "x")

    def test_rejects_frequency_mismatch(self, surface, traced_pair):
        _, rwg, bc = surface
        detuned = DipoleSource(np.zeros(3), np.array([0, 0, 1e-3]),
                               FrequencyContext(1e9))
        with pytest.raises(ValueError, match="frequency"):
            error_curve(traced_pair, detuned, rwg, bc, [1.0, 2.0])

    def test_levels_and_tag(self, surface, source, traced_pair):
        _, rwg, bc = surface
        curve = error_curve(traced_pair, source, rwg, bc, [1.0, 2.0],
                            n_points=50)
        assert curve.formulation == "projected"
        assert np.all(curve.errors < 5e-2)
        assert np.all(curve.errors > 1e-3)

    def test_deterministic(self, surface, source, traced_pair):
        _, rwg, bc = surface
        first = error_curve(traced_pair, source, rwg, bc, [1.5], n_points=40)
        second = error_curve(traced_pair, source, rwg, bc, [1.5], n_points=40)
        assert np.array_equal(first.errors, second.errors)

    def test_stable_under_refined_sampling(self, surface, source,
                                           traced_pair):
        _, rwg, bc = surface
        coarse = error_curve(traced_pair, source, rwg, bc, [2.0], n_points=64)
        fine = error_curve(traced_pair, source, rwg, bc, [2.0], n_points=128)
        assert coarse.errors[0] == pytest.approx(fine.errors[0], rel=5e-2)

    def test_csv_output(self, surface, source, traced_pair, tmp_path):
        _, rwg, bc = surface
        curve = error_curve(traced_pair, source, rwg, bc, [1.0, 3.0],
                            n_points=30)
        path = tmp_path / "curve.csv"
        save_error_curve(curve, path)
        with open(path) as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["radius_lambda", "rel_error", "formulation"]
        assert len(rows) == 3
        back = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
        assert np.array_equal(back[:, 0], curve.radii)
        assert np.array_equal(back[:, 1], curve.errors)
        assert {r[2] for r in rows[1:]} == {"projected"}
