import numpy as np
import pytest

from oitsample import (
    GridMismatchError,
    InvalidInputError,
    OrientationLossError,
    PeriodicGrid,
    ScalarField,
    TransportConfig,
    VectorField,
    DiffeoMap,
    build_transport_map,
    gradient_spectral,
    identity_map,
    interp_vector,
    log_density_rate,
    make_density,
    normalize,
    geodesic_path,
    pushforward_residual,
    solve_poisson,
    uniform_density,
    PoissonWorkspace,
    wrap_angle,
)


def sine_density(grid, amp):
    return normalize(ScalarField.from_function(grid, lambda x, y: 1.0 + amp * np.sin(x)))


class TestUniformFixedPoint:
    def test_displacement_is_exactly_zero(self):
        g = PeriodicGrid(64, 64)
        result = build_transport_map(make_density("uniform", g),
                                     TransportConfig(steps=10, grid=g))
        assert np.all(result.map.disp.u_x.values == 0.0)
        assert np.all(result.map.disp.u_y.values == 0.0)
        assert np.all(result.map.inv_disp.u_x.values == 0.0)
        assert np.all(result.map.inv_disp.u_y.values == 0.0)
        assert result.residual <= 1e-10
        assert result.angle == 0.0
        assert np.all(result.min_jacobian == 1.0)
        assert np.all(result.cfl == 0.0)


class TestNearIdentity:
    def test_single_step_matches_linearized_solution(self):
        g = PeriodicGrid(64, 64)
        target = sine_density(g, 0.01)
        result = build_transport_map(target, TransportConfig(steps=1, grid=g))
        assert result.residual <= 1e-3

        # one Euler step should agree with the t=0 linearization to O(amp^2)
        path = geodesic_path(uniform_density(g), target)
        f0 = solve_poisson(PoissonWorkspace(g), log_density_rate(path, 0.0))
        v0 = gradient_spectral(f0)
        assert np.abs(result.map.disp.u_x.values + v0.u_x.values).max() <= 1e-4
        assert np.abs(result.map.disp.u_y.values + v0.u_y.values).max() <= 1e-4

    def test_round_trip_improves_with_steps(self):
        g = PeriodicGrid(64, 64)
        target = sine_density(g, 0.3)

        def round_trip(result):
            X, Y = g.node_mesh()
            fx = X + result.map.disp.u_x.values
            fy = Y + result.map.disp.u_y.values
            pts = np.stack([fx.reshape(-1), fy.reshape(-1)], axis=1)
            back = interp_vector(result.map.inv_disp, pts)
            ex = wrap_angle(pts[:, 0] + back[:, 0] - X.reshape(-1))
            ey = wrap_angle(pts[:, 1] + back[:, 1] - Y.reshape(-1))
            return np.hypot(ex, ey).max()

        coarse = build_transport_map(target, TransportConfig(steps=2, grid=g))
        fine = build_transport_map(target, TransportConfig(steps=16, grid=g))
        assert round_trip(fine) < round_trip(coarse)
        assert round_trip(fine) <= 10 * g.h_x


class TestDiagnosticsAndErrors:
    def test_diagnostics_have_step_length(self):
        g = PeriodicGrid(32, 32)
        result = build_transport_map(sine_density(g, 0.2),
                                     TransportConfig(steps=7, grid=g))
        assert len(result.cfl) == 7
        assert len(result.poisson_mean) == 7
        assert len(result.min_jacobian) == 7
        assert result.min_jacobian.min() > 0
        assert result.velocity_fields is None

    def test_velocity_fields_curl_free_when_recorded(self):
        g = PeriodicGrid(64, 64)
        result = build_transport_map(
            sine_density(g, 0.4),
            TransportConfig(steps=8, grid=g, record_diagnostics=True),
        )
        assert len(result.velocity_fields) == 8
        kx = np.fft.fftfreq(g.n_x, d=g.h_x) * 2 * np.pi
        ky = np.fft.fftfreq(g.n_y, d=g.h_y) * 2 * np.pi
        kx[g.n_x // 2] = 0.0
        ky[g.n_y // 2] = 0.0
        for vf in result.velocity_fields[::3]:
            curl = (
                np.fft.ifft2(1j * ky[None, :] * np.fft.fft2(vf.u_x.values))
                - np.fft.ifft2(1j * kx[:, None] * np.fft.fft2(vf.u_y.values))
            ).real
            assert np.abs(curl).max() <= 1e-10

    def test_orientation_loss_reports_step(self):
        g = PeriodicGrid(64, 64)
        with pytest.raises(OrientationLossError) as err:
            build_transport_map(make_density("two-bump", g),
                                TransportConfig(steps=1, grid=g))
        assert err.value.step == 0

    def test_grid_mismatch(self):
        g = PeriodicGrid(32, 32)
        other = PeriodicGrid(64, 64)
        with pytest.raises(GridMismatchError):
            build_transport_map(sine_density(g, 0.2), TransportConfig(steps=3, grid=other))

    def test_invalid_step_count(self):
        g = PeriodicGrid(32, 32)
        with pytest.raises(InvalidInputError):
            TransportConfig(steps=0, grid=g)

    def test_residual_warning_flag(self):
        g = PeriodicGrid(32, 32)
        target = make_density("two-bump", g)
        with pytest.warns(RuntimeWarning):
            result = build_transport_map(
                target, TransportConfig(steps=12, grid=g, residual_tol=1e-6))
        assert result.residual_above_tol

    def test_determinism(self):
        g = PeriodicGrid(48, 48)
        target = sine_density(g, 0.35)
        cfg = TransportConfig(steps=9, grid=g)
        a = build_transport_map(target, cfg)
        b = build_transport_map(target, cfg)
        assert np.array_equal(a.map.disp.u_x.values, b.map.disp.u_x.values)
        assert np.array_equal(a.map.disp.u_y.values, b.map.disp.u_y.values)
        assert np.array_equal(a.map.inv_disp.u_x.values, b.map.inv_disp.u_x.values)
        assert a.residual == b.residual


class TestPushforwardResidual:
    def test_identity_on_uniform(self):
        g = PeriodicGrid(32, 32)
        assert pushforward_residual(identity_map(g), uniform_density(g)) <= 1e-10

    def test_translation_preserves_uniform(self):
        g = PeriodicGrid(32, 32)
        disp = VectorField(ScalarField.constant(g, 0.8), ScalarField.constant(g, -1.3))
        mapping = DiffeoMap(g, disp)
        assert pushforward_residual(mapping, uniform_density(g)) <= 1e-10

    def test_decreases_when_steps_double(self):
        g = PeriodicGrid(64, 64)
        target = make_density("two-bump", g)
        coarse = build_transport_map(target, TransportConfig(steps=25, grid=g))
        fine = build_transport_map(target, TransportConfig(steps=50, grid=g))
        assert fine.residual < coarse.residual
