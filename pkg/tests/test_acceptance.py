"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines and the measured throughput figures.
"""

import time

import numpy as np
import pytest

from oitsample import (
    PeriodicGrid,
    PoissonWorkspace,
    ScalarField,
    TransportConfig,
    build_transport_map,
    chi_squared_gof,
    expected_bin_mass,
    geodesic_eval,
    geodesic_path,
    gradient_spectral,
    histogram,
    laplacian_spectral,
    make_density,
    normalize,
    quadrature,
    rejection_sample_oracle,
    sample_target,
    set_dynamic_range,
    solve_poisson,
    two_sample_chi_squared,
    uniform_density,
)
from oitsample.cli import main as cli_main

SIGNIFICANCE = 0.01


def report(criterion: str, passed: bool, detail: str = "") -> None:
    tag = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[ACCEPTANCE] {criterion}: {tag}{suffix}")


def test_c1_sampling_reproduction(reference_build, reference_density):
    result, build_time = reference_build
    n = 100_000

    t0 = time.perf_counter()
    batch = sample_target(result.map, n, seed=0)
    sample_time = time.perf_counter() - t0

    hist = histogram(batch, 32, 32)
    mass = expected_bin_mass(reference_density, 32, 32)
    gof_stat, gof_dof, gof_p = chi_squared_gof(hist, mass)

    oracle = rejection_sample_oracle(reference_density, n, seed=7)
    ts_stat, ts_dof, ts_p = two_sample_chi_squared(hist, histogram(oracle, 32, 32))

    ok = (gof_p > SIGNIFICANCE and ts_p > SIGNIFICANCE
          and build_time <= 60.0 and sample_time <= 1.0)
    report("C1 statistical reproduction", ok,
           f"gof p={gof_p:.3f} (stat {gof_stat:.0f}/{gof_dof}), "
           f"two-sample p={ts_p:.3f} (stat {ts_stat:.0f}/{ts_dof}), "
           f"build {build_time:.1f}s, sampling {sample_time * 1e3:.0f}ms")
    assert gof_p > SIGNIFICANCE
    assert ts_p > SIGNIFICANCE
    assert build_time <= 60.0
    assert sample_time <= 1.0


def test_c2_pushforward_identity_and_ladder(reference_build):
    result, _ = reference_build
    residuals = [result.residual]
    for n, steps in ((128, 50), (64, 25)):
        grid = PeriodicGrid(n, n)
        target = make_density("two-bump", grid)
        residuals.append(
            build_transport_map(target, TransportConfig(steps=steps, grid=grid)).residual
        )
    fine, mid, coarse = residuals
    ok = fine <= 0.05 and fine < mid < coarse
    report("C2 pushforward residual ladder", ok,
           f"residuals 256/128/64 = {fine:.4f} / {mid:.4f} / {coarse:.4f}")
    assert fine <= 0.05
    assert fine < mid < coarse


def test_c3_amortized_throughput(reference_build):
    result, _ = reference_build
    n = 10**7
    t0 = time.perf_counter()
    batch = sample_target(result.map, n, seed=99)
    elapsed = time.perf_counter() - t0
    ok = elapsed <= 10.0 and batch.count == n
    report("C3 amortized sampling throughput", ok,
           f"{n:.0e} samples in {elapsed:.2f}s = {n / elapsed:.2e}/s")
    assert batch.count == n
    assert elapsed <= 10.0


def test_c4_analytic_solver_suite(rng):
    grid = PeriodicGrid(64, 64)
    ws = PoissonWorkspace(grid)
    X, Y = grid.node_mesh()

    f1 = solve_poisson(ws, ScalarField(grid, -np.sin(X)))
    err1 = np.abs(f1.values - np.sin(X)).max()
    f2 = solve_poisson(ws, ScalarField(grid, -2.0 * np.sin(X) * np.sin(Y)))
    err2 = np.abs(f2.values - np.sin(X) * np.sin(Y)).max()

    g1 = gradient_spectral(ScalarField(grid, np.cos(X)))
    err3 = max(np.abs(g1.u_x.values + np.sin(X)).max(), np.abs(g1.u_y.values).max())
    g2 = gradient_spectral(ScalarField(grid, -3.0 * np.sin(3.0 * Y)))
    err4 = max(np.abs(g2.u_y.values + 9.0 * np.cos(3.0 * Y)).max(),
               np.abs(g2.u_x.values).max())

    worst_residual = 0.0
    for _ in range(100):
        spec = np.zeros(grid.shape, dtype=complex)
        for _ in range(10):
            kx = int(rng.integers(-10, 11))
            ky = int(rng.integers(-10, 11))
            amp = rng.standard_normal() + 1j * rng.standard_normal()
            spec[kx % 64, ky % 64] += amp
            spec[-kx % 64, -ky % 64] += np.conj(amp)
        s = ScalarField(grid, np.fft.ifft2(spec).real)
        f = solve_poisson(ws, s)
        target = s.values - s.values.mean()
        rel = np.abs(laplacian_spectral(f).values - target).max() / np.abs(target).max()
        worst_residual = max(worst_residual, rel)

    ok = max(err1, err2, err3, err4) <= 1e-12 and worst_residual <= 1e-10
    report("C4 analytic solver suite", ok,
           f"eigenfunction/gradient errors <= {max(err1, err2, err3, err4):.2e}, "
           f"worst Poisson residual {worst_residual:.2e}")
    assert err1 <= 1e-12 and err2 <= 1e-12
    assert err3 <= 1e-12 and err4 <= 1e-12
    assert worst_residual <= 1e-10


def test_c5_geodesic_invariants(reference_density):
    path = geodesic_path(uniform_density(reference_density.grid), reference_density)
    worst_mass = 0.0
    worst_rate = 0.0
    min_density = np.inf
    for t in np.linspace(0.0, 1.0, 101):
        mu_t, mu_dot = geodesic_eval(path, float(t))
        worst_mass = max(worst_mass, abs(quadrature(mu_t.field) - 1.0))
        worst_rate = max(worst_rate, abs(quadrature(mu_dot)))
        min_density = min(min_density, mu_t.field.values.min())

    delta = 1e-5
    worst_fd = 0.0
    for t in (0.1, 0.37, 0.9):
        _, mu_dot = geodesic_eval(path, t)
        hi, _ = geodesic_eval(path, t + delta)
        lo, _ = geodesic_eval(path, t - delta)
        fd = (hi.field.values - lo.field.values) / (2 * delta)
        worst_fd = max(worst_fd,
                       np.abs(fd - mu_dot.values).max() / np.abs(mu_dot.values).max())

    ok = worst_mass <= 1e-10 and worst_rate <= 1e-9 and min_density > 0 and worst_fd <= 1e-6
    report("C5 geodesic invariants", ok,
           f"|mass-1| <= {worst_mass:.1e}, |d/dt mass| <= {worst_rate:.1e}, "
           f"min density {min_density:.2e}, derivative-vs-FD {worst_fd:.1e}")
    assert worst_mass <= 1e-10
    assert worst_rate <= 1e-9
    assert min_density > 0.0
    assert worst_fd <= 1e-6


def test_c6_uniform_fixed_point():
    grid = PeriodicGrid(256, 256)
    result = build_transport_map(make_density("uniform", grid),
                                 TransportConfig(steps=100, grid=grid))
    zero = (np.all(result.map.disp.u_x.values == 0.0)
            and np.all(result.map.disp.u_y.values == 0.0)
            and np.all(result.map.inv_disp.u_x.values == 0.0)
            and np.all(result.map.inv_disp.u_y.values == 0.0))
    ok = zero and result.residual <= 1e-10
    report("C6 uniform fixed point", ok,
           f"displacement identically zero: {zero}, residual {result.residual:.1e}")
    assert zero
    assert result.residual <= 1e-10


def test_c7_determinism(tmp_path):
    # identical configs, including identical paths; second pass overwrites
    map_path = tmp_path / "map.oitm"
    csv_path = tmp_path / "pts.csv"
    report_path = tmp_path / "report.txt"
    outputs = []
    for workers in ("1", "4"):
        assert cli_main(["build", "--density", "sine-perturbation:0.4", "--grid", "64",
                         "--steps", "10", "--out", str(map_path)]) == 0
        assert cli_main(["sample", "--map", str(map_path), "--n", "200000",
                         "--seed", "5", "--workers", workers,
                         "--out", str(csv_path)]) == 0
        assert cli_main(["validate", "--map", str(map_path), "--density",
                         "sine-perturbation:0.4", "--n", "20000", "--seed", "2",
                         "--bins", "16", "--out", str(report_path)]) == 0
        outputs.append((map_path.read_bytes(), csv_path.read_bytes(),
                        report_path.read_bytes()))
    ok = outputs[0] == outputs[1]
    report("C7 byte-identical artifacts", ok,
           "map, samples (workers 1 vs 4), and report all match" if ok else "mismatch")
    assert outputs[0] == outputs[1]


def test_c8_negative_control(reference_build):
    result, _ = reference_build
    grid = result.map.grid
    X, Y = grid.node_mesh()
    swapped = (2.0 * np.exp(-(X**2) - 10.0 * (Y - X**2 / 2.0 + 1.0) ** 2)
               + 3.0 * np.exp(-((X + 1.0) ** 2) - Y**2) + 0.1)
    wrong = normalize(set_dynamic_range(ScalarField(grid, swapped), 100.0))

    batch = sample_target(result.map, 100_000, seed=0)
    stat, dof, p = chi_squared_gof(histogram(batch, 32, 32),
                                   expected_bin_mass(wrong, 32, 32))
    ok = p < SIGNIFICANCE
    report("C8 negative control", ok, f"swapped-bumps gof p={p:.2e} (stat {stat:.0f}/{dof})")
    assert p < SIGNIFICANCE
