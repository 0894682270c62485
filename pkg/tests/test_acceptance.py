"""End-to-end acceptance checks; each test prints one PASS/FAIL line.

Runtime is dominated by the 4x refined scan and the smallest delta_a rows
(about half an hour on one core).
"""

import math
import subprocess
import sys

import numpy as np
import pytest

from qmonitor.analytic import effective_width_linear, quantum_limit
from qmonitor.evolver import EvolutionConfig, evolve, step
from qmonitor.model import MeasurementSetup, PhysicalSystem, SpatialGrid, WaveFunction, ground_state, make_readout
from qmonitor.oracle import expm_evolve, off_corridor_fraction, path_sum_propagate
from qmonitor.sweep import Numerics, scan_delta_a, sweep

TAU = math.pi
LINEAR = PhysicalSystem()
DELTA_AS = np.logspace(-2, 2, 15)
SMALL = [d for d in DELTA_AS if d <= LINEAR.quantum_scale * (1 + 1e-12)]
MODES = (1, 2)


def _scan(system, delta_as, n, numerics=None):
    return scan_delta_a(delta_as, system, TAU, n, numerics=numerics)


def _rel_err(row):
    return row.width_equivalent / row.analytic_linear - 1


@pytest.fixture(scope="module")
def default_scans():
    return {n: _scan(LINEAR, DELTA_AS, n) for n in MODES}


@pytest.fixture(scope="module")
def refined_scans():
    return {n: _scan(LINEAR, DELTA_AS, n, Numerics(refine=4)) for n in MODES}


@pytest.fixture(scope="module")
def quantum_rows():
    return _scan(LINEAR, np.logspace(-3, -2, 4), 1)


@pytest.fixture(scope="module")
def nonlinear_scans():
    out = {}
    for bt in (0.1, 1.0):
        for n in MODES:
            out[bt, n] = _scan(PhysicalSystem.from_beta_tilde(bt), SMALL, n)
    for n in MODES:
        out[1e-4, n] = _scan(PhysicalSystem.from_beta_tilde(1e-4), DELTA_AS, n)
    return out


def test_criterion_1_analytic_agreement(default_scans, refined_scans, verdict):
    ok_rows = all(r.ok for s in (default_scans, refined_scans) for rows in s.values() for r in rows)
    worst_default = max(abs(_rel_err(r)) for rows in default_scans.values() for r in rows)
    worst_refined = max(abs(_rel_err(r)) for rows in refined_scans.values() for r in rows)
    passed = ok_rows and worst_default < 5e-3 and worst_refined < 1e-3
    verdict(1, passed, f"max |rel err| default {worst_default:.2e} (< 5e-3), 4x refined {worst_refined:.2e} (< 1e-3)")
    assert passed


def test_criterion_2_classical_limit(default_scans, verdict):
    da = 100.0 * LINEAR.quantum_scale
    ratios = {f"n={n},Omega/omega={n:g}": default_scans[n][-1].width_equivalent / da for n in MODES}
    for n, tau in ((3, TAU), (1, 2 * TAU), (2, 0.5 * TAU)):
        res = sweep(LINEAR, MeasurementSetup(tau, da, n))
        ratios[f"n={n},Omega/omega={n * math.pi / tau:g}"] = res.width_equivalent / da
    worst = max(abs(r - 1) for r in ratios.values())
    passed = worst < 1e-2
    verdict(2, passed, f"max |Delta_a_eff/Delta_a - 1| = {worst:.2e} over {len(ratios)} cases (< 1e-2)")
    assert passed


def test_criterion_3_quantum_scaling(quantum_rows, verdict):
    da = np.array([r.delta_a for r in quantum_rows])
    w = np.array([r.width_equivalent for r in quantum_rows])
    slope = np.polyfit(np.log(da), np.log(w), 1)[0]
    ql = np.array([quantum_limit(LINEAR, MeasurementSetup(TAU, d)) for d in da])
    worst = float(np.max(np.abs(w / ql - 1)))
    passed = all(r.ok for r in quantum_rows) and abs(slope + 0.5) <= 0.05 and worst < 2e-2
    verdict(3, passed, f"slope {slope:.4f} (-0.5 +- 0.05), max |w/quantum_limit - 1| {worst:.2e} (< 2e-2)")
    assert passed


def test_criterion_4_resonance_floor(default_scans, refined_scans, quantum_rows, verdict):
    rows = default_scans[1] + refined_scans[1] + quantum_rows
    low = min(r.width_equivalent for r in rows)
    floor = LINEAR.quantum_scale * (1 - 1e-3)
    passed = low >= floor
    verdict(4, passed, f"min Delta_a_eff at Omega=omega {low:.6f} (>= {floor:.6f})")
    assert passed


def test_criterion_5_above_instrument_error(default_scans, refined_scans, quantum_rows, verdict):
    rows = [r for s in (default_scans, refined_scans) for rs in s.values() for r in rs] + quantum_rows
    margin = min(r.width_equivalent / r.delta_a for r in rows)
    passed = margin >= 1 - 5e-3
    verdict(5, passed, f"min Delta_a_eff/Delta_a over {len(rows)} beta=0 rows {margin:.6f} (>= 0.995)")
    assert passed


def test_criterion_6_nonlinear_effect(default_scans, nonlinear_scans, verdict):
    violations = []
    for bt in (0.1, 1.0):
        for n in MODES:
            for lin, nl in zip(default_scans[n], nonlinear_scans[bt, n]):
                assert math.isclose(lin.delta_a, nl.delta_a)
                if not (nl.ok and nl.width_equivalent <= lin.width_equivalent):
                    violations.append(
                        f"beta_tilde={bt:g} n={n} Delta_a={nl.delta_a:.3g}: "
                        f"{nl.width_equivalent:.5f} > {lin.width_equivalent:.5f}"
                    )
    weak = max(
        abs(nl.width_equivalent / lin.width_equivalent - 1)
        for n in MODES
        for lin, nl in zip(default_scans[n], nonlinear_scans[1e-4, n])
    )
    passed = not violations and weak < 5e-3
    detail = f"{len(violations)} rows with Delta_a_eff(beta) > Delta_a_eff(0); beta_tilde=1e-4 max dev {weak:.2e} (< 5e-3)"
    if violations:
        detail += " [" + "; ".join(violations) + "]"
    verdict(6, passed, detail)
    assert passed


def _ground(points=257, half=8.0):
    return ground_state(SpatialGrid.symmetric(half, points), LINEAR)


def _order(errors):
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def test_criterion_7_evolver_certification(verdict):
    # (a) norm conservation per step for a real potential
    phi = _ground()
    free = MeasurementSetup(TAU, math.inf)
    r0 = make_readout(0.0, free)
    cfg = EvolutionConfig(TAU, 200, method="cayley", kinetic="fd3")
    v = phi.values * np.exp(1j * 0.8 * phi.grid.x)
    psi = WaveFunction(phi.grid, v)
    drift = 0.0
    for k in range(cfg.num_steps):
        nxt = step(psi, k * cfg.dt, LINEAR, free, r0, cfg)
        drift = max(drift, abs(nxt.norm_squared() / psi.norm_squared() - 1))
        psi = nxt
    split = evolve(WaveFunction(phi.grid, v), LINEAR, free, r0, EvolutionConfig(TAU, 200))
    drift = max(drift, abs(split.norm_squared() / WaveFunction(phi.grid, v).norm_squared() - 1) / 200)
    ok_a = drift < 1e-10

    # (b) monotone decay when measured
    setup = MeasurementSetup(TAU, 0.8)
    r = make_readout(0.5, setup)
    psi, norms = phi, [phi.norm_squared()]
    for k in range(cfg.num_steps):
        psi = step(psi, k * cfg.dt, LINEAR, setup, r, cfg)
        norms.append(psi.norm_squared())
    ok_b = bool(np.all(np.diff(norms) < 0))

    # (c) convergence orders in dt and dx
    setup = MeasurementSetup(TAU, 0.7)
    r = make_readout(0.6, setup)
    orders = {}
    for method, kinetic in (("cayley", "fd3"), ("split", "spectral")):
        runs = [
            evolve(phi, LINEAR, setup, r, EvolutionConfig(TAU, n, method=method, kinetic=kinetic, frame=0.0)).physical_values()
            for n in (100, 200, 400, 800)
        ]
        orders[f"dt/{method}"] = _order([np.linalg.norm(a - b) for a, b in zip(runs, runs[1:])])
    grids = [SpatialGrid.symmetric(8.0, n) for n in (65, 129, 257, 513)]
    for method in ("cayley", "split"):
        runs = [
            evolve(ground_state(g, LINEAR), LINEAR, setup, r,
                   EvolutionConfig(TAU, 2000, method=method, kinetic="fd3", frame=0.0)).physical_values()
            for g in grids
        ]
        # L2 norm on each grid: the sqrt(dx) measure matters when the grids differ
        orders[f"dx/{method}"] = _order(
            [np.linalg.norm(a - b[::2]) * math.sqrt(g.dx) for a, b, g in zip(runs, runs[1:], grids)]
        )

    # (d) agreement with the dense exponential at second order in dt
    small = _ground(129)
    for method in ("cayley", "split"):
        errs = []
        for n in (64, 128, 256):
            ref = expm_evolve(small, LINEAR, MeasurementSetup(TAU, 0.5), make_readout(0.7, MeasurementSetup(TAU, 0.5)), n)
            out = evolve(small, LINEAR, MeasurementSetup(TAU, 0.5), make_readout(0.7, MeasurementSetup(TAU, 0.5)),
                         EvolutionConfig(TAU, n, method=method, kinetic="fd3", frame=0.0))
            errs.append(np.linalg.norm(out.physical_values() - ref.physical_values()) / np.linalg.norm(ref.physical_values()))
        orders[f"expm/{method}"] = _order(errs)

    ok_c = all(1.8 <= p <= 2.2 for k, ps in orders.items() if not k.startswith("expm") for p in ps)
    ok_d = all(1.8 <= p <= 2.2 for k, ps in orders.items() if k.startswith("expm") for p in ps)
    passed = ok_a and ok_b and ok_c and ok_d
    summary = ", ".join(f"{k} {min(ps):.3f}-{max(ps):.3f}" for k, ps in orders.items())
    verdict(7, passed, f"(a) norm drift/step {drift:.1e} (b) monotone={ok_b} (c,d) orders {summary}")
    assert passed


def _gaussian(grid):
    v = np.exp(-0.5 * grid.x**2).astype(complex)
    v[0] = v[-1] = 0
    return WaveFunction(grid, v)


def test_criterion_8_path_integral_equivalence(verdict):
    setup = MeasurementSetup(TAU, 0.5)
    r = make_readout(0.5, setup)
    fine = SpatialGrid.symmetric(12.0, 2049)
    ref = evolve(_gaussian(fine), LINEAR, setup, r, EvolutionConfig(TAU, 4000, frame=0.0, leak_tol=1.0)).physical_values()
    discrepancies = []
    for slices, points in ((2, 11), (3, 17), (4, 21)):
        lattice = SpatialGrid.symmetric(5.0, points)
        target = np.interp(lattice.x, fine.x, ref.real) + 1j * np.interp(lattice.x, fine.x, ref.imag)
        ps = path_sum_propagate(_gaussian(lattice), LINEAR, setup, r, slices)
        c = np.vdot(ps, target) / np.vdot(ps, ps)  # common normalisation
        discrepancies.append(np.linalg.norm(c * ps - target) / np.linalg.norm(target))
    lattice = SpatialGrid.symmetric(5.0, 21)
    corridor = []
    for da in (2.0, 1.0, 0.5):
        s = MeasurementSetup(TAU, da)
        corridor.append(off_corridor_fraction(lattice, LINEAR, s, make_readout(1.0, s), 4, 1.0))
    passed = all(a > b for a, b in zip(discrepancies, discrepancies[1:])) and all(
        a > b for a, b in zip(corridor, corridor[1:])
    )
    verdict(8, passed, "path-sum discrepancy " + " > ".join(f"{d:.3f}" for d in discrepancies)
            + "; off-corridor mass " + " > ".join(f"{f:.3f}" for f in corridor))
    assert passed


CLI_CONFIG = """
[measurement]
tau = pi
mode_index = 1
delta_a_range = 1e-2, 1e2
points_per_decade = 2
[output]
profiles = 0
"""


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "qmonitor", *args], capture_output=True, text=True)


def test_criterion_9_reporting_determinism(tmp_path, verdict):
    cfg = tmp_path / "scan.ini"
    cfg.write_text(CLI_CONFIG)
    first = _cli("run", str(cfg), "--out", str(tmp_path / "a"))
    second = _cli("run", str(cfg), "--out", str(tmp_path / "b"), "--parallel", "2")
    analytic = _cli("analytic", str(cfg))
    names = ("scan.csv", "profile-0.csv")
    identical = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in names)

    scan = [line.split(",") for line in (tmp_path / "a" / "scan.csv").read_text().splitlines()]
    ana = [line.split(",") for line in analytic.stdout.splitlines()]
    header = scan[0]
    cols = [header.index(c) for c in ana[0]]
    consistent = len(ana) == len(scan) and all([row[i] for i in cols] == a for row, a in zip(scan, ana))
    i_eq, i_lin = header.index("delta_a_eff_equivalent"), header.index("analytic_linear")
    worst = max(abs(float(row[i_eq]) / float(row[i_lin]) - 1) for row in scan[1:])
    passed = (first.returncode == second.returncode == analytic.returncode == 0) and identical and consistent and worst < 5e-3
    verdict(9, passed, f"byte-identical CSVs={identical}, analytic columns match={consistent}, "
            f"max |equivalent/analytic - 1| {worst:.2e} over {len(scan) - 1} rows")
    assert passed
