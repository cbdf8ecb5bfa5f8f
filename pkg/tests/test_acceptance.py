"""Acceptance gate: every criterion at its stated tolerance.

The expensive part is one full four-variant sweep over the three observation
months (module-scoped fixture); everything else reads its artifacts or runs
in milliseconds. Run with `pytest tests/test_acceptance.py -v -s` to see the
per-criterion lines.
"""

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from dhtwin.center import buffer_power
from dhtwin.cosim import MasterConfig, RunArchive, run
from dhtwin.kpi import annuity_factor, seasonal_extrapolate
from dhtwin.loads import annual_heat_demand, specific_demand
from dhtwin.network import NetworkState, advance_thermal, steady_outlet_oracle
from dhtwin.scenario import load_scenario
from dhtwin.simulate import compare_variants, run_month
from toys import T0, build_graph, run_monolithic

SCENARIOS = Path(__file__).parent.parent / "scenarios"
CP = 4186.0


def report_line(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


@dataclass
class Sweep:
    report: dict
    out_dir: Path
    wall_s: float
    v1_wall_s: float


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    scenario = load_scenario(SCENARIOS / "district29.json")
    out = tmp_path_factory.mktemp("sweep")
    marks = {}

    def progress(msg):
        marks[msg.split()[1] + "_" + msg.split()[2]] = time.perf_counter()
        print(msg)

    tic = time.perf_counter()
    report = compare_variants(scenario, ["v1", "v2", "v3", "v4"], out_dir=out,
                              progress=progress)
    wall = time.perf_counter() - tic
    v1_wall = marks["v2_jan"] - marks["v1_jan"]
    return Sweep(report=report, out_dir=out, wall_s=wall, v1_wall_s=v1_wall)


class TestCriterion1DesignDemand:
    def test_annual_demand_formula(self):
        q = annual_heat_demand(35.0, 186.8, 0.8, 1500.0)
        ok = math.isclose(q, 7845.6, rel_tol=1e-9)
        report_line("C1 design demand", ok, f"annual_heat_demand = {q!r} kWh/a")

    def test_specific_demand(self):
        s = specific_demand(annual_heat_demand(35.0, 186.8, 0.8, 1500.0), 186.8)
        ok = math.isclose(s, 42.0, rel_tol=1e-9)
        report_line("C1 specific demand", ok, f"specific_demand = {s!r} kWh/m2a")


class TestCriterion2SeasonalExtrapolation:
    def test_reference_emissions(self):
        total = seasonal_extrapolate(22.94, 12.04, 7.0)
        ok = math.isclose(total, 136.04, rel_tol=1e-12) and abs(total - 136.0) / 136.0 < 0.001
        report_line("C2 seasonal extrapolation", ok, f"2/4/6-weighted = {total} t/a")


class TestCriterion3AnnualHeat:
    def test_reference_weights(self):
        assert seasonal_extrapolate(86.0, 47.0, 29.0) == pytest.approx(534.0, rel=1e-12)

    def test_v1_annual_heat_within_3pct(self, sweep):
        heat = sweep.report["variants"]["v1"]["annual"]["heat_mwh"]
        ok = abs(heat - 534.0) / 534.0 <= 0.03
        report_line("C3 v1 annual heat", ok, f"{heat:.1f} MWh/a vs 534 +-3%")

    def test_v1_three_months_under_two_minutes(self, sweep):
        ok = sweep.v1_wall_s < 120.0
        report_line("C3 runtime", ok, f"v1 jan+apr+aug in {sweep.v1_wall_s:.0f} s (< 120 s)")


class TestCriterion4EmissionReductions:
    def test_v2_reduction_near_70(self, sweep):
        red = sweep.report["variants"]["v2"]["reduction_vs_reference_pct"]
        ok = abs(red - 70.0) <= 2.0
        report_line("C4 v2 reduction", ok, f"{red:.2f}% vs 70 +-2 pp")

    def test_v4_reduction_near_77(self, sweep):
        red = sweep.report["variants"]["v4"]["reduction_vs_reference_pct"]
        ok = abs(red - 77.2) <= 3.0
        report_line("C4 v4 reduction", ok, f"{red:.2f}% vs 77.2 +-3 pp")

    def test_sweep_under_ten_minutes(self, sweep):
        ok = sweep.wall_s < 600.0
        report_line("C4 runtime", ok, f"4-variant sweep in {sweep.wall_s:.0f} s (< 600 s)")


class TestCriterion5AugustHeatPumpEmissions:
    def test_v4_august_hp_emissions(self, sweep):
        led = sweep.report["variants"]["v4"]["monthly"]["aug"]["ledger_kwh"]
        t = led["hp_heat_uncovered"] * 0.028 / 1000.0
        ok = abs(t - 0.84) / 0.84 <= 0.05
        report_line("C5 v4 August HP emissions", ok, f"{t:.3f} t vs 0.84 +-5%")


class TestCriterion6ControlProperties:
    def archive(self, sweep, variant, month) -> RunArchive:
        return RunArchive.read(sweep.out_dir / f"{variant}_{month}" / "archive.csv")

    def test_v1_august_boiler_closed(self, sweep):
        arch = self.archive(sweep, "v1", "aug")
        peak = float(np.max(arch.column("center", "q_boiler_w")))
        ok = peak == 0.0
        report_line("C6 v1 August boiler", ok, f"max boiler output {peak} W over the month")

    def test_v4_august_boilerless_and_chp_off(self, sweep):
        arch = self.archive(sweep, "v4", "aug")
        chp_peak = float(np.max(arch.column("center", "q_chp_w")))
        boiler_peak = float(np.max(arch.column("center", "q_boiler_w")))
        ok = chp_peak == 0.0 and boiler_peak == 0.0
        report_line("C6 v4 August HP-only", ok,
                     f"max CHP {chp_peak} W, max boiler {boiler_peak} W")

    def test_v4_january_hp_covered_by_chp(self, sweep):
        led = sweep.report["variants"]["v4"]["monthly"]["jan"]["ledger_kwh"]
        ok = led["elec_cons"] <= led["elec_gen"] + 1e-6
        report_line("C6 v4 January coverage", ok,
                     f"HP {led['elec_cons']:.0f} kWh <= CHP {led['elec_gen']:.0f} kWh")


class TestCriterion7BuildingValidation:
    def test_three_building_january_tracking(self):
        from dhtwin.building import setpoint_schedule

        scenario = load_scenario(SCENARIOS / "validation3.json")
        tic = time.perf_counter()
        mr = run_month(scenario, "v1", "jan")
        wall = time.perf_counter() - tic
        times = mr.archive.times()
        setpoints = np.array([setpoint_schedule(t) for t in times])
        fracs = []
        for b in ("b1", "b2", "b3"):
            dev = np.abs(mr.archive.column(b, "t_room_degc") - setpoints)
            fracs.append(float(np.mean(dev <= 2.0)))
        ok = min(fracs) >= 0.95 and wall < 60.0
        report_line("C7 building validation", ok,
                     f"within 2 K for {min(fracs) * 100:.1f}% of steps (>= 95%), "
                     f"{wall:.0f} s (< 60 s)")


class TestCriterion8NumericalProperties:
    def test_a_network_energy_balance(self):
        from test_network import three_leaf_tree

        topo = three_leaf_tree()
        state = NetworkState(topo)
        rng = np.random.default_rng(11)
        worst = 0.0
        for k in range(60):
            state.set_leaf_flows(rng.uniform(0.0, 1.5, size=3))
            t_in = 75.0 + 10.0 * math.sin(k / 5.0)
            _, _, _, diag = advance_thermal(state, t_in, rng.uniform(50, 58, size=3), 60.0)
            rel = abs(diag.residual) / max(abs(diag.e_in), 1.0)
            worst = max(worst, rel)
        ok = worst <= 0.005
        report_line("C8a energy balance", ok, f"worst per-step closure {worst:.2e} (<= 0.5%)")

    def test_b_steady_pipe_oracle(self):
        from test_network import run_to_steady, single_pipe

        topo = single_pipe(u_per_m=0.17, length=100.0)
        _, arrivals = run_to_steady(topo, mdot=1.0, t_in=80.0, t_ret=55.0)
        t_oracle = steady_outlet_oracle(80.0, 10.0, 0.17, 100.0, 1.0)
        err = abs((80.0 - arrivals["b1"]) - (80.0 - t_oracle)) / (80.0 - t_oracle)
        ok = err <= 0.01
        report_line("C8b steady pipe oracle", ok,
                     f"outlet {arrivals['b1']:.4f} vs analytic {t_oracle:.4f} degC "
                     f"({err * 100:.2f}% of drop, <= 1%)")

    def test_c_cosim_vs_monolithic(self):
        n = 1440
        graph, topo = build_graph()
        traces = {leaf: [] for leaf in topo.leaves}

        def hook(t, ports):
            for leaf in topo.leaves:
                traces[leaf].append(ports[(leaf, "t_return_degc")])

        run(graph, MasterConfig(max_iterations=1), T0, T0 + n * 60.0, step_hook=hook)
        mono = run_monolithic(n)
        rms = max(float(np.sqrt(np.mean((np.array(traces[leaf]) - mono[leaf]) ** 2)))
                  for leaf in topo.leaves)
        ok = rms <= 0.1
        report_line("C8c master equivalence", ok, f"worst return-temp RMS {rms:.2e} K (<= 0.1)")

    def test_d_annuity_present_value_identity(self):
        worst = 0.0
        for q, t in ((1.0303, 15), (1.05, 30), (1.001, 5), (1.2, 8), (1.0101, 40)):
            a = annuity_factor(q, t)
            pv = sum(q ** (-i) for i in range(1, t + 1))
            worst = max(worst, abs(a * pv - 1.0))
        ok = worst <= 1e-12
        report_line("C8d annuity identity", ok, f"worst |a*PV - 1| = {worst:.2e} (<= 1e-12)")

    def test_e_buffer_power_exact(self):
        rng = np.random.default_rng(123)
        exact = True
        for _ in range(1000):
            mdot = float(rng.uniform(0.0, 5.0))
            t1 = float(rng.uniform(20.0, 95.0))
            t2 = float(rng.uniform(20.0, 95.0))
            if buffer_power(mdot, t1, t2) != mdot * CP * t2 - mdot * CP * t1:
                exact = False
                break
        report_line("C8e buffer power", exact,
                     "equals brute-force enthalpy difference on 1000 random inputs")


class TestCriterion9Exclusions:
    def test_v3_fuel_below_v1(self, sweep):
        f3 = sweep.report["variants"]["v3"]["annual"]["fuel_mwh"]
        f1 = sweep.report["variants"]["v1"]["annual"]["fuel_mwh"]
        ok = f3 < f1
        report_line("C9 v3 fuel property", ok,
                     f"v3 {f3:.1f} MWh/a < v1 {f1:.1f} MWh/a (replaces the "
                     "non-reproducible absolute fuel figure)")

    def test_exclusions_documented(self):
        # absolute cost figures and exact deviation traces are out of scope;
        # cost inputs are configuration (factors/costbook2024.cfg)
        print("NOTE  C9: absolute cost table and deviation traces excluded by design")
        assert True
