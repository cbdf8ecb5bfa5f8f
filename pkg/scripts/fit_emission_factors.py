#!/usr/bin/env python3
"""Back-derive the bundled 2021 emission factors from reported anchors.

The referenced technical catalog is not redistributable, so the shipped
`factors/paper2021.cfg` is fitted instead and flagged as such:

  ng   anchored so the v1 January run emits 22.94 t CO2e,
  bm   set to 30% of ng (a ~70% cut for the same fuel energy),
  h2   anchored so the annualized v4-vs-v1 reduction is 77.2%,
  grid a representative 2021 electricity-mix value (not used by the
       heat-pump accounting rule, which charges 0.028 kg per kWh heat),
  hp   0.028 kg CO2e per kWh of produced heat.

Re-run after changing the district scenario, the loads, or the dispatch:
  python3 scripts/fit_emission_factors.py [scenario] [out.cfg]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dhtwin.kpi import write_kv  # noqa: E402
from dhtwin.loads import read_weather  # noqa: E402
from dhtwin.scenario import load_scenario  # noqa: E402
from dhtwin.simulate import build_profiles, run_month  # noqa: E402

V1_JAN_T = 22.94        # t CO2e, reported January emissions, existing status
V4_REDUCTION = 0.772    # reported annual CO2e reduction of the H2 variant
BM_FRACTION = 0.30      # bio-methane CO2e per MWh relative to natural gas
GRID_KG_PER_MWH = 420.0
HP_HEAT_KG_PER_KWH = 0.028


def annualize(j, a, g):
    return 2.0 * j + 4.0 * a + 6.0 * g


def main(scenario_path="scenarios/district29.json", out_path="factors/paper2021.cfg"):
    sc = load_scenario(scenario_path)
    weather = read_weather(sc.weather_path)
    profiles = build_profiles(sc)

    ledgers = {}
    for variant in ("v1", "v4"):
        for month in ("jan", "apr", "aug"):
            print(f"running {variant} {month} ...")
            ledgers[(variant, month)] = run_month(
                sc, variant, month, profiles=profiles, weather=weather).ledger

    fuel_v1 = {m: ledgers[("v1", m)].fuel_ng / 1000.0 for m in ("jan", "apr", "aug")}
    ng = V1_JAN_T * 1000.0 / fuel_v1["jan"]
    bm = BM_FRACTION * ng

    e1_annual = ng * annualize(fuel_v1["jan"], fuel_v1["apr"], fuel_v1["aug"]) / 1000.0
    e4_target = (1.0 - V4_REDUCTION) * e1_annual

    fuel_h2 = {m: ledgers[("v4", m)].fuel_h2 / 1000.0 for m in ("jan", "apr", "aug")}
    hp_uncov = {m: ledgers[("v4", m)].hp_heat_uncovered for m in ("jan", "apr", "aug")}
    hp_t = HP_HEAT_KG_PER_KWH * annualize(hp_uncov["jan"], hp_uncov["apr"],
                                          hp_uncov["aug"]) / 1000.0
    fuel_h2_annual = annualize(fuel_h2["jan"], fuel_h2["apr"], fuel_h2["aug"])
    h2 = (e4_target - hp_t) * 1000.0 / fuel_h2_annual
    if h2 <= 0:
        raise SystemExit("h2 factor came out non-positive; check the scenario")

    print(f"v1 fuel MWh: jan={fuel_v1['jan']:.1f} apr={fuel_v1['apr']:.1f} aug={fuel_v1['aug']:.1f}")
    print(f"v1 annual emissions at fit: {e1_annual:.2f} t")
    print(f"v4 HP (uncovered) term: {hp_t:.3f} t/a, H2 fuel {fuel_h2_annual:.1f} MWh/a")
    print(f"fitted: ng={ng:.3f} bm={bm:.3f} h2={h2:.3f} kg/MWh")

    write_kv(Path(out_path), {
        "ng_kg_per_mwh": f"{ng:.4f}",
        "bm_kg_per_mwh": f"{bm:.4f}",
        "h2_kg_per_mwh": f"{h2:.4f}",
        "grid_kg_per_mwh": f"{GRID_KG_PER_MWH:.1f}",
        "hp_heat_kg_per_kwh": f"{HP_HEAT_KG_PER_KWH}",
    }, header=(
        "FITTED emission factors, kg CO2e per MWh fuel (hp per kWh heat).\n"
        "Derived by scripts/fit_emission_factors.py from the bundled\n"
        "district29 scenario so that the v1 January run reproduces the\n"
        "reported 22.94 t and the v4 annualized reduction lands on the\n"
        "reported 77.2%. These are calibration values, not catalog data."))
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main(*sys.argv[1:])
