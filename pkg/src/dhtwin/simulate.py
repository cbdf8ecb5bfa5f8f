"""Run orchestration: scenario -> coupled blocks -> monthly ledgers.

Months are simulated independently, each cold-started with a spin-up window
whose samples are discarded from ledgers and archives. Within one run the
master steps blocks sequentially; runs are independent of each other.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cosim
from .building import BuildingBlock, BuildingBoundaries, BuildingModel, HiuParams
from .center import CenterBlock, CenterModel
from .core import TimeGrid, TimeSeries, kwh_from_joule
from .kpi import EnergyLedger
from .loads import (
    DemandProfile,
    import_profiles,
    read_weather,
    synthesize_profile,
)
from .network import (
    NetworkState,
    ReturnNetworkBlock,
    SupplyNetworkBlock,
    Topology,
    load_pipe_catalog,
)
from .scenario import Scenario, SchemaError, dump_effective_config

logger = logging.getLogger(__name__)


def hold_fn(series: TimeSeries):
    """Fast zero-order-hold closure over a series (hot path)."""
    t0 = series.grid.t0
    dt = series.grid.dt
    n = series.grid.n_steps
    vals = series.values.tolist()

    def fn(t):
        idx = int((t - t0) // dt)
        if idx < 0 or idx >= n:
            raise IndexError(f"t={t} outside series grid")
        return vals[idx]

    return fn


@dataclass
class MonthRun:
    variant: str
    month: str
    ledger: EnergyLedger
    archive: cosim.RunArchive
    capacity_steps: int
    unserved_kwh: float
    nonconverged_steps: int


def build_topology(scenario: Scenario) -> Topology:
    catalog = load_pipe_catalog(scenario.pipe_catalog_path)
    topo = Topology.from_edges(scenario.segments, catalog,
                               ground_temp=scenario.ground_temp_degc,
                               kfw_per_m=scenario.kfw_per_m)
    record_ids = {r.id for r in scenario.buildings}
    leaves = set(topo.leaves)
    if record_ids != leaves:
        missing = record_ids - leaves
        extra = leaves - record_ids
        raise SchemaError(
            f"building records and grid leaves differ: records without a leaf "
            f"{sorted(missing)}, leaves without a record {sorted(extra)}")
    return topo


def build_profiles(scenario: Scenario, grid_hint: TimeGrid | None = None) -> dict[str, DemandProfile]:
    """Per-building demand profiles for the whole weather span."""
    if scenario.loads_source == "import":
        if grid_hint is None:
            raise ValueError("importing profiles needs a target grid")
        return import_profiles(scenario.profiles_path, grid_hint)
    t_amb, _solar = read_weather(scenario.weather_path)
    profiles = {}
    for rec in scenario.buildings:
        arch_defaults = scenario.archetypes[rec.archetype]
        archetype = rec.demand_archetype(
            _arch_obj(arch_defaults, rec))
        profiles[rec.id] = synthesize_profile(
            archetype, t_amb, seed=scenario.seed, building_id=rec.id,
            calib_year=scenario.year, t_base=scenario.t_base_degc,
            night_factor=scenario.night_factor,
            dhw_kwh_per_100m2=scenario.dhw_kwh_per_100m2)
    return profiles


def _arch_obj(arch_defaults: dict, rec):
    from .loads import BuildingArchetype

    return BuildingArchetype(
        q_h=rec.q_h_w_per_m2, g=float(arch_defaults["g"]),
        f=float(arch_defaults["f_h_per_a"]), a_c=rec.a_c_m2)


def building_model_for(rec, scenario: Scenario) -> BuildingModel:
    import zlib

    from .building import EnvelopeParams, RadiatorParams

    # deterministic threshold jitter so the HIU charge cycles of similar
    # buildings do not lock step and stack into artificial center peaks
    u = (zlib.crc32(rec.id.encode()) % 1000) / 1000.0 * 2.0 - 1.0
    mdot_max = rec.hx_power_w / (4186.0 * 15.0)
    hiu = HiuParams(
        buffer_volume=rec.buffer_m3,
        hx_power=rec.hx_power_w,
        mdot_primary_max=mdot_max,
        mdot_trickle=0.05 * mdot_max,
        charge_on=59.0 + 1.5 * u,
        charge_off=65.0 + 1.5 * u,
    )
    radiator = RadiatorParams(q_nom=rec.radiator_q_nom_w)
    ref = EnvelopeParams()
    scale = rec.a_c_m2 / ref.a_c
    envelope = EnvelopeParams(
        a_c=rec.a_c_m2, ua_env=ref.ua_env * scale, c_int=ref.c_int * scale,
        c_wall=ref.c_wall * scale, ua_iw=ref.ua_iw * scale,
        vent_loss=ref.vent_loss * scale, g_solar=ref.g_solar * scale)
    return BuildingModel(envelope=envelope, radiator=radiator, hiu=hiu)


def build_graph(scenario: Scenario, variant: str, profiles, weather):
    topo = build_topology(scenario)
    net_state = NetworkState(topo)
    t_amb_series, solar_series = weather
    t_amb_fn = hold_fn(t_amb_series)
    solar_fn = hold_fn(solar_series)

    graph = cosim.CouplingGraph()
    center_model = CenterModel(scenario.center_config(variant))
    graph.add_block(CenterBlock("center", center_model, t_ambient_fn=t_amb_fn))
    graph.add_block(SupplyNetworkBlock("supply", net_state))
    for rec in scenario.buildings:
        model = building_model_for(rec, scenario)
        if scenario.mode == "profile":
            p = profiles[rec.id]
            bounds = BuildingBoundaries(
                t_ambient=t_amb_fn, solar_wm2=solar_fn,
                q_dhw=hold_fn(p.dhw), q_space=hold_fn(p.space))
        else:
            p = profiles.get(rec.id)
            bounds = BuildingBoundaries(
                t_ambient=t_amb_fn, solar_wm2=solar_fn,
                q_internal=(lambda a: (lambda t: 2.0 * a))(rec.a_c_m2),
                q_dhw=hold_fn(p.dhw) if p else None, q_space=None)
        graph.add_block(BuildingBlock(rec.id, model, bounds))
    graph.add_block(ReturnNetworkBlock("return", net_state))

    graph.connect("center", "t_supply_degc", "supply", "t_inlet_degc")
    for rec in scenario.buildings:
        graph.connect(rec.id, "mdot_kg_s", "supply", f"mdot_{rec.id}_kg_s")
        graph.connect("supply", f"t_arrival_{rec.id}_degc", rec.id, "t_primary_degc")
        graph.connect(rec.id, "t_return_degc", "return", f"t_return_{rec.id}_degc")
    graph.connect("return", "t_return_degc", "center", "t_return_degc")
    graph.connect("return", "mdot_total_kg_s", "center", "mdot_return_kg_s")
    return graph, topo


CENTER_INTEGRALS = {
    "fuel_ng": "fuel_ng_w", "fuel_bm": "fuel_bm_w", "fuel_h2": "fuel_h2_w",
    "heat_chp": "q_chp_w", "heat_boiler": "q_boiler_w", "heat_hp": "q_hp_w",
    "heat_produced": "q_heat_w", "tank_loss": "q_tank_loss_w",
    "elec_gen": "elec_gen_w", "elec_cons": "elec_cons_w",
    "elec_sold": "elec_sold_w", "elec_bought": "elec_bought_w",
    "hp_heat_covered": "hp_heat_covered_w", "hp_heat_uncovered": "hp_heat_uncovered_w",
}

STANDARD_RECORD = [
    ("center", "t_supply_degc"), ("center", "q_chp_w"), ("center", "q_boiler_w"),
    ("center", "q_hp_w"), ("center", "q_heat_w"), ("center", "elec_gen_w"),
    ("center", "elec_cons_w"), ("center", "elec_sold_w"), ("center", "elec_bought_w"),
    ("center", "capacity_exceeded"),
    ("supply", "q_loss_w"), ("return", "q_loss_w"),
    ("return", "t_return_degc"), ("return", "mdot_total_kg_s"),
]


def run_month(scenario: Scenario, variant: str, month: str,
              profiles=None, weather=None) -> MonthRun:
    t_spin, t0, t1 = scenario.month_window(month)
    if weather is None:
        weather = read_weather(scenario.weather_path)
    if profiles is None:
        if scenario.loads_source == "import":
            n_hours = int(round((t1 - t_spin) / 3600.0))
            grid = TimeGrid(t_spin, 3600.0, n_hours)
            profiles = build_profiles(scenario, grid_hint=grid)
        else:
            profiles = build_profiles(scenario)

    graph, topo = build_graph(scenario, variant, profiles, weather)
    record = list(STANDARD_RECORD)
    if scenario.mode == "envelope":
        for rec in scenario.buildings:
            record.append((rec.id, "t_room_degc"))
            record.append((rec.id, "q_rad_w"))

    integrate = {name: ("center", port) for name, port in CENTER_INTEGRALS.items()}
    building_ids = [r.id for r in scenario.buildings]
    acc = {"net_loss_j": 0.0, "delivered_j": 0.0, "unserved_j": 0.0,
           "capacity_steps": 0}
    dt = scenario.master.dt
    hx_keys = [(b, "q_hx_w") for b in building_ids]
    uns_keys = [(b, "q_unserved_w") for b in building_ids]

    def hook(t, ports):
        if t < t0:
            return
        acc["net_loss_j"] += (ports[("supply", "q_loss_w")]
                              + ports[("return", "q_loss_w")]) * dt
        s = 0.0
        for k in hx_keys:
            s += ports[k]
        acc["delivered_j"] += s * dt
        s = 0.0
        for k in uns_keys:
            s += ports[k]
        acc["unserved_j"] += s * dt
        if ports[("center", "capacity_exceeded")] > 0.0:
            acc["capacity_steps"] += 1

    archive, integrals = cosim.run(
        graph, scenario.master, t_spin, t1, record=record, record_from=t0,
        integrate=integrate, integrate_from=t0,
        meta={"scenario": scenario.name, "variant": variant, "month": month,
              "year": str(scenario.year), "seed": str(scenario.seed)},
        step_hook=hook)

    ledger = EnergyLedger(**{k: kwh_from_joule(v) for k, v in integrals.items()},
                          heat_delivered=kwh_from_joule(acc["delivered_j"]),
                          network_loss=kwh_from_joule(acc["net_loss_j"]))
    ledger.validate()
    return MonthRun(variant=variant, month=month, ledger=ledger, archive=archive,
                    capacity_steps=acc["capacity_steps"],
                    unserved_kwh=kwh_from_joule(acc["unserved_j"]),
                    nonconverged_steps=int(archive.meta.get("nonconverged_steps", 0)))


def compare_variants(scenario: Scenario, variants: list, out_dir=None,
                     progress=None) -> dict:
    """Run every requested variant over the observation months and assemble
    the KPI comparison (with and without electricity sale). Completed
    variants are reported even if a later one fails."""
    from .kpi import (
        AnnuityParams,
        CostBook,
        EmissionFactors,
        annuity,
        emissions,
        extrapolate_ledger,
        heat_production_cost,
        score_variants,
    )

    if len(variants) < 2:
        raise ValueError("need at least two variants to compare")
    factors = EmissionFactors.load(scenario.factors_path)
    costbook = CostBook.load(scenario.costbook_path) if scenario.costbook_path else CostBook()
    params = AnnuityParams()
    weather = read_weather(scenario.weather_path)
    profiles = None
    if scenario.loads_source == "synth":
        profiles = build_profiles(scenario)

    rows = {}
    monthly_heat = {}
    failures = {}
    for variant in variants:
        try:
            ledgers = {}
            extra = {"capacity_steps": 0, "nonconverged_steps": 0}
            for month in scenario.months:
                if progress:
                    progress(f"running {variant} {month} ...")
                mr = run_month(scenario, variant, month, profiles=profiles,
                               weather=weather)
                ledgers[month] = mr.ledger
                extra["capacity_steps"] += mr.capacity_steps
                extra["nonconverged_steps"] += mr.nonconverged_steps
                if out_dir is not None:
                    write_month_artifacts(Path(out_dir) / f"{variant}_{month}",
                                          scenario, mr)
            annual = extrapolate_ledger(ledgers["jan"], ledgers["apr"], ledgers["aug"])
            co2_t = emissions(annual, factors)
            invest = costbook.investment_for(
                variant, scenario.center_config(variant).tank.volume_total)
            a_with = annuity(costbook, annual, params, invest, with_electricity_sale=True)
            a_without = annuity(costbook, annual, params, invest, with_electricity_sale=False)
            q_used = annual.heat_produced
            rows[variant] = {
                "monthly": {m: {
                    "heat_mwh": ledgers[m].heat_produced / 1000.0,
                    "emissions_t": emissions(ledgers[m], factors),
                    "ledger_kwh": dict(sorted(ledgers[m].to_dict().items())),
                } for m in scenario.months},
                "annual": {
                    "heat_mwh": q_used / 1000.0,
                    "heat_delivered_mwh": annual.heat_delivered / 1000.0,
                    "network_loss_mwh": annual.network_loss / 1000.0,
                    "emissions_t": co2_t,
                    "fuel_mwh": annual.fuel_total() / 1000.0,
                    "elec_gen_mwh": annual.elec_gen / 1000.0,
                    "elec_cons_mwh": annual.elec_cons / 1000.0,
                    "elec_sold_mwh": annual.elec_sold / 1000.0,
                    "elec_bought_mwh": annual.elec_bought / 1000.0,
                },
                "economics": {
                    "investment_eur": invest,
                    "annuity_with_sale_eur": a_with,
                    "annuity_without_sale_eur": a_without,
                    "k_with_sale_eur_per_kwh": heat_production_cost(a_with, q_used),
                    "k_without_sale_eur_per_kwh": heat_production_cost(a_without, q_used),
                },
                "events": extra,
            }
            monthly_heat[variant] = {m: rows[variant]["monthly"][m]["heat_mwh"]
                                     for m in scenario.months}
        except Exception as exc:  # keep completed variants in the report
            logger.exception("variant %s failed", variant)
            failures[variant] = f"{type(exc).__name__}: {exc}"

    if not rows:
        raise RuntimeError(f"all variants failed: {failures}")

    reference = "v1" if "v1" in rows else sorted(rows)[0]
    ref_co2 = rows[reference]["annual"]["emissions_t"]
    for v, row in rows.items():
        red = 100.0 * (1.0 - row["annual"]["emissions_t"] / ref_co2) if ref_co2 > 0 else 0.0
        row["reduction_vs_reference_pct"] = red

    score_input = {v: {
        "co2_t_per_a": rows[v]["annual"]["emissions_t"],
        "k_with_sale": rows[v]["economics"]["k_with_sale_eur_per_kwh"],
        "k_without_sale": rows[v]["economics"]["k_without_sale_eur_per_kwh"],
    } for v in rows}
    scores = score_variants(score_input) if len(rows) >= 2 else {}

    report = {
        "scenario": scenario.name,
        "months": list(scenario.months),
        "reference": reference,
        "seed": scenario.seed,
        "variants": rows,
        "scores": scores,
        "monthly_heat_mwh": monthly_heat,
    }
    if failures:
        report["failed_variants"] = failures
    return report


def write_month_artifacts(out_dir, scenario: Scenario, month_run: MonthRun):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    month_run.archive.write(out / "archive.csv")
    ledger = dict(sorted(month_run.ledger.to_dict().items()))
    payload = {
        "variant": month_run.variant,
        "month": month_run.month,
        "ledger_kwh": ledger,
        "capacity_exceeded_steps": month_run.capacity_steps,
        "unserved_kwh": month_run.unserved_kwh,
        "nonconverged_steps": month_run.nonconverged_steps,
    }
    (out / "ledger.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    dump_effective_config(scenario, out / "effective_config.json",
                          variant=month_run.variant)
    return out
