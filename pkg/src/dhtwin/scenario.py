"""Scenario files: schema validation, defaults resolution, effective config.

A scenario is a JSON document with fixed sections (grid, buildings, center,
loads, master, kpi, run). Unknown keys are rejected anywhere in the tree,
and every resolved default lands in the effective-config dump written next
to the run artifacts, so a result directory is reproducible from that dump
alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .building import HiuParams
from .center import BufferTank, CenterConfig, ChpUnit, HeatPumpUnit, PeakBoiler
from .core import DhtwinError, WATER
from .cosim import MasterConfig
from .loads import BuildingArchetype


class SchemaError(DhtwinError):
    """Scenario file violates the schema (CLI exit code 2)."""


MONTH_NUMBERS = {"jan": 1, "apr": 4, "aug": 8}
MONTH_DAYS = {"jan": 31, "apr": 30, "aug": 31}
VARIANTS = ("v1", "v2", "v3", "v4")


def _check_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise SchemaError(f"unknown keys in {where}: {sorted(unknown)}")


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise SchemaError(f"missing required key {key!r} in {where}")
    return d[key]


@dataclass
class BuildingRecord:
    id: str
    archetype: str
    a_c_m2: float
    q_h_w_per_m2: float
    radiator_q_nom_w: float
    buffer_m3: float
    hx_power_w: float

    def demand_archetype(self, arch: BuildingArchetype) -> BuildingArchetype:
        return BuildingArchetype(q_h=self.q_h_w_per_m2, g=arch.g, f=arch.f,
                                 a_c=self.a_c_m2)


@dataclass
class Scenario:
    name: str
    base_dir: Path
    pipe_catalog_path: Path
    segments: list           # (from, to, dn, length_m)
    ground_temp_degc: float
    kfw_per_m: float
    archetypes: dict         # name -> dict of archetype defaults
    buildings: list          # BuildingRecord
    mode: str                # profile | envelope
    center_variant: str | None
    center_overrides: dict
    loads_source: str        # synth | import
    weather_path: Path | None
    profiles_path: Path | None
    seed: int
    dhw_kwh_per_100m2: float
    t_base_degc: float
    night_factor: float
    master: MasterConfig
    factors_path: Path | None
    costbook_path: Path | None
    demand_band: tuple
    months: list
    year: int
    spinup_h: float
    raw: dict = field(repr=False, default_factory=dict)

    def month_window(self, month: str) -> tuple:
        """(t_spinup_start, t0, t1) epoch seconds for one observation month."""
        from .core import parse_timestamp

        m = MONTH_NUMBERS[month]
        t0 = parse_timestamp(f"{self.year}-{m:02d}-01T00:00:00")
        t1 = t0 + MONTH_DAYS[month] * 86400.0
        return t0 - self.spinup_h * 3600.0, t0, t1

    def center_config(self, variant: str) -> CenterConfig:
        return _center_config(variant, self.center_overrides)


_ARCH_KEYS = {"q_h_w_per_m2", "g", "f_h_per_a", "a_c_m2", "radiator_q_nom_w",
              "buffer_m3", "hx_power_w"}
_RECORD_KEYS = {"id", "archetype", "a_c_m2", "q_h_w_per_m2", "radiator_q_nom_w",
                "buffer_m3", "hx_power_w"}

DEFAULT_ARCHETYPE = {
    "q_h_w_per_m2": 35.0, "g": 0.8, "f_h_per_a": 1500.0, "a_c_m2": 186.8,
    "radiator_q_nom_w": 8000.0, "buffer_m3": 0.3, "hx_power_w": None,
}


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read scenario: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaError("scenario root must be an object")
    _check_keys(raw, {"name", "grid", "buildings", "center", "loads", "master",
                      "kpi", "run"}, "scenario")
    base = path.parent

    grid = _require(raw, "grid", "scenario")
    _check_keys(grid, {"pipe_catalog", "segments", "ground_temp_degc", "kfw_per_m"},
                "grid")
    segments = []
    for i, seg in enumerate(_require(grid, "segments", "grid")):
        _check_keys(seg, {"from", "to", "dn", "length_m"}, f"grid.segments[{i}]")
        segments.append((_require(seg, "from", "segment"), _require(seg, "to", "segment"),
                         _require(seg, "dn", "segment"), float(_require(seg, "length_m", "segment"))))

    bsec = _require(raw, "buildings", "scenario")
    _check_keys(bsec, {"archetypes", "records", "mode"}, "buildings")
    archetypes = {}
    for name, arch in bsec.get("archetypes", {}).items():
        _check_keys(arch, _ARCH_KEYS, f"archetypes[{name}]")
        merged = dict(DEFAULT_ARCHETYPE)
        merged.update(arch)
        archetypes[name] = merged
    if "default" not in archetypes:
        archetypes["default"] = dict(DEFAULT_ARCHETYPE)
    records = []
    seen_ids = set()
    for i, rec in enumerate(bsec.get("records", [])):
        _check_keys(rec, _RECORD_KEYS, f"buildings.records[{i}]")
        bid = _require(rec, "id", "building record")
        if bid in seen_ids:
            raise SchemaError(f"duplicate building id {bid!r}")
        seen_ids.add(bid)
        arch_name = rec.get("archetype", "default")
        if arch_name not in archetypes:
            raise SchemaError(f"building {bid!r} references unknown archetype {arch_name!r}")
        arch = archetypes[arch_name]
        a_c = float(rec.get("a_c_m2", arch["a_c_m2"]))
        q_nom = rec.get("radiator_q_nom_w", arch["radiator_q_nom_w"])
        q_nom = float(q_nom) if q_nom is not None else max(35.0 * a_c * 1.2, 4000.0)
        hx = rec.get("hx_power_w", arch["hx_power_w"])
        hx = float(hx) if hx is not None else max(2.2 * float(rec.get("q_h_w_per_m2", arch["q_h_w_per_m2"])) * a_c, 12e3)
        records.append(BuildingRecord(
            id=bid, archetype=arch_name, a_c_m2=a_c,
            q_h_w_per_m2=float(rec.get("q_h_w_per_m2", arch["q_h_w_per_m2"])),
            radiator_q_nom_w=q_nom,
            buffer_m3=float(rec.get("buffer_m3", arch["buffer_m3"])),
            hx_power_w=hx))
    mode = bsec.get("mode", "profile")
    if mode not in ("profile", "envelope"):
        raise SchemaError(f"buildings.mode must be profile or envelope, got {mode!r}")

    csec = raw.get("center", {})
    _check_keys(csec, {"variant", "chp", "boiler", "hp", "tank", "t_hp_stage",
                       "demand_filter_tau", "tank_gain"}, "center")
    variant = csec.get("variant")
    if variant is not None and variant not in VARIANTS:
        raise SchemaError(f"center.variant must be one of {VARIANTS}, got {variant!r}")
    overrides = {k: v for k, v in csec.items() if k != "variant"}
    _validate_center_overrides(overrides)

    lsec = _require(raw, "loads", "scenario")
    _check_keys(lsec, {"source", "weather", "profiles", "seed", "dhw_kwh_per_100m2",
                       "t_base_degc", "night_factor"}, "loads")
    source = lsec.get("source", "synth")
    if source not in ("synth", "import"):
        raise SchemaError(f"loads.source must be synth or import, got {source!r}")
    weather = lsec.get("weather")
    profiles = lsec.get("profiles")
    if source == "synth" and weather is None:
        raise SchemaError("loads.source synth requires loads.weather")
    if source == "import" and profiles is None:
        raise SchemaError("loads.source import requires loads.profiles")

    msec = raw.get("master", {})
    _check_keys(msec, {"dt_s", "scheme", "max_iterations", "relaxation",
                       "tol_temp_k", "tol_flow_kg_s", "on_nonconvergence"}, "master")
    try:
        master = MasterConfig(
            dt=float(msec.get("dt_s", 60.0)),
            scheme=msec.get("scheme", "gauss_seidel"),
            max_iterations=int(msec.get("max_iterations", 5)),
            relaxation=float(msec.get("relaxation", 1.0)),
            tol_temp=float(msec.get("tol_temp_k", 0.01)),
            tol_flow=float(msec.get("tol_flow_kg_s", 1e-4)),
            on_nonconvergence=msec.get("on_nonconvergence", "warn"))
    except ValueError as exc:
        raise SchemaError(f"master: {exc}") from None

    ksec = raw.get("kpi", {})
    _check_keys(ksec, {"factors", "costbook", "demand_band_kwh_m2a"}, "kpi")
    band = ksec.get("demand_band_kwh_m2a", [40.0, 44.0])
    if not (isinstance(band, list) and len(band) == 2 and band[0] < band[1]):
        raise SchemaError("kpi.demand_band_kwh_m2a must be [low, high]")

    rsec = raw.get("run", {})
    _check_keys(rsec, {"months", "year", "spinup_h"}, "run")
    months = rsec.get("months", ["jan", "apr", "aug"])
    for m in months:
        if m not in MONTH_NUMBERS:
            raise SchemaError(f"run.months entries must be jan/apr/aug, got {m!r}")

    if not records:
        raise SchemaError("buildings.records must not be empty")

    scenario = Scenario(
        name=raw.get("name", path.stem),
        base_dir=base,
        pipe_catalog_path=base / _require(grid, "pipe_catalog", "grid"),
        segments=segments,
        ground_temp_degc=float(grid.get("ground_temp_degc", 10.0)),
        kfw_per_m=float(grid.get("kfw_per_m", 50.0)),
        archetypes=archetypes,
        buildings=records,
        mode=mode,
        center_variant=variant,
        center_overrides=overrides,
        loads_source=source,
        weather_path=(base / weather) if weather else None,
        profiles_path=(base / profiles) if profiles else None,
        seed=int(lsec.get("seed", 20210)),
        dhw_kwh_per_100m2=float(lsec.get("dhw_kwh_per_100m2", 500.0)),
        t_base_degc=float(lsec.get("t_base_degc", 15.0)),
        night_factor=float(lsec.get("night_factor", 0.7)),
        master=master,
        factors_path=(base / ksec["factors"]) if "factors" in ksec else None,
        costbook_path=(base / ksec["costbook"]) if "costbook" in ksec else None,
        demand_band=(float(band[0]), float(band[1])),
        months=list(months),
        year=int(rsec.get("year", 2021)),
        spinup_h=float(rsec.get("spinup_h", 48.0)),
        raw=raw)
    return scenario


_CENTER_SUBKEYS = {
    "chp": {"q_max_w", "sigma", "eta_total", "fuel", "min_part_load"},
    "boiler": {"q_max_w", "eta", "fuel"},
    "hp": {"kind", "q_max_w", "carnot_eta", "t_source_ground_degc", "n_probes",
           "probe_spacing_m", "max_extraction_per_probe_w"},
    "tank": {"volume_each_m3", "n_tanks", "n_layers", "ua_standing_w_per_k",
             "t_amb_degc"},
}


def _validate_center_overrides(overrides: dict):
    for key, sub in overrides.items():
        if key in _CENTER_SUBKEYS:
            _check_keys(sub, _CENTER_SUBKEYS[key], f"center.{key}")
        elif key in ("t_hp_stage", "demand_filter_tau", "tank_gain"):
            float(sub)
        else:
            raise SchemaError(f"unknown center key {key!r}")


def _center_config(variant: str, overrides: dict) -> CenterConfig:
    cfg = CenterConfig.for_variant(variant)
    if "chp" in overrides and cfg.chp is not None:
        o = overrides["chp"]
        cfg.chp = ChpUnit(
            q_max=float(o.get("q_max_w", cfg.chp.q_max)),
            sigma=float(o.get("sigma", cfg.chp.sigma)),
            eta_total=float(o.get("eta_total", cfg.chp.eta_total)),
            fuel=o.get("fuel", cfg.chp.fuel),
            min_part_load=float(o.get("min_part_load", cfg.chp.min_part_load)))
    if "boiler" in overrides and cfg.boiler is not None:
        o = overrides["boiler"]
        cfg.boiler = PeakBoiler(
            q_max=float(o.get("q_max_w", cfg.boiler.q_max)),
            eta=float(o.get("eta", cfg.boiler.eta)),
            fuel=o.get("fuel", cfg.boiler.fuel))
    if "hp" in overrides and cfg.hp is not None:
        o = overrides["hp"]
        cfg.hp = HeatPumpUnit(
            kind=o.get("kind", cfg.hp.kind),
            q_max=float(o.get("q_max_w", cfg.hp.q_max)),
            carnot_eta=float(o.get("carnot_eta", cfg.hp.carnot_eta)),
            t_source_ground=float(o.get("t_source_ground_degc", cfg.hp.t_source_ground)),
            n_probes=int(o.get("n_probes", cfg.hp.n_probes)),
            probe_spacing_m=float(o.get("probe_spacing_m", cfg.hp.probe_spacing_m)),
            max_extraction_per_probe=float(o.get("max_extraction_per_probe_w",
                                                 cfg.hp.max_extraction_per_probe)))
    if "tank" in overrides:
        o = overrides["tank"]
        cfg.tank = BufferTank(
            volume_each=float(o.get("volume_each_m3", cfg.tank.volume_each)),
            n_tanks=int(o.get("n_tanks", cfg.tank.n_tanks)),
            n_layers=int(o.get("n_layers", cfg.tank.n_layers)),
            ua_standing=float(o.get("ua_standing_w_per_k", cfg.tank.ua_standing)),
            t_amb=float(o.get("t_amb_degc", cfg.tank.t_amb)))
    if "t_hp_stage" in overrides:
        cfg.t_hp_stage = float(overrides["t_hp_stage"])
    if "demand_filter_tau" in overrides:
        cfg.demand_filter_tau = float(overrides["demand_filter_tau"])
    if "tank_gain" in overrides:
        cfg.tank_gain = float(overrides["tank_gain"])
    return cfg


def effective_config(scenario: Scenario, variant: str | None = None) -> dict:
    """Every default resolved, for the reproducibility dump."""
    cfgs = {}
    for v in ([variant] if variant else VARIANTS):
        c = scenario.center_config(v)
        cfgs[v] = {
            "tank": {"volume_each_m3": c.tank.volume_each, "n_tanks": c.tank.n_tanks,
                     "n_layers": c.tank.n_layers,
                     "ua_standing_w_per_k": c.tank.ua_standing,
                     "t_amb_degc": c.tank.t_amb},
            "chp": None if c.chp is None else {
                "q_max_w": c.chp.q_max, "sigma": c.chp.sigma,
                "eta_total": c.chp.eta_total, "fuel": c.chp.fuel,
                "min_part_load": c.chp.min_part_load},
            "boiler": None if c.boiler is None else {
                "q_max_w": c.boiler.q_max, "eta": c.boiler.eta,
                "fuel": c.boiler.fuel},
            "hp": None if c.hp is None else {
                "kind": c.hp.kind, "q_max_w": c.hp.q_max,
                "carnot_eta": c.hp.carnot_eta,
                "t_source_ground_degc": c.hp.t_source_ground,
                "n_probes": c.hp.n_probes,
                "probe_spacing_m": c.hp.probe_spacing_m,
                "max_extraction_per_probe_w": c.hp.max_extraction_per_probe},
            "t_hp_stage_degc": c.t_hp_stage,
            "demand_filter_tau_s": c.demand_filter_tau,
            "tank_gain_w_per_k": c.tank_gain,
            "supply_setpoint_winter_degc": 80.0,
            "supply_setpoint_summer_degc": c.supply_setpoint("summer"),
            "band_winter_degc": list(c.band_winter),
            "band_summer_degc": list(c.band_summer),
        }
    hiu_defaults = HiuParams()
    return {
        "name": scenario.name,
        "grid": {
            "pipe_catalog": str(scenario.pipe_catalog_path),
            "ground_temp_degc": scenario.ground_temp_degc,
            "kfw_per_m": scenario.kfw_per_m,
            "segments": [{"from": a, "to": b, "dn": dn, "length_m": L}
                         for a, b, dn, L in scenario.segments],
        },
        "buildings": {
            "mode": scenario.mode,
            "records": [{
                "id": r.id, "archetype": r.archetype, "a_c_m2": r.a_c_m2,
                "q_h_w_per_m2": r.q_h_w_per_m2,
                "radiator_q_nom_w": r.radiator_q_nom_w,
                "buffer_m3": r.buffer_m3, "hx_power_w": r.hx_power_w,
            } for r in scenario.buildings],
            "archetypes": scenario.archetypes,
            "hiu_defaults": {
                "hx_effectiveness": hiu_defaults.hx_effectiveness,
                "t_return_set_degc": hiu_defaults.t_return_set,
                "charge_on_degc": hiu_defaults.charge_on,
                "charge_off_degc": hiu_defaults.charge_off,
                "buffer_ua_w_per_k": hiu_defaults.buffer_ua,
                "pi_kp_kg_s_per_k": hiu_defaults.pi_kp,
                "pi_ki_kg_s_per_ks": hiu_defaults.pi_ki,
                "n_layers": hiu_defaults.n_layers,
            },
        },
        "center": cfgs,
        "loads": {
            "source": scenario.loads_source,
            "weather": str(scenario.weather_path) if scenario.weather_path else None,
            "profiles": str(scenario.profiles_path) if scenario.profiles_path else None,
            "seed": scenario.seed,
            "dhw_kwh_per_100m2": scenario.dhw_kwh_per_100m2,
            "t_base_degc": scenario.t_base_degc,
            "night_factor": scenario.night_factor,
        },
        "master": {
            "dt_s": scenario.master.dt, "scheme": scenario.master.scheme,
            "max_iterations": scenario.master.max_iterations,
            "relaxation": scenario.master.relaxation,
            "tol_temp_k": scenario.master.tol_temp,
            "tol_flow_kg_s": scenario.master.tol_flow,
            "on_nonconvergence": scenario.master.on_nonconvergence,
        },
        "kpi": {
            "factors": str(scenario.factors_path) if scenario.factors_path else None,
            "costbook": str(scenario.costbook_path) if scenario.costbook_path else None,
            "demand_band_kwh_m2a": list(scenario.demand_band),
        },
        "run": {"months": scenario.months, "year": scenario.year,
                "spinup_h": scenario.spinup_h},
        "fluid": {"cp_j_per_kgk": WATER.cp, "rho_kg_per_m3": WATER.rho},
    }


def dump_effective_config(scenario: Scenario, path, variant=None):
    cfg = effective_config(scenario, variant)
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return cfg
