"""Energy ledger aggregation, CO2-equivalent accounting, annuity economics.

Emission factors and cost figures are configuration, not constants: the
shipped `factors/paper2021.cfg` is back-fitted (see scripts/) and flagged as
such, and the cost book carries representative 2024 numbers. Heat pumps are
charged per kWh of produced heat; HP heat produced in macro steps whose
electricity demand was fully covered by concurrent CHP generation is exempt,
since the CHP fuel already carries those emissions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .core import DhtwinError, ParseError


class ZeroHeat(DhtwinError):
    """Heat production cost is undefined without delivered heat."""


LEDGER_FIELDS = (
    "fuel_ng", "fuel_bm", "fuel_h2",
    "heat_chp", "heat_boiler", "heat_hp", "heat_produced",
    "heat_delivered", "network_loss", "tank_loss",
    "elec_gen", "elec_cons", "elec_sold", "elec_bought",
    "hp_heat_covered", "hp_heat_uncovered",
)


@dataclass
class EnergyLedger:
    """Time-integrated energy accounting for one run window, in kWh."""

    fuel_ng: float = 0.0
    fuel_bm: float = 0.0
    fuel_h2: float = 0.0
    heat_chp: float = 0.0
    heat_boiler: float = 0.0
    heat_hp: float = 0.0
    heat_produced: float = 0.0
    heat_delivered: float = 0.0
    network_loss: float = 0.0
    tank_loss: float = 0.0
    elec_gen: float = 0.0
    elec_cons: float = 0.0
    elec_sold: float = 0.0
    elec_bought: float = 0.0
    hp_heat_covered: float = 0.0
    hp_heat_uncovered: float = 0.0

    def validate(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v < -1e-9:
                raise ValueError(f"ledger field {f.name} negative: {v}")
        if self.elec_sold > self.elec_gen + 1e-6:
            raise ValueError("elec_sold exceeds elec_gen")
        if self.heat_delivered > self.heat_produced * (1 + 1e-6) + 1e-6:
            raise ValueError("heat delivered exceeds heat produced")

    def fuel_total(self) -> float:
        return self.fuel_ng + self.fuel_bm + self.fuel_h2

    def scaled(self, factor: float) -> "EnergyLedger":
        return EnergyLedger(**{f.name: getattr(self, f.name) * factor
                               for f in fields(self)})

    def plus(self, other: "EnergyLedger") -> "EnergyLedger":
        return EnergyLedger(**{f.name: getattr(self, f.name) + getattr(other, f.name)
                               for f in fields(self)})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyLedger":
        known = {f.name for f in fields(cls)}
        return cls(**{k: float(v) for k, v in d.items() if k in known})


@dataclass(frozen=True)
class EmissionFactors:
    """kg CO2e per MWh of fuel (or grid electricity); HP factor per kWh heat."""

    ng_kg_per_mwh: float
    bm_kg_per_mwh: float
    h2_kg_per_mwh: float
    grid_kg_per_mwh: float
    hp_heat_kg_per_kwh: float = 0.028

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"emission factor {f.name} must be >= 0")

    @classmethod
    def load(cls, path) -> "EmissionFactors":
        kv = read_kv(path)
        return cls(
            ng_kg_per_mwh=float(kv["ng_kg_per_mwh"]),
            bm_kg_per_mwh=float(kv["bm_kg_per_mwh"]),
            h2_kg_per_mwh=float(kv["h2_kg_per_mwh"]),
            grid_kg_per_mwh=float(kv.get("grid_kg_per_mwh", 0.0)),
            hp_heat_kg_per_kwh=float(kv.get("hp_heat_kg_per_kwh", 0.028)),
        )


@dataclass(frozen=True)
class CostBook:
    """Investment and price inputs. Representative values, not survey data,
    except the electricity sell tariff (April 2024 local basic supply)."""

    invest_chp_ng: float = 260000.0
    invest_chp_h2: float = 420000.0
    invest_boiler: float = 70000.0
    invest_hp_ground: float = 390000.0
    invest_hp_air: float = 250000.0
    invest_tank_per_m3: float = 1800.0
    om_frac_per_a: float = 0.03          # of investment, per year
    fuel_ng_eur_per_kwh: float = 0.085
    fuel_bm_eur_per_kwh: float = 0.140
    fuel_h2_eur_per_kwh: float = 0.240
    elec_buy_eur_per_kwh: float = 0.220
    elec_sell_eur_per_kwh: float = 0.3986

    @classmethod
    def load(cls, path) -> "CostBook":
        kv = read_kv(path)
        kwargs = {}
        for f in fields(cls):
            if f.name in kv:
                kwargs[f.name] = float(kv[f.name])
        return cls(**kwargs)

    def investment_for(self, variant: str, tank_m3: float) -> float:
        tank = self.invest_tank_per_m3 * tank_m3
        if variant in ("v1", "v2"):
            return self.invest_chp_ng + self.invest_boiler + tank
        if variant == "v3":
            return self.invest_hp_ground + self.invest_boiler + tank
        if variant == "v4":
            return self.invest_chp_h2 + self.invest_hp_air + tank
        raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class AnnuityParams:
    lifetime_a: int = 15
    q: float = 1.0303        # discount factor; imputed interest 3.03 %/a

    def __post_init__(self):
        if self.lifetime_a < 1:
            raise ValueError("lifetime must be >= 1 year")
        if self.q <= 1.0:
            raise ValueError("discount factor must exceed 1")


def annuity_factor(q: float, lifetime_a: int) -> float:
    """Capital-recovery factor (q-1) q^T / (q^T - 1)."""
    qt = q ** lifetime_a
    return (q - 1.0) * qt / (qt - 1.0)


def annuity(costbook: CostBook, ledger: EnergyLedger, params: AnnuityParams,
            investment_eur: float, with_electricity_sale: bool = True) -> float:
    """Equivalent annual cost [EUR/a] of investment plus recurring costs.

    The ledger must cover one year. Costs are positive; sold electricity
    reduces the annuity at the sell tariff when enabled.
    """
    a = annuity_factor(params.q, params.lifetime_a)
    capital = investment_eur * a
    om = investment_eur * costbook.om_frac_per_a
    fuel = (ledger.fuel_ng * costbook.fuel_ng_eur_per_kwh
            + ledger.fuel_bm * costbook.fuel_bm_eur_per_kwh
            + ledger.fuel_h2 * costbook.fuel_h2_eur_per_kwh)
    elec = ledger.elec_bought * costbook.elec_buy_eur_per_kwh
    revenue = ledger.elec_sold * costbook.elec_sell_eur_per_kwh if with_electricity_sale else 0.0
    return capital + om + fuel + elec - revenue


def heat_production_cost(a_n: float, q_used_kwh: float) -> float:
    """Levelized heat cost k = |A_n| / Q_used [EUR/kWh]."""
    if a_n == 0.0:
        return 0.0
    if q_used_kwh <= 0.0:
        raise ZeroHeat("no useful heat to carry the annual cost")
    return abs(a_n) / q_used_kwh


def emissions(ledger: EnergyLedger, factors: EmissionFactors) -> float:
    """CO2 equivalent [t] of one ledger window.

    Fuel emissions per carrier plus the per-heat HP charge on the heat that
    was not covered by concurrent CHP electricity (that coverage split is
    accumulated per macro step during the run).
    """
    fuel_kg = (ledger.fuel_ng / 1000.0 * factors.ng_kg_per_mwh
               + ledger.fuel_bm / 1000.0 * factors.bm_kg_per_mwh
               + ledger.fuel_h2 / 1000.0 * factors.h2_kg_per_mwh)
    hp_kg = ledger.hp_heat_uncovered * factors.hp_heat_kg_per_kwh
    return (fuel_kg + hp_kg) / 1000.0


def seasonal_extrapolate(jan: float, apr: float, aug: float) -> float:
    """Annualize three observation months: January stands for the two
    coldest months, April for the four transitional, August for the six
    warmest."""
    return 2.0 * jan + 4.0 * apr + 6.0 * aug


def extrapolate_ledger(jan: EnergyLedger, apr: EnergyLedger,
                       aug: EnergyLedger) -> EnergyLedger:
    return jan.scaled(2.0).plus(apr.scaled(4.0)).plus(aug.scaled(6.0))


def score_variants(kpi_rows: dict[str, dict[str, float]]) -> dict[str, dict[str, float]]:
    """Rank scores per aspect: best value scores 4, next 3, and so on; ties
    share the higher score. All aspects are lower-is-better. Adds a 'total'
    per variant."""
    if len(kpi_rows) < 2:
        raise ValueError("need at least two variants to score")
    aspects = None
    for row in kpi_rows.values():
        if aspects is None:
            aspects = list(row.keys())
        elif list(row.keys()) != aspects:
            raise ValueError("variants carry different KPI columns")
    scores: dict[str, dict[str, float]] = {v: {} for v in kpi_rows}
    for aspect in aspects:
        values = {v: kpi_rows[v][aspect] for v in kpi_rows}
        for v in kpi_rows:
            better = sum(1 for other in values.values() if other < values[v])
            scores[v][aspect] = 4 - better
    for v in scores:
        scores[v]["total"] = float(sum(scores[v][a] for a in aspects))
    return scores


def render_kpi_json(report: dict) -> str:
    """Canonical machine-readable form; stable byte-for-byte for one input."""
    import json

    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def render_kpi_table(report: dict) -> str:
    """Human-readable aligned table of the variant comparison."""
    lines = []
    lines.append(f"Variant comparison: {report['scenario']}")
    lines.append(f"observation months: {', '.join(report['months'])}; "
                 f"annualization weights 2/4/6; reference {report['reference']}")
    lines.append("")
    header = (f"{'variant':<8}{'heat':>9}{'CO2e':>9}{'redux':>8}{'fuel':>9}"
              f"{'e_gen':>8}{'e_sold':>8}{'A_n+s':>10}{'k+s':>8}{'A_n-s':>10}"
              f"{'k-s':>8}{'score':>7}")
    units = (f"{'':<8}{'MWh/a':>9}{'t/a':>9}{'%':>8}{'MWh/a':>9}"
             f"{'MWh/a':>8}{'MWh/a':>8}{'EUR/a':>10}{'ct/kWh':>8}{'EUR/a':>10}"
             f"{'ct/kWh':>8}{'':>7}")
    lines.append(header)
    lines.append(units)
    lines.append("-" * len(header))
    for v in sorted(report["variants"]):
        row = report["variants"][v]
        a = row["annual"]
        e = row["economics"]
        s = report["scores"].get(v, {}).get("total", 0)
        lines.append(
            f"{v:<8}"
            f"{a['heat_mwh']:>9.1f}"
            f"{a['emissions_t']:>9.2f}"
            f"{row['reduction_vs_reference_pct']:>8.1f}"
            f"{a['fuel_mwh']:>9.1f}"
            f"{a['elec_gen_mwh']:>8.1f}"
            f"{a['elec_sold_mwh']:>8.1f}"
            f"{e['annuity_with_sale_eur']:>10.0f}"
            f"{e['k_with_sale_eur_per_kwh'] * 100:>8.2f}"
            f"{e['annuity_without_sale_eur']:>10.0f}"
            f"{e['k_without_sale_eur_per_kwh'] * 100:>8.2f}"
            f"{s:>7.0f}")
    if report["scores"]:
        lines.append("")
        lines.append("scores (4 = best per aspect): " + "; ".join(
            f"{v}: " + ", ".join(f"{k}={report['scores'][v][k]:.0f}"
                                 for k in sorted(report["scores"][v]) if k != "total")
            for v in sorted(report["scores"])))
    per_month = report.get("monthly_heat_mwh")
    if per_month:
        lines.append("")
        lines.append("monthly heat produced [MWh]: " + "; ".join(
            f"{v}: " + "/".join(f"{per_month[v][m]:.1f}" for m in report["months"])
            for v in sorted(per_month)))
    return "\n".join(lines) + "\n"


def read_kv(path) -> dict:
    """Flat `key = value` text with # comments."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key = value, got {line!r}", line=lineno)
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_kv(path, entries: dict, header: str = ""):
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for k, v in entries.items():
            fh.write(f"{k} = {v}\n")
