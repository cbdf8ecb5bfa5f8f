"""Heat and DHW demand acquisition.

Demand enters the simulation one of two ways: imported per-building profile
files (resampled onto the run grid conserving energy), or a built-in
synthetic generator. The generator produces space heat proportional to the
heating degree minutes below a base temperature, modulated day/night on the
same schedule the room thermostats use, and scaled so the annual integral
hits the design-data demand figure exactly; DHW is a seeded random train of
draw events normalized to a configurable annual energy.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass

import numpy as np

from .core import (
    DhtwinError,
    J_PER_KWH,
    ParseError,
    TimeGrid,
    TimeSeries,
    parse_timestamp,
)

T_BASE_DEFAULT = 15.0
NIGHT_FACTOR_DEFAULT = 0.7
DHW_KWH_PER_100M2_DEFAULT = 500.0


class GridMismatch(DhtwinError):
    """Profile timestamps cannot be mapped onto the requested grid."""


class NegativeDemand(DhtwinError):
    """A demand sample is negative."""


class WeatherGapError(DhtwinError):
    """The weather series does not cover the requested grid."""


@dataclass(frozen=True)
class BuildingArchetype:
    """Design-data demand parameters for one building class."""

    q_h: float = 35.0      # W/m2 design heating power density
    g: float = 0.8         # simultaneity factor
    f: float = 1500.0      # h/a full utilization hours
    a_c: float = 186.8     # m2 conditioned area

    def __post_init__(self):
        if self.q_h <= 0 or self.f <= 0 or self.a_c <= 0:
            raise ValueError("q_h, f and a_c must be positive")
        if not 0.0 < self.g <= 1.0:
            raise ValueError("simultaneity factor must be in (0, 1]")


@dataclass(frozen=True)
class DemandProfile:
    building_id: str
    space: TimeSeries   # W
    dhw: TimeSeries     # W

    def annual_space_kwh(self) -> float:
        return float(np.sum(self.space.values)) * self.space.grid.dt / J_PER_KWH


def annual_heat_demand(q_h: float, a_c: float, g: float, f: float) -> float:
    """Yearly heating energy [kWh/a] from design power density and usage."""
    return q_h * a_c / 1000.0 * g * f


def specific_demand(q_h_kwh: float, a_c: float) -> float:
    """Annual demand per square meter of conditioned area [kWh/(m2 a)]."""
    if a_c <= 0:
        raise ValueError("a_c must be positive")
    return q_h_kwh / a_c


def resample(series: TimeSeries, grid: TimeGrid) -> TimeSeries:
    """Map a series onto another uniform grid, conserving energy.

    Upsampling replicates each sample (zero-order hold); downsampling by an
    integer factor averages. Anything that does not line up is rejected.
    """
    src = series.grid
    if grid.t0 < src.t0 - 1e-6 or grid.t_end > src.t_end + 1e-6:
        raise GridMismatch("target grid extends beyond the source series")
    if src.dt == grid.dt:
        offset = (grid.t0 - src.t0) / src.dt
        if abs(offset - round(offset)) > 1e-9:
            raise GridMismatch("grids are offset by a fraction of a step")
        i0 = int(round(offset))
        return TimeSeries(grid, series.values[i0:i0 + grid.n_steps], unit=series.unit)
    if src.dt > grid.dt:
        factor = src.dt / grid.dt
        if abs(factor - round(factor)) > 1e-9:
            raise GridMismatch(f"source step {src.dt} not a multiple of target {grid.dt}")
        factor = int(round(factor))
        offset = (grid.t0 - src.t0) / grid.dt
        if abs(offset - round(offset)) > 1e-9:
            raise GridMismatch("grids are offset by a fraction of a step")
        i0 = int(round(offset))
        up = np.repeat(series.values, factor)
        return TimeSeries(grid, up[i0:i0 + grid.n_steps], unit=series.unit)
    factor = grid.dt / src.dt
    if abs(factor - round(factor)) > 1e-9:
        raise GridMismatch(f"target step {grid.dt} not a multiple of source {src.dt}")
    factor = int(round(factor))
    offset = (grid.t0 - src.t0) / src.dt
    if abs(offset - round(offset)) > 1e-9:
        raise GridMismatch("grids are offset by a fraction of a step")
    i0 = int(round(offset))
    window = series.values[i0:i0 + grid.n_steps * factor]
    down = window.reshape(grid.n_steps, factor).mean(axis=1)
    return TimeSeries(grid, down, unit=series.unit)


def import_profiles(path, grid: TimeGrid) -> dict[str, DemandProfile]:
    """Read a `timestamp,<id>_heat_W,<id>_dhw_W,...` file onto a grid."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty profile file", line=1) from None
        rows = list(reader)
    if len(header) < 3:
        raise ParseError("expected timestamp plus <id>_heat_W/<id>_dhw_W columns", line=1)
    times = []
    values = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError("row width does not match header", line=lineno)
        try:
            times.append(parse_timestamp(row[0]))
            values.append([float(x) for x in row[1:]])
        except (ValueError, OverflowError) as exc:
            raise ParseError(str(exc), line=lineno) from None
    if not times:
        raise ParseError("no data rows", line=2)
    arr = np.asarray(values)
    if np.any(arr < 0):
        bad = np.argwhere(arr < 0)[0]
        raise NegativeDemand(
            f"negative demand sample in column {header[1 + bad[1]]!r}, row {bad[0] + 2}")
    dt = times[1] - times[0] if len(times) > 1 else 3600.0
    for i in range(1, len(times)):
        if abs(times[i] - times[i - 1] - dt) > 1e-6:
            raise ParseError("timestamps are not uniformly spaced", line=i + 2)
    src_grid = TimeGrid(t0=times[0], dt=dt, n_steps=len(times))

    buildings: dict[str, dict[str, TimeSeries]] = {}
    for col, name in enumerate(header[1:]):
        name = name.strip()
        for suffix, key in (("_heat_W", "space"), ("_dhw_W", "dhw")):
            if name.endswith(suffix):
                bid = name[: -len(suffix)]
                series = TimeSeries(src_grid, arr[:, col], unit="W")
                buildings.setdefault(bid, {})[key] = resample(series, grid)
                break
        else:
            raise ParseError(f"column {name!r} has no _heat_W/_dhw_W suffix", line=1)

    profiles = {}
    for bid, parts in buildings.items():
        if "space" not in parts or "dhw" not in parts:
            raise ParseError(f"building {bid!r} is missing a heat or dhw column", line=1)
        profiles[bid] = DemandProfile(building_id=bid, space=parts["space"],
                                      dhw=parts["dhw"])
    return profiles


def read_weather(path) -> tuple[TimeSeries, TimeSeries]:
    """Read `timestamp,t_ambient_degC,solar_w_per_m2` onto a uniform grid."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty weather file", line=1) from None
        times, t_amb, solar = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 3:
                raise ParseError("expected 3 columns", line=lineno)
            try:
                times.append(parse_timestamp(row[0]))
                t_amb.append(float(row[1]))
                solar.append(float(row[2]))
            except (ValueError, OverflowError) as exc:
                raise ParseError(str(exc), line=lineno) from None
    if len(times) < 2:
        raise ParseError("weather needs at least two rows", line=2)
    dt = times[1] - times[0]
    for i in range(1, len(times)):
        if abs(times[i] - times[i - 1] - dt) > 1e-6:
            raise ParseError("timestamps are not uniformly spaced", line=i + 2)
    grid = TimeGrid(t0=times[0], dt=dt, n_steps=len(times))
    return (TimeSeries(grid, np.asarray(t_amb), unit="degC"),
            TimeSeries(grid, np.asarray(solar), unit="W/m2"))


def stable_seed(base_seed: int, building_id: str) -> int:
    return (int(base_seed) * 1000003 + zlib.crc32(building_id.encode())) % (2**63)


def _year_mask(grid: TimeGrid, year: int) -> np.ndarray:
    from datetime import datetime, timezone

    y0 = datetime(year, 1, 1, tzinfo=timezone.utc).timestamp()
    y1 = datetime(year + 1, 1, 1, tzinfo=timezone.utc).timestamp()
    times = grid.times()
    return (times >= y0) & (times < y1)


def synthesize_profile(archetype: BuildingArchetype, t_ambient: TimeSeries,
                       seed: int, building_id: str = "b", calib_year: int | None = None,
                       t_base: float = T_BASE_DEFAULT,
                       night_factor: float = NIGHT_FACTOR_DEFAULT,
                       dhw_kwh_per_100m2: float = DHW_KWH_PER_100M2_DEFAULT) -> DemandProfile:
    """Degree-minute space heat plus seeded DHW events on the weather grid.

    Space heat follows max(t_base - T_amb, 0) with the night hours damped by
    night_factor, scaled so the integral over the calibration year equals
    the design-data annual demand. DHW draw events are placed by a seeded
    generator with morning/evening weighting and normalized to the annual
    target exactly.
    """
    grid = t_ambient.grid
    if grid.n_steps < 2:
        raise WeatherGapError("weather series too short")
    if calib_year is None:
        from datetime import datetime, timezone

        mid = datetime.fromtimestamp(grid.t0 + 0.5 * grid.n_steps * grid.dt,
                                     tz=timezone.utc)
        calib_year = mid.year
    mask = _year_mask(grid, calib_year)
    if not np.any(mask):
        raise WeatherGapError(f"weather does not cover calibration year {calib_year}")

    hours = (grid.times() % 86400.0) / 3600.0
    modulation = np.where(hours < 7.0, night_factor, 1.0)
    raw = np.maximum(t_base - t_ambient.values, 0.0) * modulation
    target_kwh = annual_heat_demand(archetype.q_h, archetype.a_c, archetype.g,
                                    archetype.f)
    raw_kwh = float(np.sum(raw[mask])) * grid.dt / J_PER_KWH
    scale = target_kwh / raw_kwh if raw_kwh > 0 else 0.0
    space = raw * scale

    dhw = _dhw_events(grid, stable_seed(seed, building_id),
                      dhw_kwh_per_100m2 * archetype.a_c / 100.0, mask)
    return DemandProfile(building_id=building_id,
                         space=TimeSeries(grid, space, unit="W"),
                         dhw=TimeSeries(grid, dhw, unit="W"))


_DRAW_HOUR_WEIGHTS = np.array(
    [0.2, 0.1, 0.1, 0.1, 0.2, 0.5, 1.5, 2.0, 1.5, 1.0, 0.8, 0.8,
     1.0, 0.8, 0.6, 0.6, 0.8, 1.2, 1.8, 2.0, 1.5, 1.0, 0.6, 0.3])


def _dhw_events(grid: TimeGrid, seed: int, annual_kwh: float,
                calib_mask: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n_days = int(np.ceil(grid.n_steps * grid.dt / 86400.0))
    energies = np.zeros(grid.n_steps)
    steps_per_hour = max(1, int(round(3600.0 / grid.dt)))
    p_hour = _DRAW_HOUR_WEIGHTS / _DRAW_HOUR_WEIGHTS.sum()
    for day in range(n_days):
        n_ev = int(rng.poisson(4.0))
        if n_ev == 0:
            continue
        ev_hours = rng.choice(24, size=n_ev, p=p_hour)
        weights = rng.lognormal(mean=0.0, sigma=0.4, size=n_ev)
        for h, w in zip(ev_hours, weights):
            idx = day * 24 * steps_per_hour + int(h) * steps_per_hour
            if idx < grid.n_steps:
                energies[idx:idx + steps_per_hour] += w
    total = float(np.sum(energies[calib_mask])) * grid.dt
    if total > 0:
        energies *= annual_kwh * J_PER_KWH / total
    return energies
