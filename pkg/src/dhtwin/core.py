"""Shared physical conventions: fluid properties, simulation clock, time series.

Everything downstream runs on SI units internally (W, J, kg/s, seconds);
temperatures are degrees Celsius throughout because every boundary condition
and setpoint in the domain is specified that way. Energies reported to users
are kWh.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

J_PER_KWH = 3.6e6


class DhtwinError(Exception):
    """Base class for errors raised by this package."""


class OutOfRange(DhtwinError):
    """A time lookup fell outside the grid of a series."""


class ParseError(DhtwinError):
    """A delimited input file could not be parsed.

    Carries the 1-based line number when one is known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonFiniteState(DhtwinError):
    """A simulation state became NaN or infinite."""


@dataclass(frozen=True)
class FluidProps:
    """Heat-carrier properties, constant over the grid's temperature range.

    Defaults are water near 60-80 degC; cp/rho variation over the operating
    band (55-80 degC) is under one percent, so a single value is used.
    """

    cp: float = 4186.0   # J/(kg K)
    rho: float = 985.0   # kg/m3

    def __post_init__(self):
        if not (self.cp > 0 and self.rho > 0):
            raise ValueError("fluid properties must be positive")


WATER = FluidProps()


@dataclass(frozen=True)
class TimeGrid:
    """Fixed-step time grid: t0 epoch seconds, step dt, n_steps samples."""

    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")

    @property
    def t_end(self) -> float:
        return self.t0 + self.n_steps * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps)


@dataclass(frozen=True)
class TimeSeries:
    """Scalar samples on a TimeGrid. Unit is documented per series."""

    grid: TimeGrid
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_steps,):
            raise ValueError(
                f"series length {values.shape} does not match grid n_steps={self.grid.n_steps}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains non-finite samples")
        object.__setattr__(self, "values", values)


def interp_hold(series: TimeSeries, t: float) -> float:
    """Zero-order hold lookup: the sample of the step containing t.

    Raises OutOfRange for t outside [t0, t0 + n_steps*dt).
    """
    g = series.grid
    if not (g.t0 <= t < g.t_end):
        raise OutOfRange(f"t={t} outside grid [{g.t0}, {g.t_end})")
    idx = int((t - g.t0) // g.dt)
    if idx >= g.n_steps:  # guard the float edge just below t_end
        idx = g.n_steps - 1
    return float(series.values[idx])


def kwh_from_joule(e: float) -> float:
    """Convert energy in joules to kilowatt hours."""
    return e / J_PER_KWH


def joule_from_kwh(e: float) -> float:
    return e * J_PER_KWH


def parse_timestamp(text: str) -> float:
    """ISO-8601 timestamp (naive, local civil time) to epoch seconds.

    Naive stamps are interpreted in a fixed offset-free calendar so that
    arithmetic (hour of day, month) is reproducible regardless of host TZ.
    """
    dt = datetime.fromisoformat(text.strip())
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(t: float) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%S")


def hour_of_day(t: float) -> float:
    """Local civil hour in [0, 24) for epoch seconds t."""
    return (t % 86400.0) / 3600.0


def month_of(t: float) -> int:
    return datetime.fromtimestamp(t, tz=timezone.utc).month


_UNIT_SUFFIXES = {"_kW": ("W", 1000.0), "_degC": ("degC", 1.0), "_W": ("W", 1.0)}


def read_timeseries(path) -> TimeSeries:
    """Ingest a delimited `timestamp,value` file onto a uniform grid.

    A `_kW` or `_degC` suffix on the value header declares the unit; values
    are stored in SI (kW converted to W). The timestamps must be uniformly
    spaced with no gaps.
    """
    times = []
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if len(header) < 2:
            raise ParseError("expected header `timestamp,value`", line=1)
        name = header[1].strip()
        unit, factor = "", 1.0
        for suffix, (u, f) in _UNIT_SUFFIXES.items():
            if name.endswith(suffix):
                unit, factor = u, f
                break
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise ParseError("expected two columns", line=lineno)
            try:
                times.append(parse_timestamp(row[0]))
                values.append(float(row[1]) * factor)
            except (ValueError, OverflowError) as exc:
                raise ParseError(str(exc), line=lineno) from None
    if len(times) < 1:
        raise ParseError("no data rows", line=2)
    grid = _grid_from_times(times)
    return TimeSeries(grid=grid, values=np.asarray(values), unit=unit)


def _grid_from_times(times) -> TimeGrid:
    if len(times) == 1:
        return TimeGrid(t0=times[0], dt=3600.0, n_steps=1)
    dt = times[1] - times[0]
    if dt <= 0:
        raise ParseError("timestamps must be strictly increasing", line=3)
    for i in range(1, len(times)):
        if not math.isclose(times[i] - times[i - 1], dt, rel_tol=0, abs_tol=1e-6):
            raise ParseError("timestamps are not uniformly spaced", line=i + 2)
    return TimeGrid(t0=times[0], dt=dt, n_steps=len(times))
