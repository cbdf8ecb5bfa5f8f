#!/usr/bin/env python3
"""Generate the bundled synthetic weather file.

Hourly ambient temperature and horizontal solar irradiance for a moderate
central-European climate, deterministic via a fixed seed. The monthly mean
temperatures are calibrated so the synthetic load generator reproduces the
targeted January/April/August heat splits; they are not observations.

Usage: python3 scripts/make_weather.py [out.csv]
"""

import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

SEED = 20210
START = datetime(2020, 12, 25, tzinfo=timezone.utc)
END = datetime(2022, 1, 5, tzinfo=timezone.utc)

# degC, tuned against the month-by-month heat targets of the district scenario
MONTHLY_MEAN = {
    1: 2.2, 2: 1.2, 3: 6.1, 4: 13.0, 5: 14.0, 6: 17.0,
    7: 19.0, 8: 17.2, 9: 14.5, 10: 10.0, 11: 4.2, 12: 0.6,
}
DIURNAL_AMPLITUDE = 3.5
NOISE_STD = 0.35
NOISE_AR = 0.97


def monthly_base(day_of_year: float) -> float:
    # smooth interpolation between month-center anchors
    centers = []
    for m in range(1, 13):
        start = datetime(2021, m, 1)
        if m < 12:
            nxt = datetime(2021, m + 1, 1)
        else:
            nxt = datetime(2022, 1, 1)
        mid = start + (nxt - start) / 2
        centers.append((mid.timetuple().tm_yday, MONTHLY_MEAN[m]))
    xs = np.array([c[0] for c in centers])
    ys = np.array([c[1] for c in centers])
    xs = np.concatenate([[xs[-1] - 365], xs, [xs[0] + 365]])
    ys = np.concatenate([[ys[-1]], ys, [ys[0]]])
    return float(np.interp(day_of_year, xs, ys))


def main(out_path):
    rng = np.random.default_rng(SEED)
    rows = []
    t = START
    noise = 0.0
    while t < END:
        doy = t.timetuple().tm_yday
        hour = t.hour
        base = monthly_base(doy)
        diurnal = -DIURNAL_AMPLITUDE * np.cos(2 * np.pi * (hour - 14.0) / 24.0)
        noise = NOISE_AR * noise + rng.normal(0.0, NOISE_STD)
        t_amb = base + diurnal + noise

        s_max = 420.0 - 330.0 * np.cos(2 * np.pi * (doy - 172) / 365.0)
        elev = np.sin(np.pi * (hour - 6.0) / 12.0) if 6.0 <= hour <= 18.0 else 0.0
        cloud = min(max(0.75 - 0.35 * rng.normal(), 0.15), 1.0)
        solar = max(0.0, s_max * elev * cloud)

        rows.append(f"{t.strftime('%Y-%m-%dT%H:%M:%S')},{t_amb:.2f},{solar:.1f}")
        t += timedelta(hours=1)

    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("timestamp,t_ambient_degC,solar_w_per_m2\n" + "\n".join(rows) + "\n")
    print(f"wrote {out} ({len(rows)} rows)")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "scenarios/weather_2021.csv")
