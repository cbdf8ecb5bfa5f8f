#!/usr/bin/env python3
"""Generate the bundled scenario files.

district29.json: 29 buildings on a two-street tree, profile-driven loads.
validation3.json: three reference buildings in envelope (thermostat) mode.

Building areas, street lengths and the DHW rate were calibrated so a v1 run
reproduces the targeted monthly heat production (86 / 47 / ~30.5 MWh for
January / April / August). Regenerating overwrites the calibrated files.

Usage: python3 scripts/make_district.py [scenarios/]
"""

import json
import sys
from pathlib import Path

SEGMENTS = [
    ("center", "j1", "DN100", 160.0),
    ("j1", "jA", "DN80", 120.0),
    ("jA", "jB", "DN65", 110.0),
    ("jB", "jC", "DN50", 95.0),
    ("j1", "jD", "DN80", 120.0),
    ("jD", "jE", "DN65", 110.0),
    ("jE", "jF", "DN50", 95.0),
]

# (junction, count, conditioned area m2)
CLUSTERS = [
    ("j1", 5, [460.0, 460.0, 460.0, 220.0, 220.0]),
    ("jA", 5, [460.0, 460.0, 220.0, 200.0, 160.0]),
    ("jB", 4, [220.0, 200.0, 160.0, 160.0]),
    ("jC", 3, [160.0, 160.0, 160.0]),
    ("jD", 4, [460.0, 460.0, 220.0, 200.0]),
    ("jE", 4, [220.0, 200.0, 160.0, 160.0]),
    ("jF", 4, [160.0, 160.0, 160.0, 150.0]),
]

SERVICE_DN = {True: "DN40", False: "DN32"}  # large buildings get DN40


def district():
    segments = [dict(zip(("from", "to", "dn", "length_m"), s)) for s in SEGMENTS]
    records = []
    idx = 1
    for junction, count, areas in CLUSTERS:
        assert len(areas) == count
        for a_c in areas:
            bid = f"b{idx:02d}"
            segments.append({
                "from": junction, "to": bid,
                "dn": SERVICE_DN[a_c >= 400.0],
                "length_m": 12.0 + (idx % 5) * 2.0,
            })
            records.append({
                "id": bid,
                "archetype": "mfh" if a_c >= 400.0 else ("row" if a_c >= 200.0 else "sfh"),
                "a_c_m2": a_c,
            })
            idx += 1
    total_area = sum(r["a_c_m2"] for r in records)
    print(f"{len(records)} buildings, {total_area:.0f} m2 conditioned area")

    return {
        "name": "district29",
        "grid": {
            "pipe_catalog": "pipes_catalog.csv",
            "ground_temp_degc": 10.0,
            "segments": segments,
        },
        "buildings": {
            "mode": "profile",
            "archetypes": {
                "sfh": {"a_c_m2": 170.0, "buffer_m3": 0.5},
                "row": {"a_c_m2": 210.0, "buffer_m3": 0.6},
                "mfh": {"a_c_m2": 460.0, "buffer_m3": 1.2},
            },
            "records": records,
        },
        "center": {},
        "loads": {
            "source": "synth",
            "weather": "weather_2021.csv",
            "seed": 20210,
            "dhw_kwh_per_100m2": 1280.0,
        },
        "master": {"max_iterations": 1, "tol_temp_k": 2.0, "tol_flow_kg_s": 0.2},
        "kpi": {
            "factors": "../factors/paper2021.cfg",
            "costbook": "../factors/costbook2024.cfg",
        },
        "run": {"months": ["jan", "apr", "aug"], "year": 2021, "spinup_h": 48.0},
    }


def validation():
    segments = [
        {"from": "center", "to": "jV", "dn": "DN65", "length_m": 120.0},
        {"from": "jV", "to": "b1", "dn": "DN32", "length_m": 15.0},
        {"from": "jV", "to": "b2", "dn": "DN32", "length_m": 18.0},
        {"from": "jV", "to": "b3", "dn": "DN32", "length_m": 20.0},
    ]
    records = [{"id": f"b{i}", "archetype": "ref"} for i in (1, 2, 3)]
    return {
        "name": "validation3",
        "grid": {
            "pipe_catalog": "pipes_catalog.csv",
            "ground_temp_degc": 10.0,
            "segments": segments,
        },
        "buildings": {
            "mode": "envelope",
            "archetypes": {
                "ref": {"a_c_m2": 186.8, "radiator_q_nom_w": 9000.0,
                        "buffer_m3": 0.3},
            },
            "records": records,
        },
        "center": {"variant": "v1"},
        "loads": {
            "source": "synth",
            "weather": "weather_2021.csv",
            "seed": 20210,
            "dhw_kwh_per_100m2": 500.0,
        },
        "master": {"max_iterations": 1, "tol_temp_k": 2.0, "tol_flow_kg_s": 0.2},
        "kpi": {
            "factors": "../factors/paper2021.cfg",
            "costbook": "../factors/costbook2024.cfg",
        },
        "run": {"months": ["jan"], "year": 2021, "spinup_h": 48.0},
    }


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "district29.json").write_text(json.dumps(district(), indent=2) + "\n")
    (out / "validation3.json").write_text(json.dumps(validation(), indent=2) + "\n")
    print(f"wrote {out}/district29.json and {out}/validation3.json")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "scenarios")
