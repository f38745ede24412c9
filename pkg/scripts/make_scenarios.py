#!/usr/bin/env python3
"""Write the bundled scenario files under scenarios/.

reference.json   50 vehicles, 2 fog areas, 4 RSUs per RAT, every service on, 60 s
assist.json      a few CAVs parked next to one mmWave RSU, offered load above capacity
minimal.json     one area, one DSRC RSU, one vehicle
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def reference(seed: int = 7) -> dict:
    rng = random.Random(seed)
    road = 4000.0
    rsus = []
    for rat in ("dsrc", "cv2x", "mmwave"):
        for i, x in enumerate((500.0, 1500.0, 2500.0, 3500.0)):
            rsus.append({"id": f"{rat}-{i}", "rat": rat, "position": [x, 10.0]})
    vehicles = []
    for i in range(50):
        y = (-5.0, 0.0, 5.0)[i % 3]
        x0 = road * (i + 0.5) / 50
        east = i % 2 == 0
        far, near = (road, 0.0) if east else (0.0, road)
        vehicles.append(
            {
                "id": f"v{i:02d}",
                "start": [round(x0, 3), y],
                "route": [[far, y], [near, y], [far, y]],
                "speed_mps": round(rng.uniform(10.0, 25.0), 3),
                "services": ["traffic_planning", "emergency_routing", "multimodal_commuting"],
            }
        )
    return {
        "duration_s": 60.0,
        "seed": 1,
        "fog_areas": [{"id": "A", "center": [1000.0, 0.0]}, {"id": "B", "center": [3000.0, 0.0]}],
        "rsus": rsus,
        "vehicles": vehicles,
        # application-level frames: one map tile / feature batch, one LiDAR sweep chunk
        "payload_bytes": {"base": 300, "enh1": 65536, "enh2": 1048576},
    }


def assist() -> dict:
    vehicles = []
    for i, (x, y) in enumerate(((10.0, 5.0), (12.0, -6.0), (-9.0, 8.0))):
        vehicles.append({"id": f"c{i}", "start": [x, y], "speed_mps": 0.0, "services": ["raw_sensing"]})
    return {
        "duration_s": 10.0,
        "seed": 3,
        "fog_areas": [{"id": "A", "center": [0.0, 0.0]}],
        "rsus": [
            {"id": "dsrc-0", "rat": "dsrc", "position": [0.0, 0.0]},
            {"id": "cv2x-0", "rat": "cv2x", "position": [0.0, 0.0]},
            {"id": "mmw-0", "rat": "mmwave", "position": [0.0, 0.0]},
        ],
        "vehicles": vehicles,
        "services": {"raw_sensing": ["radar_raw"]},
        "payload_bytes": {"enh2": 1048576},
        "policy": {"load_caps_bps": {"mmwave": 1e10}},
    }


def minimal() -> dict:
    return {
        "duration_s": 10.0,
        "fog_areas": [{"id": "A", "center": [0.0, 0.0]}],
        "rsus": [{"id": "r1", "rat": "dsrc", "position": [0.0, 0.0]}],
        "vehicles": [{"id": "v1", "start": [100.0, 0.0], "speed_mps": 10.0, "heading_rad": 0.0}],
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(ROOT / "scenarios"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, data in (("reference", reference()), ("assist", assist()), ("minimal", minimal())):
        (out / f"{name}.json").write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {out / name}.json")


if __name__ == "__main__":
    main()
