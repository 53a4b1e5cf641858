#!/usr/bin/env python3
"""Regenerate the bundled synthetic town instance (data/sanrocco_synthetic).

The real study network is not published, so this builds a stand-in with an
invented topology that honors every published parameter: 48 origin zones,
8 candidate shelters of 1000 vph each, main-road capacity 1000 vph,
maximum saturation 1.0, 35 mph free-flow speed (links carry length_mi and
let the loader convert), and scenario totals 1300 / 2200 / 2200 / 4000
vehicles. Fully deterministic; running it twice writes identical files.

Layout: a 4x3 arterial grid (two-way), four zones hanging off each grid
node, and eight shelters on the periphery.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "data" / "sanrocco_synthetic"

GRID_COLS = 4
GRID_ROWS = 3
HORIZONTAL_MI = 0.7
VERTICAL_MI = 0.5
ZONES_PER_NODE = 4
# connector lengths cycle per zone so no two zones of a cluster are
# equidistant from everything (breaks logit ties deterministically)
CONNECTOR_CYCLE_MI = (0.12, 0.18, 0.24, 0.3)
CAPACITY_VPH = 1000.0

# shelter id -> (feeding grid nodes, feed length); the south row is the
# riverfront, shelters sit on the periphery with distinct access lengths
SHELTER_FEEDS = {
    "s1": (["m01"], 0.3),
    "s2": (["m09"], 0.3),
    "s3": (["m10", "m11"], 0.45),
    "s4": (["m12"], 0.3),
    "s5": (["m08"], 0.3),
    "s6": (["m04"], 0.3),
    "s7": (["m02", "m03"], 0.25),
    "s8": (["m05"], 0.35),
}
SHELTER_CAPACITY_VPH = 1000.0

# zone groups by the grid node they attach to
DOWNTOWN_NODES = {"m06", "m07"}
RIVERFRONT_NODES = {"m01", "m02", "m03", "m04"}

# per-zone productions by group: (downtown, riverfront, residential)
SCENARIOS = {
    "day": {"total": 1300, "rates": (100, 20, 7)},
    "night": {"total": 2200, "rates": (15, 25, 70)},
    "weekend": {"total": 2200, "rates": (60, 25, 55)},
    "vacation": {"total": 4000, "rates": (200, 90, 40)},
}


def grid_node_id(col: int, row: int) -> str:
    return f"m{row * GRID_COLS + col + 1:02d}"


def build_topology():
    nodes: list[tuple[str, str]] = []
    links: list[tuple[str, str, str, float]] = []  # id, from, to, length_mi
    link_counter = 0

    def add_link(from_id: str, to_id: str, length: float) -> None:
        nonlocal link_counter
        link_counter += 1
        links.append((f"e{link_counter:03d}", from_id, to_id, length))

    for row in range(GRID_ROWS):
        for col in range(GRID_COLS):
            nodes.append((grid_node_id(col, row), "intermediate"))
    for row in range(GRID_ROWS):
        for col in range(GRID_COLS):
            here = grid_node_id(col, row)
            if col + 1 < GRID_COLS:
                east = grid_node_id(col + 1, row)
                add_link(here, east, HORIZONTAL_MI)
                add_link(east, here, HORIZONTAL_MI)
            if row + 1 < GRID_ROWS:
                north = grid_node_id(col, row + 1)
                add_link(here, north, VERTICAL_MI)
                add_link(north, here, VERTICAL_MI)

    zone_home: dict[str, str] = {}
    zone_number = 0
    for row in range(GRID_ROWS):
        for col in range(GRID_COLS):
            anchor = grid_node_id(col, row)
            for slot in range(ZONES_PER_NODE):
                zone_number += 1
                zone = f"z{zone_number:02d}"
                nodes.append((zone, "origin"))
                zone_home[zone] = anchor
                add_link(zone, anchor, CONNECTOR_CYCLE_MI[slot])

    for shelter in sorted(SHELTER_FEEDS):
        nodes.append((shelter, "shelter-candidate"))
        feeds, length = SHELTER_FEEDS[shelter]
        for feed in feeds:
            add_link(feed, shelter, length)

    return nodes, links, zone_home


def zone_group(zone: str, zone_home: dict[str, str]) -> str:
    anchor = zone_home[zone]
    if anchor in DOWNTOWN_NODES:
        return "downtown"
    if anchor in RIVERFRONT_NODES:
        return "riverfront"
    return "residential"


def build_scenario(name: str, zone_home: dict[str, str]) -> dict:
    spec = SCENARIOS[name]
    downtown_rate, riverfront_rate, residential_rate = spec["rates"]
    productions: dict[str, int] = {}
    for zone in sorted(zone_home):
        group = zone_group(zone, zone_home)
        rate = {"downtown": downtown_rate, "riverfront": riverfront_rate,
                "residential": residential_rate}[group]
        productions[zone] = rate
    shortfall = spec["total"] - sum(productions.values())
    assert shortfall >= 0, f"{name}: rates exceed the scenario total"
    for zone in sorted(productions):  # spread any remainder one vehicle at a time
        if shortfall == 0:
            break
        productions[zone] += 1
        shortfall -= 1
    assert sum(productions.values()) == spec["total"]
    return {"name": name, "productions": productions}


CONFIG_TEXT = """\
# synthetic town study configuration
impedance.beta = 10            # strong preference for the nearest shelter
assignment.step_rule = exact-line-search
assignment.gap_tolerance = 1e-4
assignment.max_iterations = 200
# ga block intentionally omitted: defaults are population 20, 50 generations,
# 0.6 reproduction rate, 0.4 mutation probability
"""

README_TEXT = """\
# Synthetic town instance

This instance is SYNTHETIC. The topology (a 4x3 arterial grid with 48
fringe zones and 8 peripheral shelters) is invented; only the headline
parameters are real study values: 48 origin zones, 8 candidate shelters
of 1000 vph each, 1000 vph main-road capacity at 100% acceptable
saturation, 35 mph free-flow speed, and scenario demand totals of
1300 / 2200 / 2200 / 4000 vehicles (day / night / weekend / vacation).

Regenerate with: python scripts/make_sanrocco_synthetic.py
"""


def main() -> None:
    nodes, links, zone_home = build_topology()
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    with (OUT_DIR / "nodes.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", "kind"])
        writer.writerows(nodes)

    with (OUT_DIR / "links.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", "from", "to", "capacity_vph", "length_mi", "max_saturation"])
        for link_id, from_id, to_id, length in links:
            writer.writerow([link_id, from_id, to_id, int(CAPACITY_VPH), length, 1.0])

    with (OUT_DIR / "shelters.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["node_id", "capacity_vph"])
        for shelter in sorted(SHELTER_FEEDS):
            writer.writerow([shelter, int(SHELTER_CAPACITY_VPH)])

    for name in SCENARIOS:
        scenario = build_scenario(name, zone_home)
        (OUT_DIR / f"scenario_{name}.json").write_text(
            json.dumps(scenario, indent=2, sort_keys=True) + "\n"
        )

    (OUT_DIR / "config.txt").write_text(CONFIG_TEXT)
    (OUT_DIR / "README.md").write_text(README_TEXT)
    print(f"wrote {OUT_DIR} ({len(nodes)} nodes, {len(links)} links)")


if __name__ == "__main__":
    main()
