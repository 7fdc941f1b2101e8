#!/usr/bin/env python3
"""Regenerates the bundled feeders in data/."""
import json
import pathlib

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"
ABC = ["A", "B", "C"]

# IEEE 13-node test feeder line configurations, ohm/mile
R601 = [[0.3465, 0.1560, 0.1580], [0.1560, 0.3375, 0.1535], [0.1580, 0.1535, 0.3414]]
X601 = [[1.0179, 0.5017, 0.4236], [0.5017, 1.0478, 0.3849], [0.4236, 0.3849, 1.0348]]
R606 = [[0.7982, 0.3192, 0.2849], [0.3192, 0.7891, 0.3192], [0.2849, 0.3192, 0.7982]]
X606 = [[0.4463, 0.0328, -0.0143], [0.0328, 0.4041, 0.0328], [-0.0143, 0.0328, 0.4463]]


def dump(name, doc):
    (DATA / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")


def line(a, b, miles, r=R601, x=X601):
    return {"from": a, "to": b, "phases": ABC, "r_ohm": r, "x_ohm": x, "length": miles}


def pv(name, bus, phase, p_kw, vvc=True, ratio=1.1):
    return {"name": name, "bus": bus, "phase": phase, "p_max_kw": p_kw, "s_max_kva": round(p_kw * ratio, 6), "vvc": vvc}


def two_bus(load, pv_unit, v_pu):
    return {
        "bases": {"mva": 1.0, "kv": 12.47},
        "buses": [{"id": "sub", "phases": ["A"]}, {"id": "n1", "phases": ["A"]}],
        "lines": [{"from": "sub", "to": "n1", "phases": ["A"], "r_ohm": [[0.35]], "x_ohm": [[1.0]], "length": 2.0}],
        "loads": [{"bus": "n1", "phase": "A", "p_kw": load[0], "q_kvar": load[1]}],
        "pv": [pv_unit],
        "substation": {"bus": "sub", "v_pu": v_pu},
    }


def four_bus():
    return {
        "bases": {"mva": 1.0, "kv": 12.47},
        "buses": [{"id": s} for s in ["1", "2", "3", "4"]],
        "lines": [line("1", "2", 0.3788), line("2", "3", 0.2), line("3", "4", 0.4735)],
        "loads": [
            {"bus": "4", "phase": "A", "p_kw": 120, "q_kvar": 40},
            {"bus": "4", "phase": "B", "p_kw": 180, "q_kvar": 60},
            {"bus": "4", "phase": "C", "p_kw": 90, "q_kvar": 30},
            {"bus": "2", "phase": "B", "p_kw": 60, "q_kvar": 20},
        ],
        "pv": [pv("pv3a", "3", "A", 300.0), pv("pv4c", "4", "C", 300.0)],
        "substation": {"bus": "1", "v_pu": 1.03},
    }


def feeder30():
    edges = [("b0", "b1", 0.5), ("b1", "b2", 0.5), ("b2", "b3", 0.5), ("b3", "b4", 0.5), ("b4", "b5", 0.5),
             ("b5", "b6", 0.5), ("b3", "b7", 0.6), ("b7", "b8", 0.6), ("b5", "b9", 0.6)]
    per_phase_kw = [0, 300, 60, 20, 10, 10, 5, 10, 5, 5]
    buses = [f"b{i}" for i in range(10)]
    loads = []
    for i, b in enumerate(buses):
        for k, ph in enumerate(ABC):
            if per_phase_kw[i] == 0:
                continue
            p = per_phase_kw[i] * (1 + 0.15 * ((i + k) % 3 - 1))
            loads.append({"bus": b, "phase": ph, "p_kw": round(p, 1), "q_kvar": round(p * 0.3, 1)})
    return {
        "bases": {"mva": 1.0, "kv": 12.47},
        "buses": [{"id": b} for b in buses],
        "lines": [line(a, b, 1.5 * mi, R606, X606) for a, b, mi in edges],
        "loads": loads,
        "pv": [pv("pv6a", "b6", "A", 500.0), pv("pv8b", "b8", "B", 500.0), pv("pv9c", "b9", "C", 500.0),
               pv("pv2", "b2", "B", 50.0, vvc=False)],
        "substation": {"bus": "b0", "v_pu": 1.045},
    }


if __name__ == "__main__":
    dump("two_bus", two_bus((300.0, 100.0), pv("pv1", "n1", "A", 150.0, vvc=False), 1.0))
    dump("two_bus_vvc", two_bus((20.0, 5.0), pv("pv1", "n1", "A", 200.0), 1.02))
    dump("four_bus", four_bus())
    dump("feeder30", feeder30())
