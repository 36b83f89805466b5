"""Regenerates the bundled desk-scale systems and netload profiles."""
import json
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent
T = 24


def daily_shape(t):
    # Overnight trough near 4:00, evening peak near 19:00.
    morning = math.exp(-((t - 9.0) ** 2) / 8.0)
    evening = math.exp(-((t - 19.0) ** 2) / 6.0)
    return 0.45 + 0.25 * morning + 0.55 * evening


def profile(shares, peak, path):
    rows = ["node,t,mu,sigma"]
    for n, share in enumerate(shares):
        for t in range(1, T + 1):
            mu = peak * share * daily_shape(t) / 1.0
            sigma = mu * (0.03 + 0.05 * t / T)
            rows.append(f"{n},{t},{mu:.4f},{sigma:.4f}")
    path.write_text("\n".join(rows) + "\n")


def storage(name, bus, max_load, share):
    power = round(max_load * share, 4)
    e_max = 4.0 * power
    return {"name": name, "bus": bus, "power": power, "e_min": 0.0, "e_max": e_max,
            "efficiency": 0.95, "marginal_cost": 10.0, "e_initial": 0.5 * e_max}


def desk3():
    peak = 420.0
    shares = [0.2, 0.35, 0.45]
    max_load = peak * max(daily_shape(t) for t in range(1, T + 1))
    net = {
        "buses": [{"id": 0, "name": "north"}, {"id": 1, "name": "east"}, {"id": 2, "name": "south"}],
        "lines": [
            {"name": "n-e", "from_bus": 0, "to_bus": 1, "susceptance": 10.0, "capacity": 200.0},
            {"name": "e-s", "from_bus": 1, "to_bus": 2, "susceptance": 10.0, "capacity": 200.0},
            {"name": "n-s", "from_bus": 0, "to_bus": 2, "susceptance": 10.0, "capacity": 120.0},
        ],
        "generators": [
            {"name": "base", "bus": 0, "cost": {"kind": "quadratic", "c2": 0.03, "c1": 12.0},
             "g_max": 220.0, "ramp_up": 120.0, "ramp_down": 120.0},
            {"name": "mid", "bus": 1, "cost": {"kind": "quadratic", "c2": 0.08, "c1": 22.0}, "g_max": 150.0},
            {"name": "peaker", "bus": 2, "cost": {"kind": "quadratic", "c2": 0.3, "c1": 35.0}, "g_max": 160.0},
        ],
        # Two units sharing 20% of peak load, 4-hour duration.
        "storages": [storage("es-east", 1, max_load, 0.10), storage("es-south", 2, max_load, 0.10)],
        "slack_bus": 0,
    }
    (HERE / "desk3.json").write_text(json.dumps(net, indent=2) + "\n")
    profile(shares, peak, HERE / "desk3_profile.csv")


def desk8():
    peak = 1200.0
    shares = [0.08, 0.12, 0.15, 0.1, 0.18, 0.12, 0.15, 0.1]
    max_load = peak * max(daily_shape(t) for t in range(1, T + 1))
    lines = []
    for n in range(8):
        lines.append({"name": f"ring{n}", "from_bus": n, "to_bus": (n + 1) % 8, "susceptance": 8.0, "capacity": 400.0})
    for a, b in [(0, 4), (2, 6)]:
        lines.append({"name": f"chord{a}{b}", "from_bus": a, "to_bus": b, "susceptance": 5.0, "capacity": 250.0})
    gens = []
    for n in range(8):
        c1 = 10.0 + 4.0 * n
        gens.append({"name": f"g{n}", "bus": n, "cost": {"kind": "quadratic", "c2": 0.01 + 0.01 * (n % 3), "c1": c1},
                     "g_max": 260.0 if n % 2 == 0 else 180.0})
    net = {
        "buses": [{"id": n, "name": f"zone{n}"} for n in range(8)],
        "lines": lines,
        "generators": gens,
        "storages": [storage(f"es{n}", n, max_load, 0.05) for n in (1, 3, 5, 7)],
        "slack_bus": 0,
    }
    (HERE / "desk8.json").write_text(json.dumps(net, indent=2) + "\n")
    profile(shares, peak, HERE / "desk8_profile.csv")


if __name__ == "__main__":
    desk3()
    desk8()
