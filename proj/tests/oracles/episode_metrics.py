#!/usr/bin/env python3
"""Recompute an episode result from a run directory and compare with result.json.

usage: episode_metrics.py RUN_DIR [RUN_DIR ...]
Prints one line per field mismatch; exit status 1 when any field differs by
more than 1e-9.
"""
import csv
import json
import math
import sys
from pathlib import Path

TOL = 1e-9


def load(run):
    run = Path(run)
    with open(run / "trajectory.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    events = [json.loads(line) for line in open(run / "events.jsonl") if line.strip()]
    with open(run / "decisions.csv", newline="") as f:
        decisions = list(csv.DictReader(f))
    result = json.load(open(run / "result.json"))
    return rows, events, decisions, result


def num(v):
    return float(v)  # float() already understands "inf"


def recompute(rows, events, decisions):
    start = next(e for e in events if e["kind"] == "episode_start")["payload"]
    ego_id = start["ego"]
    cfg = start["metrics"]
    info = start["route_info"]
    ego = [r for r in rows if int(r["vehicle_id"]) == ego_id]
    ego.sort(key=lambda r: int(r["tick"]))

    # route completion from the first on-route sample
    steps = info["steps"]
    cum = [0.0]
    for st in steps:
        cum.append(cum[-1] + st["length"])
    total = info["total_length"]
    k = 0
    first = last = None
    for r in ego:
        for j in range(k, len(steps)):
            if r["lane_id"] in steps[j]["lanes"]:
                k = j
                i = steps[j]["lanes"].index(r["lane_id"])
                ln = steps[j]["lane_lengths"][i]
                frac = min(max(num(r["s"]) / ln, 0.0), 1.0) if ln > 0 else 0.0
                pos = cum[j] + frac * steps[j]["length"]
                if first is None:
                    first = pos
                last = pos
                break
    if first is None:
        rc = 0.0
    elif total - first <= 0 or total - last < 1e-6:
        rc = 100.0
    else:
        rc = min(max(100.0 * (last - first) / (total - first), 0.0), 100.0)

    collided = any(e["kind"] == "collision" and e["payload"].get("ego") for e in events)
    end_reason = ""
    for e in events:
        if e["kind"] == "episode_end":
            end_reason = e["payload"].get("reason", "")

    n = len(ego)
    comfy = sum(1 for r in ego if abs(num(r["jerk"])) <= cfg["jerk_max"] and abs(num(r["lat_acc"])) <= cfg["lat_acc_max"])
    eff = 0.0
    for r in ego:
        lim = num(r["speed_limit"])
        eff += min(num(r["speed"]) / lim, 1.0) if lim > 0 else 1.0
    ttcs = [num(r["ttc"]) for r in ego]
    min_ttc = min(ttcs) if ttcs else math.inf
    comfort = 100.0 * comfy / n if n else 0.0
    efficiency = min(max(100.0 * eff / n, 0.0), 100.0) if n else 0.0
    if n == 0:
        safety = 0.0
    elif collided:
        safety = 0.0
    elif min_ttc >= cfg["ttc_min"]:
        safety = 100.0
    else:
        safety = min(max(100.0 * min_ttc / cfg["ttc_min"], 0.0), 100.0)
    score = cfg["w_safety"] * safety + cfg["w_efficiency"] * efficiency + cfg["w_comfort"] * comfort

    times = [num(d["decision_time"]) for d in decisions]
    duration = num(ego[-1]["t"]) - num(ego[0]["t"]) if ego else 0.0
    budget = cfg["time_budget"] if cfg.get("time_budget") is not None else 2.0 * info["free_flow_time"]

    # corner cases
    flagged = []
    ticks = [int(r["tick"]) for r in ego]

    def pos_at(tick):
        for t, r in zip(ticks, ego):
            if t >= tick:
                return num(r["x"]), num(r["y"])
        return (num(ego[-1]["x"]), num(ego[-1]["y"])) if ego else (0.0, 0.0)

    def flag(tick, kind):
        x, y = pos_at(tick)
        flagged.append({"tick": tick, "kind": kind, "x": x, "y": y, "window": [max(0, tick - 50), tick + 50]})

    dip = brake = False
    for r in ego:
        d = num(r["ttc"]) < cfg["ttc_min"]
        if d and not dip:
            flag(int(r["tick"]), "ttc")
        dip = d
        b = num(r["accel"]) < -0.8 * cfg["emergency_decel"]
        if b and not brake:
            flag(int(r["tick"]), "emergency_braking")
        brake = b
    for e in events:
        if e["kind"] == "fallback" and e["payload"].get("id", -1) == ego_id:
            kind = "agent_fallback" if e["payload"].get("source", "planner") == "agent" else "planner_fallback"
            flag(e["tick"], kind)
        elif e["kind"] == "override":
            flag(e["tick"], "override")
    flagged.sort(key=lambda c: c["tick"])  # stable

    return {
        "route_completion": rc,
        "driving_score": score,
        "avg_decision_time": sum(times) / len(times) if times else 0.0,
        "success": rc == 100.0 and not collided and duration <= budget,
        "component_scores": {"comfort": comfort, "efficiency": efficiency, "safety": safety},
        "end_reason": end_reason,
        "duration": duration,
        "time_budget": budget,
        "min_ttc": None if math.isinf(min_ttc) else min_ttc,
        "decisions": len(decisions),
        "events": flagged,
    }


def compare(want, got, path=""):
    bad = []
    if isinstance(want, dict):
        for key, w in want.items():
            if key not in got:
                bad.append(f"{path}{key}: missing")
            else:
                bad += compare(w, got[key], f"{path}{key}.")
    elif isinstance(want, list):
        if len(want) != len(got):
            bad.append(f"{path}: length {len(got)} != {len(want)}")
        else:
            for i, (w, g) in enumerate(zip(want, got)):
                bad += compare(w, g, f"{path}{i}.")
    elif isinstance(want, bool) or want is None or isinstance(want, str):
        if want != got:
            bad.append(f"{path}: {got!r} != {want!r}")
    else:
        if got is None or abs(float(want) - float(got)) > TOL:
            bad.append(f"{path}: {got!r} != {want!r}")
    return bad


def main(argv):
    failed = 0
    for run in argv[1:]:
        rows, events, decisions, result = load(run)
        bad = compare(recompute(rows, events, decisions), result)
        for b in bad:
            print(f"{run}: {b}")
        failed += bool(bad)
    print(f"checked={len(argv) - 1} mismatched={failed}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
