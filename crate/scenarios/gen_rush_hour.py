"""Writes rush_hour_100.json: one CA, four RSKP gates, two RSDs, 100 vehicles."""
import json
import random

rng = random.Random(20240601)
nodes = [{"id": "ca-0", "kind": "ca", "region": "city"}]
links = []
gates = [f"rskp-{g}" for g in range(4)]
rsds = ["rsd-0", "rsd-1"]
for i, g in enumerate(gates):
    nodes.append({"id": g, "kind": "rskp", "ca": "ca-0", "region": "city"})
    links.append({"id": f"wire-{g}", "a": "ca-0", "b": g, "technology": "wireline",
                  "kljn": True, "wire_length_m": [1, 1, 1, 2][i]})
    links.append({"id": f"gate-{g}", "a": g, "technology": "nfc",
                  "nfc_rate_bps": [106000, 212000, 424000, 106000][i], "nfc_range_m": 0.1})
for r in rsds:
    nodes.append({"id": r, "kind": "rsd", "ca": "ca-0", "region": "city"})
    links.append({"id": f"wire-{r}", "a": r, "b": "ca-0", "technology": "wireline",
                  "kljn": True, "wire_length_m": 2})
vehicles = [f"car-{v:03d}" for v in range(100)]
for v in vehicles:
    nodes.append({"id": v, "kind": "vehicle", "ca": "ca-0"})
for v in range(0, 100, 2):
    links.append({"id": f"v2v-{v:03d}", "a": vehicles[v], "b": vehicles[v + 1], "technology": "wireless"})
for v in range(0, 100, 10):
    links.append({"id": f"v2rsd-{v:03d}", "a": vehicles[v], "b": rsds[v // 10 % 2], "technology": "wireless"})

events = []
for t in range(0, 1800, 60):
    events.append({"kind": "replenish", "time_s": t, "ca": "ca-0", "duration_s": 60})
    events.append({"kind": "key_expiry", "time_s": t + 59})
for v in vehicles:
    for lo, hi in [(60, 300), (600, 900), (1200, 1500)]:
        events.append({"kind": "vehicle_at_gate", "time_s": round(rng.uniform(lo, hi), 3),
                       "vehicle": v, "rskp": rng.choice(gates),
                       "dwell_s": round(rng.uniform(0.05, 0.5), 3),
                       "distance_m": round(rng.uniform(0.0, 0.12), 3)})
    t = round(rng.uniform(30, 120), 3)
    while t < 1800:
        peer = rng.choice(vehicles)
        events.append({"kind": "message_send", "time_s": t, "sender": v, "receiver": peer})
        t = round(t + rng.expovariate(1 / 20), 3)
    if rng.random() < 0.2:
        events.append({"kind": "key_request", "time_s": round(rng.uniform(100, 1700), 3),
                       "vehicle": v, "rsd": rng.choice(rsds), "bits": 2048})
events.sort(key=lambda e: e["time_s"])

doc = {"defaults": {"message_cost_bits": 128, "key_lifetime_s": 600,
                    "vehicle_pool_capacity_bits": 16384, "store_capacity_bits": 1048576},
       "nodes": nodes, "links": links, "events": events}
with open("rush_hour_100.json", "w") as f:
    json.dump(doc, f, indent=1)
    f.write("\n")
print(len(events), "events")
