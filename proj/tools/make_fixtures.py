"""Writes the experiment fixtures under fixtures/.

Run from anywhere: python3 tools/make_fixtures.py
"""
import itertools
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

server = "us-east-1"
na = ["us-east-2", "us-west-1", "us-west-2", "ca-central-1"]
eu = ["eu-west-1", "eu-central-1", "eu-north-1"]
asia = ["ap-northeast-1", "ap-southeast-1", "ap-south-1"]
clients = na + eu + asia
region = {c: "na" for c in na} | {c: "eu" for c in eu} | {c: "asia" for c in asia} | {server: "na"}
server_mean = {"us-east-2": 40, "us-west-1": 30, "us-west-2": 28, "ca-central-1": 35,
               "eu-west-1": 18, "eu-central-1": 16, "eu-north-1": 15,
               "ap-northeast-1": 7, "ap-southeast-1": 6.5, "ap-south-1": 6}
intra = {"na": 50, "eu": 45, "asia": 35}
cross = {frozenset(["na", "eu"]): 16, frozenset(["eu", "asia"]): 6, frozenset(["na", "asia"]): 6}

def mean(a, b):
    if a == server: return server_mean[b]
    if b == server: return server_mean[a]
    ra, rb = region[a], region[b]
    if ra == rb:
        return intra[ra]
    return cross[frozenset([ra, rb])]

def links(var_scale, faulty=None):
    out = []
    nodes = [server] + clients
    for a, b in itertools.combinations(nodes, 2):
        m = mean(a, b)
        l = {"src": a, "dst": b, "mean_mbps": m, "var": round((var_scale * m) ** 2, 4), "symmetric": True}
        if faulty and faulty[0] in (a, b) and server in (a, b):
            # split the pair so only the client->server direction fails
            l.pop("symmetric")
            up = dict(l, src=faulty[0], dst=server, fault_rounds=[faulty[1]])
            down = dict(l, src=server, dst=faulty[0])
            out += [down, up]
            continue
        out.append(l)
    return out

def topology(var_scale, train_sigma=0.1, faulty=None):
    nodes = [{"name": server}]
    for c in clients:
        n = {"name": c}
        n["train_time"] = {"mu": 0.0, "sigma": train_sigma}
        nodes.append(n)
    return {
        "server": server,
        "nodes": nodes,
        "links": links(var_scale, faulty),
        "link_defaults": {"resample_s": 1.0},
        "clusters": [
            {"name": "north-america", "members": na},
            {"name": "europe", "members": eu},
            {"name": "asia", "members": asia},
        ],
        "coding_cost_s_per_element": 7e-9,
    }

all_variants = ["baseline", "hierfl", "d1-nc", "d2-c", "u1-c", "u2-agr", "u3-agr", "fedcod", "fedcod-adaptive"]
glob = {"topology": topology(0.2), "variants": all_variants, "rounds": 10, "model_length": 262144,
        "k": "n", "redundancy": {"ratio": 1.0}, "seed": 2024, "output": "out/global"}
json.dump(glob, open(OUT / "global.json", "w"), indent=2)

stable = {"topology": topology(0.0, 0.0), "variants": ["fedcod", "fedcod-adaptive"], "rounds": 20,
          "model_length": 262144, "k": "n", "redundancy": {"ratio": 1.0}, "seed": 7, "output": "out/stable"}
json.dump(stable, open(OUT / "stable.json", "w"), indent=2)

minimal = {"topology": {"server": "s", "nodes": [{"name": "s"}, {"name": "c"}],
                        "links": [{"src": "s", "dst": "c", "mean_mbps": 100, "symmetric": True}]},
           "variants": ["baseline"], "rounds": 1, "model_length": 16, "seed": 1}
json.dump(minimal, open(OUT / "minimal.json", "w"), indent=2)

fault = {"topology": topology(0.0, 0.0, ("us-east-2", {"first": 12, "last": 16})), "variants": ["fedcod-adaptive"],
         "rounds": 20, "model_length": 262144, "k": "n", "redundancy": {"ratio": 1.0}, "seed": 7, "output": "out/fault"}
json.dump(fault, open(OUT / "fault.json", "w"), indent=2)

faulty = {"topology": topology(0.2, 0.1, ("eu-west-1", {"first": 1, "last": 10})), "variants": ["fedcod", "baseline"],
          "rounds": 10, "model_length": 262144, "k": "n", "redundancy": {"ratio": 1.0}, "seed": 2024,
          "output": "out/faulty-link"}
json.dump(faulty, open(OUT / "faulty_link.json", "w"), indent=2)
