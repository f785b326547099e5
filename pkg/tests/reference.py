"""Independent brute-force recomputation of power, latency and the per-step argmin.

Works from a flat dict of raw constants (TOPS, km, J/TO) and spells out the
binary placement variable x[c][d] explicitly; shares no code with orbitsplit.
"""

import math

N = ("GAT", "SAT", "HAP")
C_LIGHT = 2.998e8

# (cu, du) in tie-break order
PAIRS = (("GAT", "GAT"), ("GAT", "SAT"), ("SAT", "SAT"), ("GAT", "HAP"), ("HAP", "HAP"))

LATENCY_REQ = (10.0, 10.0, 10.0, 0.1, 0.1, 0.25, 0.25)


def raw_defaults():
    return {
        "COMP_PHY": 1280.0, "COMP_MAC": 50.0, "COMP_RLC": 50.0, "COMP_PDCP": 100.0,
        "COMP_max_TOPS": {"GAT": 485.0, "SAT": 32.0, "HAP": 1.33},
        "d_km": {"SAT": 600.0, "HAP": 20.0},
        "EPO": {"GAT": 0.0742, "SAT": 0.625, "HAP": 5.64},
        "P_I": {"GAT": 36.0, "SAT": 10.0, "HAP": 7.5},
        "C_mbps": {"SAT": 100.0, "HAP": 10000.0},
        "p_w": {"SAT": 35.0, "HAP": 4.0},
        "backhaul": False,
    }


def tra(o, lam):
    if o <= 3:
        return lam
    if o <= 5:
        return 1.02 * lam + 1.5
    return 2500.0


def comp_du(o, raw):
    phy, mac, rlc, pdcp = raw["COMP_PHY"], raw["COMP_MAC"], raw["COMP_RLC"], raw["COMP_PDCP"]
    return [phy + mac + rlc + pdcp, phy + mac + rlc, phy + mac + rlc / 2, phy + mac, phy + mac / 2, phy, 0.0][o]


def comp_cu(o, raw):
    mac, rlc, pdcp, phy = raw["COMP_MAC"], raw["COMP_RLC"], raw["COMP_PDCP"], raw["COMP_PHY"]
    return [0.0, pdcp, rlc / 2 + pdcp, rlc + pdcp, mac / 2 + rlc + pdcp, mac + rlc + pdcp, phy + rlc + mac + pdcp][o]


def ntn(c, d):
    """The non-gateway end of a GAT-x link."""
    return d if c == "GAT" else c


def evaluate(cu, du, o, lam, raw):
    """(total power, processing, transmission, latency_ms, latency_ok, traffic_ok, compute_ok)."""
    x = {c: {d: 1 if (c, d) == (cu, du) else 0 for d in N} for c in N}
    p_proc = 0.0
    for c in N:
        for d in N:
            if not x[c][d]:
                continue
            w_c = (2 - x[c][c]) / 2
            w_d = (2 - x[d][d]) / 2
            p_cu = raw["P_I"][c] * w_c + raw["EPO"][c] * comp_cu(o, raw) / 1000.0
            p_du = raw["P_I"][d] * w_d + raw["EPO"][d] * comp_du(o, raw) / 1000.0
            p_proc += (p_cu + p_du) * x[c][d]
    p_tx = 0.0
    latency = 0.0
    for d in N:
        for c in N:
            if d == c or not x[c][d]:
                continue
            node = ntn(c, d)
            p_tx += raw["p_w"][node] / raw["C_mbps"][node] * tra(o, lam) * x[c][d]
            latency += x[c][d] * raw["d_km"][node] * 1000.0 / C_LIGHT * 1000.0
    traffic_ok = True
    if cu != du:
        traffic_ok = tra(o, lam) <= raw["C_mbps"][ntn(cu, du)]
    elif raw["backhaul"] and cu != "GAT":
        p_tx += raw["p_w"][cu] / raw["C_mbps"][cu] * lam
        traffic_ok = lam <= raw["C_mbps"][cu]
    latency_ok = latency * (1 - x[cu][cu]) <= LATENCY_REQ[o]
    load = comp_cu(o, raw) + comp_du(o, raw)
    compute_ok = load <= (raw["COMP_max_TOPS"][cu] + raw["COMP_max_TOPS"][du]) * 1000.0
    return p_proc + p_tx, p_proc, p_tx, latency, latency_ok, traffic_ok, compute_ok


def brute_force_argmin(lam, raw, rtol=1e-9):
    """((cu, du, o), total) of the cheapest feasible candidate, or (None, None)."""
    feasible = []
    for rank, (cu, du) in enumerate(PAIRS):
        for o in range(7):
            total, *_, l_ok, t_ok, c_ok = evaluate(cu, du, o, lam, raw)
            if l_ok and t_ok and c_ok:
                feasible.append((total, o, rank, (cu, du, o)))
    if not feasible:
        return None, None
    best = min(f[0] for f in feasible)
    tied = [f for f in feasible if f[0] <= best + rtol * abs(best)]
    total, _, _, key = min(tied, key=lambda f: (f[1], f[2]))
    return key, total


def to_params(raw):
    """Translate raw constants into orbitsplit parameters (test-side glue only)."""
    from orbitsplit.model import FunctionLoads, LinkParams, NetworkParams, NodeId, NodeParams

    nodes = {
        NodeId(n): NodeParams(raw["P_I"][n], raw["EPO"][n], raw["COMP_max_TOPS"][n] * 1000.0) for n in N
    }
    links = {}
    for n in ("SAT", "HAP"):
        link = LinkParams((NodeId(n), NodeId.GAT), raw["d_km"][n] * 1000.0, raw["C_mbps"][n], raw["p_w"][n])
        links[link.key] = link
    loads = FunctionLoads(raw["COMP_PHY"], raw["COMP_MAC"], raw["COMP_RLC"], raw["COMP_PDCP"])
    return NetworkParams(nodes=nodes, links=links, loads=loads, backhaul_mode=raw["backhaul"])


def perturbed(rng, scale=(0.2, 5.0)):
    """Random multiplicative perturbation of every raw constant."""
    raw = raw_defaults()
    f = lambda: math.exp(rng.uniform(math.log(scale[0]), math.log(scale[1])))  # noqa: E731
    for key in ("COMP_PHY", "COMP_MAC", "COMP_RLC", "COMP_PDCP"):
        raw[key] *= f()
    for key in ("COMP_max_TOPS", "d_km", "EPO", "P_I", "C_mbps", "p_w"):
        raw[key] = {n: v * f() for n, v in raw[key].items()}
    raw["backhaul"] = bool(rng.random() < 0.5)
    return raw
