"""Seeded synthetic networks with the census of a mid-sized campus steam system.

Outgoing and return pipes form mirrored trees rooted at the plant.  A few
mains near the root are doubled with parallel pipes, which is how the pipe
count can exceed the tree edge count for a given number of junctions.
Loads hang off every leaf and some interior junctions; three of them
dominate the demand.

Geometry is calibrated so that, at the demand-aggregated baseline flows,
the worst load path needs a given supply temperature (steam just reaching
condensation temperature), the worst outgoing path loses a given amount of
pressure, and the return side loses a given pressure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSpec
from .model import (
    OUTGOING,
    PIPE_DEFAULTS,
    RETURN,
    T_CONDENSE,
    CarrierConstants,
    Load,
    Network,
    OperationalBounds,
    Pipe,
    Plant,
    build_network,
    cross_section_area,
)
from .units import PSI, c_to_k


@dataclass(frozen=True)
class SynthSpec:
    plants: int = 1
    loads: int = 45
    out_pipes: int = 68
    ret_pipes: int = 68
    pumps: int = 11
    total_demand: float = 15.14e6
    junctions: int | None = None  # None: pure trees, 2 * (out_pipes + 1)
    seed: int = 1
    dominant_shares: tuple[float, ...] = (3.145 / 15.14, 0.09, 0.075)
    power_max: float = 30e6
    pump_boost_max: float = 5.0 * PSI
    supply_temperature: float = c_to_k(124.86)
    far_pressure: float = 35.47 * PSI
    plant_pressure: float = 40.0 * PSI
    return_drop: float = 1.93 * PSI
    length_range: tuple[float, float] = (40.0, 120.0)


def campus_spec(seed: int = 1) -> SynthSpec:
    return SynthSpec(junctions=134, seed=seed)


def _check(spec: SynthSpec) -> int:
    for name in ("plants", "loads", "out_pipes", "ret_pipes"):
        if getattr(spec, name) < 1:
            raise InfeasibleSpec(f"{name} must be at least 1")
    if spec.pumps < 0:
        raise InfeasibleSpec("pumps must be non-negative")
    if not spec.total_demand > 0:
        raise InfeasibleSpec("total demand must be positive")
    if spec.ret_pipes != spec.out_pipes:
        raise InfeasibleSpec("mirrored trees need as many return pipes as outgoing pipes")
    if spec.pumps > spec.ret_pipes:
        raise InfeasibleSpec(f"{spec.pumps} pumps do not fit on {spec.ret_pipes} return pipes")
    per_side = spec.out_pipes + 1 if spec.junctions is None else spec.junctions
    if spec.junctions is not None:
        if spec.junctions % 2:
            raise InfeasibleSpec("junction count must be even (one outgoing and one return junction each)")
        per_side = spec.junctions // 2
    if per_side < 2 or per_side - 1 > spec.out_pipes:
        raise InfeasibleSpec(f"{per_side} junctions per side cannot be joined by {spec.out_pipes} pipes as a tree")
    twins = spec.out_pipes - (per_side - 1)
    if twins > per_side - 1:
        raise InfeasibleSpec("too many pipes for the junction count")
    if spec.loads > per_side - 1:
        raise InfeasibleSpec(f"{spec.loads} loads need at least {spec.loads} non-root junctions per side")
    shares = spec.dominant_shares[: spec.loads]
    if any(s <= 0 for s in shares) or sum(shares) > 1 or (spec.loads > len(shares) and sum(shares) >= 1):
        raise InfeasibleSpec("dominant shares must be positive and leave room for the other loads")
    lo, hi = spec.length_range
    if not 0 < lo <= hi:
        raise InfeasibleSpec("length range must be positive")
    if not spec.far_pressure < spec.plant_pressure:
        raise InfeasibleSpec("far pressure must lie below the plant pressure")
    return per_side


def _grow_tree(nodes: int, max_leaves: int, rng: np.random.Generator) -> list[int]:
    """Parent of each node (node 0 is the root); at most ``max_leaves`` leaves."""
    if max_leaves == 1 or nodes == 2:
        return [-1] + list(range(nodes - 1))
    for _ in range(1000):
        parent = [-1]
        for k in range(1, nodes):
            if k > 1 and rng.random() < 0.5:
                parent.append(k - 1)  # extend the newest tip
            else:
                parent.append(int(rng.integers(0, k)))
        kids = np.bincount(parent[1:], minlength=nodes)
        if int(np.sum(kids == 0)) <= max_leaves:
            return parent
    # fall back to a caterpillar: a spine with single-node branches
    spine = nodes - max_leaves + 1
    parent = [-1] + list(range(spine - 1))
    parent += [int(rng.integers(0, spine - 1)) for _ in range(nodes - spine)]
    return parent


def synth_network(spec: SynthSpec | None = None, constants: CarrierConstants | None = None,
                  bounds: OperationalBounds | None = None) -> Network:
    spec = spec or SynthSpec()
    per_side = _check(spec)
    c = constants or CarrierConstants()
    b = bounds or OperationalBounds()
    rng = np.random.default_rng(spec.seed)

    parent = _grow_tree(per_side, spec.loads, rng)
    kids: list[list[int]] = [[] for _ in range(per_side)]
    for k in range(1, per_side):
        kids[parent[k]].append(k)
    depth = [0] * per_side
    for k in range(1, per_side):
        depth[k] = depth[parent[k]] + 1

    # loads: every leaf, then random interior junctions
    leaves = [k for k in range(1, per_side) if not kids[k]]
    interior = [k for k in range(1, per_side) if kids[k]]
    extra = rng.permutation(interior)[: spec.loads - len(leaves)].tolist()
    hosts = sorted(leaves + extra)

    # demand: dominant loads at shallow hosts, lognormal remainder
    n_dom = min(len(spec.dominant_shares), spec.loads)
    by_depth = sorted(hosts, key=lambda k: (depth[k], k))
    pool = by_depth[: max(n_dom, len(hosts) // 2)]
    dominant = rng.permutation(pool)[:n_dom].tolist()
    share = {}
    for k, s in zip(dominant, spec.dominant_shares):
        share[k] = s
    rest = [k for k in hosts if k not in share]
    if rest:
        raw = np.clip(rng.lognormal(0.0, 0.6, len(rest)), 0.25, 3.0)
        left = 1.0 - sum(share.values())
        for k, v in zip(rest, raw / raw.sum() * left):
            share[k] = float(v)
    else:
        total = sum(share.values())
        share = {k: v / total for k, v in share.items()}
    demand = {k: spec.total_demand * share[k] for k in hosts}

    # pipes: one per tree edge, mains nearest the root doubled
    tree_edges = list(range(1, per_side))  # identified by child node
    twins = spec.out_pipes - len(tree_edges)
    doubled = set(sorted(tree_edges, key=lambda k: (depth[k], -_subtree_sum(k, kids, demand), k))[:twins])
    lo, hi = spec.length_range
    length = {k: float(rng.uniform(lo, hi)) for k in tree_edges}

    # baseline flows from downstream demand; per-kg energy of a typical load
    per_kg = c.c_L + c.c_w * (T_CONDENSE - b.T_min) + c.c_s * 0.5 * (spec.supply_temperature - T_CONDENSE)
    flow = {k: _subtree_sum(k, kids, demand) / per_kg for k in tree_edges}
    pipe_flow = {k: flow[k] / (2 if k in doubled else 1) for k in tree_edges}

    # lengths: worst path decay matches the supply temperature target
    gam_s, gam_w = PIPE_DEFAULTS[OUTGOING][1], PIPE_DEFAULTS[RETURN][1]
    target = math.log((spec.supply_temperature - b.T_ext) / (T_CONDENSE - b.T_ext))
    expo = max(_path_sum(h, parent, lambda k: length[k] * gam_s / (c.c_s * pipe_flow[k])) for h in hosts)
    scale_L = target / expo
    length = {k: v * scale_L for k, v in length.items()}

    # outgoing diameters ~ f^0.4, scaled to the far-pressure target
    fmax = max(pipe_flow.values())
    shape = {k: (pipe_flow[k] / fmax) ** 0.4 for k in tree_edges}
    lam_s = PIPE_DEFAULTS[OUTGOING][0]
    T_in = {}
    for k in sorted(tree_edges, key=lambda k: depth[k]):
        T_in[k] = spec.supply_temperature if parent[k] == 0 else _outlet_temperature(T_in[parent[k]], length[parent[k]], gam_s, c.c_s, pipe_flow[parent[k]], b.T_ext)

    def p2_drop(k, d):
        f = pipe_flow[k]
        T_out = _outlet_temperature(T_in[k], length[k], gam_s, c.c_s, f, b.T_ext)
        A = cross_section_area(d)
        K = lam_s * c.R_s / (A * A * d)
        return K * f * f * (b.T_ext * length[k] + c.c_s * f / gam_s * (T_in[k] - T_out))

    worst = max(_path_sum(h, parent, lambda k: p2_drop(k, shape[k])) for h in hosts)
    want = spec.plant_pressure**2 - spec.far_pressure**2
    d_out = {k: shape[k] * (worst / want) ** 0.2 for k in tree_edges}

    # return diameters ~ f^0.4, scaled to the return drop target
    lam_w = PIPE_DEFAULTS[RETURN][0]

    def w_drop(k, d):
        A = cross_section_area(d)
        return lam_w * length[k] * pipe_flow[k] ** 2 / (2 * A * A * d * c.rho_w)

    worst_w = max(_path_sum(h, parent, lambda k: w_drop(k, shape[k])) for h in hosts)
    d_ret = {k: shape[k] * (worst_w / spec.return_drop) ** 0.2 for k in tree_edges}

    # assemble components
    S = lambda k: f"S{k + 1}"  # noqa: E731
    R = lambda k: f"R{k + 1}"  # noqa: E731
    order = sorted(tree_edges, key=lambda k: (depth[k], k))
    out_specs, ret_specs = [], []
    for k in order:
        copies = 2 if k in doubled else 1
        for _ in range(copies):
            out_specs.append((S(parent[k]), S(k), length[k], d_out[k]))
            ret_specs.append((R(k), R(parent[k]), length[k], d_ret[k]))
    pumped = set(rng.choice(len(ret_specs), size=spec.pumps, replace=False).tolist()) if spec.pumps else set()
    pipes = [Pipe(f"PS{i + 1}", a, z, OUTGOING, L, d) for i, (a, z, L, d) in enumerate(out_specs)]
    pipes += [
        Pipe(f"PR{i + 1}", a, z, RETURN, L, d, pump_boost_max=spec.pump_boost_max if i in pumped else 0.0)
        for i, (a, z, L, d) in enumerate(ret_specs)
    ]
    loads = [Load(f"L{i + 1}", S(k), R(k), demand[k]) for i, k in enumerate(hosts)]
    plants = [Plant(f"G{i + 1}", R(0), S(0), spec.power_max) for i in range(spec.plants)]
    junctions = [S(k) for k in range(per_side)] + [R(k) for k in range(per_side)]
    return build_network(junctions, pipes, plants, loads, c, b)


def _outlet_temperature(T_in, L, gamma, c, f, T_ext):
    return T_ext + (T_in - T_ext) * math.exp(-L * gamma / (c * f))


def _subtree_sum(k, kids, demand) -> float:
    total, stack = 0.0, [k]
    while stack:
        j = stack.pop()
        total += demand.get(j, 0.0)
        stack.extend(kids[j])
    return total


def _path_sum(k, parent, term) -> float:
    total = 0.0
    while parent[k] >= 0:
        total += term(k)
        k = parent[k]
    return total


def largest_load(net: Network) -> str:
    return max(net.loads, key=lambda ld: (ld.demand, ld.id)).id


def minimal_network(demand: float = 1e6, capacity: float = 30e6, pump_boost_max: float = 0.0,
                    bounds: OperationalBounds | None = None) -> Network:
    """One plant, one load, one outgoing and one return pipe."""
    return build_network(
        ["S1", "S2", "R1", "R2"],
        [
            Pipe("PS1", "S1", "S2", OUTGOING, 200.0, 0.15),
            Pipe("PR1", "R2", "R1", RETURN, 200.0, 0.1, pump_boost_max=pump_boost_max),
        ],
        [Plant("G1", "R1", "S1", capacity)],
        [Load("L1", "S2", "R2", demand)],
        bounds=bounds,
    )
