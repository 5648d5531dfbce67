"""Seeded synthetic transmission grids for large-scale experiments.

Produces meshed networks with a branch/bus ratio, generator density, and
loading profile in the range of real interconnection-scale cases, sized to
order thousands of buses. Generation is fully deterministic in (n_buses, seed).
"""

import numpy as np

from ..netmodel import Branch, Bus, Generator, RawCase


def synthetic_case(n_buses=2383, seed=2383, branch_ratio=1.215, gen_fraction=0.137,
                   name=None):
    """Build a connected meshed grid of n_buses with realistic p.u. parameters.

    Layout: buses get 2-D coordinates; a random spanning tree over
    nearest-neighbour candidates guarantees connectivity, then extra local
    chords are added until the target branch count is reached. Loads are light
    enough that a flat-start Newton solve converges reliably.
    """
    rng = np.random.default_rng([seed, n_buses])
    pos = rng.random((n_buses, 2)) * np.sqrt(n_buses)

    order = [int(v) for v in rng.permutation(n_buses)]
    placed = [order[0]]
    edges = set()

    def near(i, pool, k):
        pool = np.asarray(pool)
        d = np.linalg.norm(pos[pool] - pos[i], axis=1)
        return pool[np.argsort(d)[:k]]

    for i in order[1:]:
        cand = near(i, placed, 3)
        j = int(cand[rng.integers(len(cand))])
        edges.add((min(i, j), max(i, j)))
        placed.append(i)

    target = int(round(branch_ratio * n_buses))
    tries = 0
    while len(edges) < target and tries < 50 * n_buses:
        tries += 1
        i = int(rng.integers(n_buses))
        # chords among the 8 nearest buses keep the mesh local
        d = np.linalg.norm(pos - pos[i], axis=1)
        nearest = np.argsort(d)[1:9]
        j = int(nearest[rng.integers(len(nearest))])
        e = (min(i, j), max(i, j))
        if e not in edges:
            edges.add(e)
    edges = sorted(edges)

    branches = []
    for (i, j) in edges:
        x = float(np.exp(rng.normal(np.log(0.06), 0.4)))
        x = min(max(x, 0.015), 0.3)
        r = x * float(rng.uniform(0.15, 0.35))
        b = x * float(rng.uniform(0.2, 0.8))
        branches.append(Branch(from_bus=int(i) + 1, to_bus=int(j) + 1,
                               r=r, x=x, b_charge=b))

    # spread generation over the plane so no load pocket is electrically remote
    n_gen = max(2, int(round(gen_fraction * n_buses)))
    side = int(np.ceil(np.sqrt(n_gen)))
    span = np.sqrt(n_buses)
    centers = [(span * (cx + 0.5) / side, span * (cy + 0.5) / side)
               for cx in range(side) for cy in range(side)]
    rng.shuffle(centers)
    gen_set = set()
    for (cx, cy) in centers:
        if len(gen_set) >= n_gen:
            break
        order_near = np.argsort((pos[:, 0] - cx) ** 2 + (pos[:, 1] - cy) ** 2)
        for cand in order_near[:8]:
            if int(cand) not in gen_set:
                gen_set.add(int(cand))
                break
    gen_buses = np.sort(np.array(sorted(gen_set)))
    n_gen = len(gen_buses)

    load = np.where(rng.random(n_buses) < 0.9,
                    rng.exponential(0.07, n_buses), 0.0)
    load = np.minimum(load, 0.5)
    qload = load * rng.uniform(0.15, 0.45, n_buses)
    total_load = load.sum()

    share = rng.uniform(0.5, 1.5, n_gen)
    share /= share.sum()
    pg = share * total_load * 1.0
    slack_pos = int(np.argmax(pg))

    buses, gens = [], []
    base = 100.0
    for i in range(n_buses):
        kind = "pq"
        if i in gen_set:
            kind = "slack" if i == int(gen_buses[slack_pos]) else "pv"
        buses.append(Bus(id=i + 1, kind=kind, Pd=float(load[i]), Qd=float(qload[i]),
                         Gs=0.0, Bs=0.0, Vm=1.0, Va=0.0))
    for gi, gb in enumerate(gen_buses):
        vset = float(rng.uniform(1.0, 1.04))
        gens.append(Generator(bus=int(gb) + 1, Pg=float(pg[gi]), Qg=0.0, Vset=vset))

    if name is None:
        name = "synth%d-seed%d" % (n_buses, seed)
    case = RawCase(baseMVA=base, buses=buses, generators=gens,
                   branches=branches, name=name)
    # values above are already per unit; RawCase stores p.u. directly
    return case.validate()
