"""Experiment driver: simulate ground-truth events, sweep candidates, emit outputs.

Ground truth always comes from a full nonlinear solve of the modified network
(line removed, bus split by element surgery, or buses merged), holding load
injections and generator P/|v| setpoints fixed. Events whose post solve fails
(islanding or collapse) are excluded and logged, and every sweep is fully
deterministic in (config, seed): wall-clock times are routed to a separate
timing file so the data outputs are byte-reproducible.
"""

import json
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from . import acpf, netmodel, ranking

NAMED_DEPLOYMENTS = {
    "single": {57: [35], 118: [65]},
    "sparse": {57: [4, 13, 34], 118: [5, 17, 37, 66, 80, 100]},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    case: object                  # path or RawCase
    pmus: object = "sparse"       # 'single'|'sparse'|'all'|'random:k'|list of bus ids
    events: str = "lines"         # 'lines' | 'splits' | 'merges'
    noise: float = 0.0
    seed: int = 0
    filter_mode: str = "on"       # 'on' | 'off' | 'lenient:k'
    observe_neighbors: bool = True
    component_weights: tuple = None   # (angle weight, magnitude weight) or None
    timing: bool = False
    timing_reps: int = 3
    event_sample: int = None      # randomly sample this many solvable events
    out: str = None

    def lenient_k(self):
        if self.filter_mode == "on":
            return 1
        if self.filter_mode.startswith("lenient:"):
            try:
                k = int(self.filter_mode.split(":", 1)[1])
            except ValueError:
                raise ConfigError("bad filter mode %r" % self.filter_mode) from None
            if k < 1:
                raise ConfigError("lenient k must be >= 1")
            return k
        if self.filter_mode == "off":
            return 1
        raise ConfigError("bad filter mode %r" % self.filter_mode)

    def use_filter(self):
        self.lenient_k()
        return self.filter_mode != "off"


@dataclass
class EventRecord:
    index: int
    kind: str
    label: str
    status: str                   # 'ok' | 'islanded' | 'no-convergence'
    rank_of_truth: int = 0
    n_candidates: int = 0
    t_computed: int = 0
    skipped_fraction: float = 0.0
    elapsed_filtered: float = 0.0
    elapsed_unfiltered: float = 0.0
    winner: str = ""              # label of the top-ranked candidate
    winner_kind: str = ""
    scores: list = None           # (label, kind, tau, t or None) in tau order


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list
    n_admissible: int
    top1: int
    top3: int
    cdf: list                     # (rank, fraction) for ranks 1..10
    median_skipped: float
    precompute_seconds: float
    deployment: list
    observed_buses: list

    def summary(self):
        return {
            "case": getattr(self.config.case, "name", None) or str(self.config.case),
            "events": self.config.events,
            "pmus": list(self.deployment),
            "observed_buses": list(self.observed_buses),
            "noise_sigma": self.config.noise,
            "seed": self.config.seed,
            "filter": self.config.filter_mode,
            "n_events": len(self.records),
            "n_admissible": self.n_admissible,
            "n_excluded": len(self.records) - self.n_admissible,
            "top1": self.top1,
            "top3": self.top3,
            "rank_cdf": [{"rank": r, "fraction": f} for r, f in self.cdf],
            "median_skipped_fraction": self.median_skipped,
        }


def load_config_case(case):
    if isinstance(case, netmodel.RawCase):
        return case
    case = str(case)
    if case.startswith("synth:"):
        from .cases import synthetic_case
        parts = case.split(":")
        n = int(parts[1])
        seed = int(parts[2]) if len(parts) > 2 else n
        return synthetic_case(n_buses=n, seed=seed)
    if case in ("case57", "case118"):
        from .cases import load_bundled
        return load_bundled(case)
    return netmodel.load_case(case)


def resolve_deployment(spec, case, seed=0):
    """Turn a deployment spec into a sorted list of PMU bus ids."""
    ids = [b.id for b in case.buses]
    if isinstance(spec, (list, tuple)):
        buses = [int(b) for b in spec]
    elif spec == "all":
        buses = list(ids)
    elif spec in NAMED_DEPLOYMENTS:
        table = NAMED_DEPLOYMENTS[spec]
        n = len(ids)
        if n not in table:
            raise ConfigError(
                "named deployment %r is only defined for the %s-bus networks"
                % (spec, "/".join(str(k) for k in sorted(table))))
        buses = table[n]
    elif isinstance(spec, str) and spec.startswith("random:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError("bad deployment %r" % spec) from None
        if not 1 <= k <= len(ids):
            raise ConfigError("random deployment size %d out of range" % k)
        rng = np.random.default_rng([int(seed), 0x9e37])
        buses = sorted(int(ids[i]) for i in rng.choice(len(ids), size=k, replace=False))
    else:
        raise ConfigError("bad deployment spec %r" % (spec,))
    known = set(ids)
    for b in buses:
        if b not in known:
            raise ConfigError("PMU bus %s not in case" % b)
    return sorted(set(buses))


def add_noise(values, sigma, rng):
    """i.i.d. Gaussian noise on every observed component (no temporal filtering)."""
    if sigma < 0:
        raise ValueError("noise sigma must be >= 0")
    if sigma == 0:
        return values
    return values + sigma * rng.standard_normal(len(values))


# ---------------------------------------------------------------------------
# Ground-truth surgery
# ---------------------------------------------------------------------------

def _case_without_branch(case, j):
    brs = list(case.branches)
    brs[j] = replace(brs[j], status=0)
    return netmodel.RawCase(case.baseMVA, case.buses, case.generators, brs,
                            name=case.name)


def simulate_line_failure(case, net, j, pre):
    """Post-contingency state after removing branch j, or (None, reason)."""
    if not net.is_connected_without(j):
        return None, "islanded"
    net2 = netmodel.build_admittance(_case_without_branch(case, j))
    try:
        post = acpf.newton_solve(net2.flow_model(), x0=pre.copy())
    except acpf.ConvergenceFailure:
        return None, "no-convergence"
    return (net2, post), "ok"


def split_surgery(case, bnet, cand):
    """Clone the split bus and move the breakaway arc's elements onto the clone.

    Boundary behaviour mirrors the tie-relaxation formulation: the parent keeps
    its bus type (angle reference, voltage regulation, slack absorption stay
    with the master section), while a generator that breaks away turns into a
    fixed scheduled injection on the otherwise-PQ clone bus.
    """
    parent_idx = cand.bus
    parent = case.buses[parent_idx]
    new_id = max(b.id for b in case.buses) + 1

    moved_branch = {}            # branch index -> end (0/1) moving to the clone
    move_load = move_gen = False
    for sidx in cand.breakaway:
        sec = bnet.sections[sidx]
        if sec.element == "branch":
            moved_branch[sec.branch_index] = sec.branch_end
        elif sec.element == "load":
            move_load = True
        elif sec.element == "gen":
            move_gen = True

    buses = []
    for i, b in enumerate(case.buses):
        if i == parent_idx:
            pd, qd = (0.0, 0.0) if move_load else (b.Pd, b.Qd)
            buses.append(netmodel.Bus(b.id, b.kind, pd, qd, b.Gs, b.Bs, b.Vm, b.Va))
        else:
            buses.append(b)
    pd_new = parent.Pd if move_load else 0.0
    qd_new = parent.Qd if move_load else 0.0
    gens = list(case.generators)
    if move_gen:
        vset = None
        for g in case.generators:
            if g.bus == parent.id and g.status:
                pd_new -= g.Pg
                qd_new -= g.Qg
                if vset is None:
                    vset = g.Vset
        gens = [g for g in gens if g.bus != parent.id]
        # the master section keeps the voltage pin; the machine's scheduled
        # output leaves with the breakaway group as a fixed injection
        gens.append(netmodel.Generator(bus=parent.id, Pg=0.0, Qg=0.0,
                                       Vset=vset if vset is not None else parent.Vm))
    buses.append(netmodel.Bus(new_id, "pq", pd_new, qd_new,
                              0.0, 0.0, parent.Vm, parent.Va))

    branches = []
    for j, br in enumerate(case.branches):
        if j in moved_branch:
            if moved_branch[j] == 0:
                br = replace(br, from_bus=new_id)
            else:
                br = replace(br, to_bus=new_id)
        branches.append(br)
    return netmodel.RawCase(case.baseMVA, buses, gens, branches, name=case.name)


def simulate_split(case, bnet, cand, pre):
    """Post state of a substation split via bus-branch surgery, or (None, reason)."""
    case2 = split_surgery(case, bnet, cand)
    try:
        net2 = netmodel.build_admittance(case2)
    except netmodel.CaseValidationError:
        return None, "islanded"
    if not net2.is_connected_without(None):
        return None, "islanded"
    n2 = net2.n
    x0 = acpf.initial_state(net2.flow_model())
    x0.theta[:len(pre.theta)] = pre.theta
    x0.vmag[:len(pre.vmag)] = pre.vmag
    x0.theta[n2 - 1] = pre.theta[cand.bus]
    x0.vmag[n2 - 1] = pre.vmag[cand.bus]
    try:
        post = acpf.newton_solve(net2.flow_model(), x0=x0)
    except acpf.ConvergenceFailure:
        return None, "no-convergence"
    return (net2, post), "ok"


def merge_surgery(case, pair):
    """Collapse two buses into the lower-id one (loads, shunts, gens combined)."""
    bi, bk = sorted(pair)
    keep = absorb = None
    for b in case.buses:
        if b.id == bi:
            keep = b
        elif b.id == bk:
            absorb = b
    if keep is None or absorb is None:
        raise ConfigError("merge pair %s not in case" % (pair,))
    kind = keep.kind
    if absorb.kind == "slack" or keep.kind == "slack":
        kind = "slack"
    elif "pv" in (keep.kind, absorb.kind):
        kind = "pv"
    merged = netmodel.Bus(bi, kind, keep.Pd + absorb.Pd, keep.Qd + absorb.Qd,
                          keep.Gs + absorb.Gs, keep.Bs + absorb.Bs,
                          keep.Vm, keep.Va)
    buses = [merged if b.id == bi else b for b in case.buses if b.id != bk]
    gens = [g if g.bus != bk else replace(g, bus=bi) for g in case.generators]
    branches = []
    for br in case.branches:
        fb = bi if br.from_bus == bk else br.from_bus
        tb = bi if br.to_bus == bk else br.to_bus
        branches.append(replace(br, from_bus=fb, to_bus=tb))
    return netmodel.RawCase(case.baseMVA, buses, gens, branches, name=case.name)


def simulate_merge(case, net, pair, pre):
    """Post state after electrically tying two buses, or (None, reason)."""
    case2 = merge_surgery(case, pair)
    net2 = netmodel.build_admittance(case2)
    x0 = acpf.initial_state(net2.flow_model())
    for i, b in enumerate(case2.buses):
        src = net.id2idx.get(b.id, net.id2idx[min(pair)])
        x0.theta[i] = pre.theta[src]
        x0.vmag[i] = pre.vmag[src]
    try:
        post = acpf.newton_solve(net2.flow_model(), x0=x0)
    except acpf.ConvergenceFailure:
        return None, "no-convergence"
    return (net2, post), "ok"


def _observed_delta(observed_buses, net, pre, net2, post, bus_remap=None):
    """Stacked (theta, vm) deltas at the observed buses, post minus pre."""
    out = np.empty(2 * len(observed_buses))
    for r, bid in enumerate(observed_buses):
        i_pre = net.id2idx[bid]
        bid2 = bus_remap.get(bid, bid) if bus_remap else bid
        i_post = net2.id2idx[bid2]
        out[2 * r] = post.theta[i_post] - pre.theta[i_pre]
        out[2 * r + 1] = post.vmag[i_post] - pre.vmag[i_pre]
    return out


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def run_sweep(config):
    """Simulate every event of the configured family and rank candidates for each."""
    case = load_config_case(config.case)
    net = netmodel.build_admittance(case)
    model = net.flow_model()
    pre = acpf.newton_solve(model, tol=1e-11)
    pmus = resolve_deployment(config.pmus, case, seed=config.seed)
    observed = netmodel.extend_with_neighbors(pmus, net) if config.observe_neighbors \
        else list(pmus)
    deployment = netmodel.PMUDeployment(observed)

    if config.events == "splits":
        bnet = netmodel.expand_to_breaker_model(net)
        scan_model = bnet.flow_model()
        scan_state = bnet.map_state(pre)
    elif config.events in ("lines", "merges"):
        bnet = None
        scan_model = model
        scan_state = pre
    else:
        raise ConfigError("unknown event family %r" % config.events)

    t0 = time.perf_counter()
    bordered = acpf.BorderedSystem(scan_model, scan_state)
    E = netmodel.observation_operator(deployment, scan_model)
    obs_rows = ranking.precompute_observation_rows(bordered, E)
    weights = None
    if config.component_weights is not None:
        wa, wm = config.component_weights
        weights = np.tile([float(wa), float(wm)], len(observed))

    nochange = ranking.no_change_candidate()
    if config.events == "lines":
        cands = [nochange] + ranking.line_candidates(scan_state, net)
        events = [("line", c.label, c.payload) for c in cands[1:]]
        match = lambda payload: (lambda c: c.kind == "line" and c.payload == payload)
    elif config.events == "splits":
        cands = [nochange] + ranking.split_candidates(scan_state, bnet)
        events = [("split", c.label, c.payload) for c in cands[1:]]
        match = lambda payload: (
            lambda c: c.kind == "split" and c.payload.key() == payload.key())
    else:
        cands = [nochange] + ranking.merge_candidates(scan_state, net, scan_model)
        events = [("merge", c.label, c.payload) for c in cands[1:]]
        match = lambda payload: (lambda c: c.kind == "merge" and c.payload == payload)
    precompute_seconds = time.perf_counter() - t0

    if config.event_sample is not None:
        if not 1 <= config.event_sample <= len(events):
            raise ConfigError("event sample size %r out of range" % config.event_sample)
        rng = np.random.default_rng([int(config.seed), 0x5eed])
        perm = rng.permutation(len(events))
        events = [events[i] for i in perm]

    records = []
    n_ok = 0
    use_filter = config.use_filter()
    k = config.lenient_k()
    for idx, (kind, label, payload) in enumerate(events):
        if config.event_sample is not None and n_ok >= config.event_sample:
            break
        rec = EventRecord(index=idx, kind=kind, label=label, status="ok")
        if kind == "line":
            sim, status = simulate_line_failure(case, net, payload, pre)
            remap = None
        elif kind == "split":
            sim, status = simulate_split(case, bnet, payload, pre)
            remap = None
        else:
            sim, status = simulate_merge(case, net, payload, pre)
            remap = {max(payload): min(payload)}
        rec.status = status
        if sim is None:
            records.append(rec)
            continue
        net2, post = sim
        obs = _observed_delta(observed, net, pre, net2, post, remap)
        rng = np.random.default_rng([int(config.seed), idx])
        obs = add_noise(obs, config.noise, rng)

        reps = max(1, config.timing_reps if config.timing else 1)
        times_f, times_nf = [], []
        diag = None
        for _ in range(reps):
            t1 = time.perf_counter()
            diag = ranking.rank(obs, cands, obs_rows, bordered, E,
                                use_filter=use_filter, lenient_k=k,
                                weights=weights)
            times_f.append(time.perf_counter() - t1)
        if config.timing:
            for _ in range(reps):
                t1 = time.perf_counter()
                ranking.rank(obs, cands, obs_rows, bordered, E,
                             use_filter=False, weights=weights)
                times_nf.append(time.perf_counter() - t1)
        rec.elapsed_filtered = float(np.median(times_f))
        rec.elapsed_unfiltered = float(np.median(times_nf)) if times_nf else 0.0
        rec.rank_of_truth = diag.position_of(match(payload)) or 0
        rec.n_candidates = diag.n_candidates
        rec.t_computed = diag.t_computed
        rec.skipped_fraction = 1.0 - diag.t_computed / diag.n_candidates
        rec.winner = diag.top().candidate.label
        rec.winner_kind = diag.top().candidate.kind
        rec.scores = [(e.candidate.label, e.candidate.kind, e.tau, e.t)
                      for e in sorted(diag.entries, key=lambda e: (e.tau, e.rank))]
        records.append(rec)
        n_ok += 1

    ok = [r for r in records if r.status == "ok"]
    top1 = sum(1 for r in ok if r.rank_of_truth == 1)
    top3 = sum(1 for r in ok if 1 <= r.rank_of_truth <= 3)
    cdf = []
    for rk in range(1, 11):
        frac = (sum(1 for r in ok if 1 <= r.rank_of_truth <= rk) / len(ok)) if ok else 0.0
        cdf.append((rk, frac))
    med_skip = float(np.median([r.skipped_fraction for r in ok])) if ok else 0.0
    result = SweepResult(config=config, records=records, n_admissible=len(ok),
                         top1=top1, top3=top3, cdf=cdf, median_skipped=med_skip,
                         precompute_seconds=precompute_seconds,
                         deployment=pmus, observed_buses=observed)
    if config.out:
        emit_outputs(result, config.out)
    return result


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, float):
        return "%.12g" % x
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def emit_outputs(result, outdir):
    """Write events/cdf/scores/filter CSVs and a JSON summary.

    Every file except timing.csv is byte-deterministic for a fixed config and
    seed; wall-clock measurements are quarantined in timing.csv.
    """
    os.makedirs(outdir, exist_ok=True)
    _write_csv(os.path.join(outdir, "events.csv"),
               ["event", "kind", "label", "status", "rank_of_truth",
                "n_candidates", "t_computed", "skipped_fraction", "top1", "top3",
                "winner"],
               [(r.index, r.kind, '"%s"' % r.label, r.status, r.rank_of_truth,
                 r.n_candidates, r.t_computed, r.skipped_fraction,
                 int(r.rank_of_truth == 1), int(1 <= r.rank_of_truth <= 3),
                 '"%s"' % r.winner)
                for r in result.records])
    _write_csv(os.path.join(outdir, "cdf.csv"), ["rank", "fraction"], result.cdf)
    score_rows = []
    for r in result.records:
        if not r.scores:
            continue
        for order, (label, kind, tau, t) in enumerate(r.scores):
            score_rows.append((r.index, order, '"%s"' % label, kind, tau,
                               "" if t is None else _fmt(t)))
    _write_csv(os.path.join(outdir, "scores.csv"),
               ["event", "tau_order", "candidate", "kind", "tau", "t"], score_rows)
    _write_csv(os.path.join(outdir, "filter.csv"),
               ["event", "n_candidates", "t_computed", "skipped_fraction"],
               [(r.index, r.n_candidates, r.t_computed, r.skipped_fraction)
                for r in result.records if r.status == "ok"])
    if result.config.timing:
        rows = [("precompute", result.precompute_seconds, "", "")]
        rows += [(r.index, r.elapsed_filtered, r.elapsed_unfiltered,
                  (r.elapsed_unfiltered / r.elapsed_filtered)
                  if r.elapsed_filtered > 0 else 0.0)
                 for r in result.records if r.status == "ok"]
        _write_csv(os.path.join(outdir, "timing.csv"),
                   ["event", "scan_filtered_s", "scan_unfiltered_s", "speedup"],
                   rows)
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
