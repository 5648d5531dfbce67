"""Filtered candidate scan: cheap lower bounds first, fingerprints lazily.

Every candidate gets a filter score tau (a lower bound on its fingerprint
score t). Candidates are visited in ascending tau order; as soon as the k-th
best computed t drops below the next tau, no unvisited candidate can beat the
leaders and the scan stops. The no-change hypothesis is always present, so the
scan detects as well as identifies.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import fingerprint as fp


@dataclass(frozen=True)
class Candidate:
    kind: str                     # 'nochange' | 'line' | 'split' | 'merge'
    label: str
    blocks: object = None         # ContingencyBlocks, None for nochange
    payload: object = None        # branch index / SplitCandidate / pair


@dataclass
class RankedEntry:
    candidate: Candidate
    tau: float
    t: float = None               # None when pruned before evaluation
    rank: int = 0


@dataclass
class RankedDiagnosis:
    entries: list
    t_computed: int
    n_candidates: int
    early_stop_position: int      # how many candidates were visited
    elapsed: float
    degenerate: list = field(default_factory=list)

    def position_of(self, match):
        """1-based rank of the first entry whose candidate satisfies match()."""
        for e in self.entries:
            if match(e.candidate):
                return e.rank
        return None

    def top(self):
        return self.entries[0]


def no_change_candidate():
    return Candidate(kind="nochange", label="no change")


def line_candidates(state, net):
    """One hypothesis per in-service branch (islanding branches included)."""
    out = []
    for j in net.in_service_branches():
        br = net.case.branches[j]
        out.append(Candidate(kind="line",
                             label="line %s-%s #%d" % (br.from_bus, br.to_bus, j),
                             blocks=fp.line_blocks(state, net, j),
                             payload=j))
    return out


def split_candidates(state, bnet):
    """One hypothesis per admissible two-breaker opening of the expanded model."""
    out = []
    for cand in bnet.enumerate_splits():
        out.append(Candidate(kind="split", label=cand.label,
                             blocks=fp.split_blocks(state, bnet, cand),
                             payload=cand))
    return out


def merge_candidates(state, net, model, pairs=None):
    """Hypotheses tying together bus pairs (default: all adjacent pairs)."""
    if pairs is None:
        seen = set()
        pairs = []
        for j in net.in_service_branches():
            br = net.case.branches[j]
            key = tuple(sorted((br.from_bus, br.to_bus)))
            if key not in seen and key[0] != key[1]:
                seen.add(key)
                pairs.append(key)
    out = []
    for (bi, bj) in pairs:
        i, j = model.variable_index(bi), model.variable_index(bj)
        out.append(Candidate(kind="merge", label="merge %s+%s" % (bi, bj),
                             blocks=fp.merge_blocks(state, model, (i, j)),
                             payload=(bi, bj)))
    return out


def precompute_observation_rows(bordered, E):
    """Observation rows of the inverse bordered matrix (one transpose solve each)."""
    m = E.shape[0]
    dim = bordered.dim
    rhs = np.zeros((dim, m))
    Ec = E.tocoo()
    for r, c, v in zip(Ec.row, Ec.col, Ec.data):
        rhs[c, r] = v
    return bordered.solve_transpose(rhs).T


def _taus(obs_delta, candidates, obs_rows, weights):
    taus = np.empty(len(candidates))
    base = float(np.linalg.norm(obs_delta if weights is None else obs_delta * weights))
    for idx, cand in enumerate(candidates):
        if cand.kind == "nochange":
            taus[idx] = base
        else:
            taus[idx] = fp.filter_score(obs_delta, obs_rows, cand.blocks, weights)
    return taus


def rank(obs_delta, candidates, obs_rows, bordered, E, use_filter=True,
         lenient_k=1, weights=None):
    """Scan candidates and return them ranked by (lazily computed) fingerprint score.

    With the filter on, fingerprints are only evaluated until the k-th best
    computed score undercuts every remaining lower bound. Ties break by
    candidate position, so output is deterministic for fixed inputs.
    """
    if not candidates:
        raise ValueError("empty candidate set")
    t0 = time.perf_counter()
    n = bordered.n
    taus = _taus(obs_delta, candidates, obs_rows, weights)
    order = np.lexsort((np.arange(len(candidates)), taus))

    computed = {}
    degenerate = []
    best = []                     # sorted computed t values
    visited = 0
    for pos, ci in enumerate(order):
        if use_filter and len(best) >= lenient_k and best[lenient_k - 1] < taus[ci]:
            break
        visited = pos + 1
        cand = candidates[ci]
        if cand.kind == "nochange":
            t = taus[ci]
        else:
            try:
                pred = fp.eliminate(bordered, cand.blocks)
            except fp.DegenerateContingency as exc:
                degenerate.append((cand.label, str(exc)))
                continue
            t = fp.fingerprint_score(obs_delta,
                                     fp.observed_shift(E, pred, n), weights)
        computed[int(ci)] = t
        best.append(t)
        best.sort()

    entries = []
    with_t = sorted(computed, key=lambda ci: (computed[ci], ci))
    for ci in with_t:
        entries.append(RankedEntry(candidate=candidates[ci], tau=float(taus[ci]),
                                   t=computed[ci]))
    without_t = sorted((ci for ci in range(len(candidates)) if ci not in computed),
                       key=lambda ci: (taus[ci], ci))
    for ci in without_t:
        entries.append(RankedEntry(candidate=candidates[ci], tau=float(taus[ci])))
    for r, e in enumerate(entries, start=1):
        e.rank = r
    return RankedDiagnosis(entries=entries, t_computed=len(computed),
                           n_candidates=len(candidates),
                           early_stop_position=visited,
                           elapsed=time.perf_counter() - t0,
                           degenerate=degenerate)


def detect(obs_delta, candidates, obs_rows, bordered, E, **kwargs):
    """(changed, diagnosis): changed is False when 'no change' ranks first."""
    diag = rank(obs_delta, candidates, obs_rows, bordered, E, **kwargs)
    return diag.top().candidate.kind != "nochange", diag


def diagnosis_to_json(diag):
    """JSON-ready summary of a ranked diagnosis."""
    return {
        "candidates": [
            {"kind": e.candidate.kind, "id": e.candidate.label,
             "tau": e.tau, **({"t": e.t} if e.t is not None else {}),
             "rank": e.rank}
            for e in diag.entries
        ],
        "t_computed": diag.t_computed,
        "n_candidates": diag.n_candidates,
        "elapsed": diag.elapsed,
        "degenerate": [list(d) for d in diag.degenerate],
    }
