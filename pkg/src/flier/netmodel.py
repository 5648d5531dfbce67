"""Network model: case parsing, admittance assembly, breaker-level expansion, PMU operators.

Everything here is immutable after construction and safe to share across workers.
Internally buses are 0-based indices; external ids appear only in I/O.
"""

import cmath
import json
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class CaseParseError(ValueError):
    """Malformed case file (carries the offending line number when known)."""


class CaseValidationError(ValueError):
    """Structurally invalid case (bad bus references, non-positive taps, ...)."""


BUS_KINDS = {1: "pq", 2: "pv", 3: "slack"}


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str          # 'slack' | 'pv' | 'pq'
    Pd: float          # p.u.
    Qd: float
    Gs: float          # p.u. shunt at |v|=1
    Bs: float
    Vm: float          # p.u. initial / solved magnitude
    Va: float          # radians


@dataclass(frozen=True)
class Generator:
    bus: int
    Pg: float          # p.u.
    Qg: float
    Vset: float
    status: int = 1


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charge: float    # total line charging, p.u.
    tap: float = 1.0
    shift: float = 0.0  # radians
    status: int = 1


@dataclass(frozen=True)
class RawCase:
    baseMVA: float
    buses: list
    generators: list
    branches: list
    name: str = ""

    def validate(self):
        if self.baseMVA <= 0:
            raise CaseValidationError("baseMVA must be positive")
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise CaseValidationError("duplicate bus ids")
        known = set(ids)
        for g in self.generators:
            if g.bus not in known:
                raise CaseValidationError("generator references unknown bus %d" % g.bus)
        for br in self.branches:
            if br.from_bus not in known or br.to_bus not in known:
                raise CaseValidationError(
                    "branch (%d, %d) references unknown bus" % (br.from_bus, br.to_bus))
            if br.status and br.tap <= 0:
                raise CaseValidationError(
                    "branch (%d, %d) has non-positive tap" % (br.from_bus, br.to_bus))
        if not any(b.kind == "slack" for b in self.buses):
            raise CaseValidationError("case has no slack bus")
        return self


# ---------------------------------------------------------------------------
# Case parsing (MATPOWER .m subset and the JSON equivalent)
# ---------------------------------------------------------------------------

_MATRIX_START = re.compile(r"mpc\.(\w+)\s*=\s*\[")
_SCALAR = re.compile(r"mpc\.(\w+)\s*=\s*([^;\[]+);")


def _strip_comment(line):
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


def parse_case(text, name=""):
    """Parse a MATPOWER-format (v2) case into a normalized RawCase.

    Powers are converted to per-unit on baseMVA and angles to radians.
    Out-of-service branches are retained with status 0.
    """
    scalars = {}
    matrices = {}
    current = None   # (name, rows)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if current is None:
            m = _MATRIX_START.search(line)
            if m:
                current = (m.group(1), [])
                line = line[m.end():]
            else:
                m = _SCALAR.search(line)
                if m and not m.group(2).strip().startswith("'"):
                    try:
                        scalars[m.group(1)] = float(m.group(2))
                    except ValueError as exc:
                        raise CaseParseError(
                            "line %d: bad scalar for mpc.%s" % (lineno, m.group(1))) from exc
                continue
        # inside a matrix block; both ';' and end-of-line terminate a row
        name_, rows = current
        closed = False
        if "]" in line:
            line = line[:line.index("]")]
            closed = True
        for chunk in line.split(";"):
            toks = chunk.split()
            if not toks:
                continue
            try:
                rows.append((lineno, [float(t) for t in toks]))
            except ValueError as exc:
                raise CaseParseError(
                    "line %d: bad numeric field in mpc.%s" % (lineno, name_)) from exc
        if closed:
            matrices[name_] = rows
            current = None
    if current is not None:
        raise CaseParseError("unterminated matrix mpc.%s" % current[0])

    if "baseMVA" not in scalars:
        raise CaseParseError("missing mpc.baseMVA")
    base = scalars["baseMVA"]
    if base <= 0:
        raise CaseValidationError("baseMVA must be positive")

    def need(mat, ncols, what):
        if mat not in matrices:
            raise CaseParseError("missing mpc.%s" % mat)
        out = []
        for lineno, row in matrices[mat]:
            if len(row) < ncols:
                raise CaseParseError(
                    "line %d: mpc.%s row has %d fields, expected >= %d (%s)"
                    % (lineno, mat, len(row), ncols, what))
            out.append(row)
        return out

    buses = []
    for row in need("bus", 9, "through Va"):
        kind = BUS_KINDS.get(int(row[1]))
        if kind is None:
            # type 4 = isolated in MATPOWER; we do not model out-of-service buses
            raise CaseValidationError("bus %d has unsupported type %d" % (int(row[0]), int(row[1])))
        buses.append(Bus(id=int(row[0]), kind=kind,
                         Pd=row[2] / base, Qd=row[3] / base,
                         Gs=row[4] / base, Bs=row[5] / base,
                         Vm=row[7], Va=np.deg2rad(row[8])))

    gens = []
    for row in need("gen", 6, "through Vg"):
        status = int(row[7]) if len(row) > 7 else 1
        gens.append(Generator(bus=int(row[0]), Pg=row[1] / base, Qg=row[2] / base,
                              Vset=row[5], status=status))

    branches = []
    for row in need("branch", 5, "through charging b"):
        tap = row[8] if len(row) > 8 else 0.0
        if tap == 0.0:
            tap = 1.0
        shift = np.deg2rad(row[9]) if len(row) > 9 else 0.0
        status = int(row[10]) if len(row) > 10 else 1
        branches.append(Branch(from_bus=int(row[0]), to_bus=int(row[1]),
                               r=row[2], x=row[3], b_charge=row[4],
                               tap=tap, shift=shift, status=status))

    return RawCase(baseMVA=base, buses=buses, generators=gens,
                   branches=branches, name=name).validate()


def parse_json_case(text, name=""):
    """Parse the JSON network format (same units as MATPOWER: MW/MVAr, degrees)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError("invalid JSON case: %s" % exc) from exc
    try:
        base = float(doc["baseMVA"])
        kindmap = {"slack": "slack", "PV": "pv", "pv": "pv", "PQ": "pq", "pq": "pq",
                   3: "slack", 2: "pv", 1: "pq"}
        buses = [Bus(id=int(b["id"]), kind=kindmap[b.get("type", "PQ")],
                     Pd=float(b.get("Pd", 0.0)) / base, Qd=float(b.get("Qd", 0.0)) / base,
                     Gs=float(b.get("Gs", 0.0)) / base, Bs=float(b.get("Bs", 0.0)) / base,
                     Vm=float(b.get("Vm", 1.0)), Va=np.deg2rad(float(b.get("Va", 0.0))))
                 for b in doc["buses"]]
        gens = [Generator(bus=int(g["bus"]), Pg=float(g.get("Pg", 0.0)) / base,
                          Qg=float(g.get("Qg", 0.0)) / base, Vset=float(g.get("Vset", 1.0)),
                          status=int(g.get("status", 1)))
                for g in doc.get("generators", [])]
        branches = [Branch(from_bus=int(br["from"]), to_bus=int(br["to"]),
                           r=float(br["r"]), x=float(br["x"]),
                           b_charge=float(br.get("b", 0.0)),
                           tap=float(br.get("tap", 1.0)) or 1.0,
                           shift=np.deg2rad(float(br.get("shift", 0.0))),
                           status=int(br.get("status", 1)))
                    for br in doc["branches"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseParseError("invalid JSON case: %s" % exc) from exc
    return RawCase(baseMVA=base, buses=buses, generators=gens,
                   branches=branches, name=name).validate()


def load_case(path):
    """Load a case file, dispatching on extension (.m MATPOWER, .json)."""
    path = str(path)
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        return parse_json_case(text, name=path)
    return parse_case(text, name=path)


def render_matpower(case, name="case"):
    """Render a RawCase back to MATPOWER v2 text (inverse of parse_case)."""
    kindnum = {"pq": 1, "pv": 2, "slack": 3}
    base = case.baseMVA
    out = ["function mpc = %s" % name,
           "mpc.version = '2';",
           "mpc.baseMVA = %.17g;" % base,
           "mpc.bus = ["]
    for b in case.buses:
        out.append("\t%d\t%d\t%.17g\t%.17g\t%.17g\t%.17g\t1\t%.17g\t%.17g"
                   "\t0\t1\t1.1\t0.9;"
                   % (b.id, kindnum[b.kind], b.Pd * base, b.Qd * base,
                      b.Gs * base, b.Bs * base, b.Vm, np.rad2deg(b.Va)))
    out.append("];")
    out.append("mpc.gen = [")
    for g in case.generators:
        out.append("\t%d\t%.17g\t%.17g\t0\t0\t%.17g\t%.17g\t%d\t0\t0;"
                   % (g.bus, g.Pg * base, g.Qg * base, g.Vset, base, g.status))
    out.append("];")
    out.append("mpc.branch = [")
    for br in case.branches:
        out.append("\t%d\t%d\t%.17g\t%.17g\t%.17g\t0\t0\t0\t%.17g\t%.17g\t%d;"
                   % (br.from_bus, br.to_bus, br.r, br.x, br.b_charge,
                      br.tap, np.rad2deg(br.shift), br.status))
    out.append("];")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Bus-branch admittance model
# ---------------------------------------------------------------------------

def _branch_admittance(br):
    """Two-port admittance block [[yff, yft], [ytf, ytt]] of one branch (pi model)."""
    if br.r == 0.0 and br.x == 0.0:
        raise CaseValidationError(
            "branch (%d, %d) has zero series impedance; model ideal ties as breakers"
            % (br.from_bus, br.to_bus))
    ys = 1.0 / complex(br.r, br.x)
    ysh = 0.5j * br.b_charge
    t = br.tap * cmath.exp(1j * br.shift)
    yff = (ys + ysh) / (br.tap * br.tap)
    yft = -ys / t.conjugate()
    ytf = -ys / t
    ytt = ys + ysh
    return np.array([[yff, yft], [ytf, ytt]])


@dataclass(frozen=True)
class DeltaY:
    """Admittance change of a single-branch outage, supported on rows/cols {i, k}."""
    i: int
    k: int
    block: np.ndarray   # 2x2 complex, ordered [i, k] x [i, k]

    def is_zero(self, tol=0.0):
        return np.max(np.abs(self.block)) <= tol


@dataclass(frozen=True)
class PowerFlowModel:
    """Constrained power-flow system data: H(v; Y) + C lam = s, C^T v = b."""
    Y: sp.csr_matrix          # n x n complex
    s: np.ndarray             # 2n
    C: sp.csc_matrix          # 2n x c
    b: np.ndarray             # c
    obs_map: dict             # bus id -> variable index in the theta block
    constraint_labels: tuple
    vm_start: np.ndarray
    va_start: np.ndarray

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def n_constraints(self):
        return self.C.shape[1]

    @property
    def dim(self):
        return 2 * self.n + self.n_constraints

    def variable_index(self, bus_id):
        try:
            return self.obs_map[bus_id]
        except KeyError:
            raise KeyError("unknown bus id %r" % (bus_id,)) from None


class BusBranchNetwork:
    """Static bus-branch network: admittance matrix, injections, bus kinds."""

    def __init__(self, case):
        case.validate()
        self.case = case
        self.bus_ids = [b.id for b in case.buses]
        self.id2idx = {bid: i for i, bid in enumerate(self.bus_ids)}
        n = self.n = len(case.buses)

        gens_at = {}
        for g in case.generators:
            if g.status:
                gens_at.setdefault(self.id2idx[g.bus], []).append(g)
        self.gens_at = gens_at

        # bus kinds; PV buses without an in-service generator fall back to PQ
        kinds = []
        for i, bus in enumerate(case.buses):
            kind = bus.kind
            if kind == "pv" and i not in gens_at:
                kind = "pq"
            kinds.append(kind)
        self.kinds = tuple(kinds)
        slack = [i for i, k in enumerate(self.kinds) if k == "slack"]
        if len(slack) != 1:
            raise CaseValidationError("expected exactly one slack bus, found %d" % len(slack))
        self.slack = slack[0]

        self.vset = np.array([b.Vm for b in case.buses])
        for i, gs in gens_at.items():
            self.vset[i] = gs[0].Vset
        self.va_slack = case.buses[self.slack].Va

        # injections
        s = np.zeros(2 * n)
        for i, bus in enumerate(case.buses):
            s[i] -= bus.Pd
            s[n + i] -= bus.Qd
        for i, gs in gens_at.items():
            s[i] += sum(g.Pg for g in gs)
            s[n + i] += sum(g.Qg for g in gs)
        self.s = s

        # admittance assembly
        rows, cols, vals = [], [], []
        self.branch_blocks = []
        for br in case.branches:
            if not br.status:
                self.branch_blocks.append(None)
                continue
            i, k = self.id2idx[br.from_bus], self.id2idx[br.to_bus]
            blk = _branch_admittance(br)
            self.branch_blocks.append((i, k, blk))
            rows.extend((i, i, k, k))
            cols.extend((i, k, i, k))
            vals.extend((blk[0, 0], blk[0, 1], blk[1, 0], blk[1, 1]))
        for i, bus in enumerate(case.buses):
            rows.append(i)
            cols.append(i)
            vals.append(complex(bus.Gs, bus.Bs))
        self.Y = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex).tocsr()

    def in_service_branches(self):
        """Indices into case.branches of branches currently in service."""
        return [j for j, blk in enumerate(self.branch_blocks) if blk is not None]

    def branch_outage_delta(self, branch_index):
        """Admittance delta removing one in-service branch (negated pi contribution)."""
        blk = self.branch_blocks[branch_index]
        if blk is None:
            raise CaseValidationError("branch #%d is already out of service" % branch_index)
        i, k, block = blk
        return DeltaY(i=i, k=k, block=-block)

    def is_connected_without(self, branch_index=None):
        """True if the in-service branch graph stays connected (optionally minus one branch)."""
        adj = [[] for _ in range(self.n)]
        for j, blk in enumerate(self.branch_blocks):
            if blk is None or j == branch_index:
                continue
            i, k, _ = blk
            adj[i].append(k)
            adj[k].append(i)
        seen = np.zeros(self.n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        return bool(seen.all())

    def flow_model(self):
        """Constrained system on bus granularity: boundary rows only (no ties)."""
        n = self.n
        cols, b, labels = [], [], []
        cols.append(([self.slack], [1.0]))
        b.append(self.va_slack)
        labels.append("theta[bus %s]" % self.bus_ids[self.slack])
        cols.append(([n + self.slack], [1.0]))
        b.append(self.vset[self.slack])
        labels.append("vm[bus %s]" % self.bus_ids[self.slack])
        for i, kind in enumerate(self.kinds):
            if kind == "pv":
                cols.append(([n + i], [1.0]))
                b.append(self.vset[i])
                labels.append("vm[bus %s]" % self.bus_ids[i])
        C = _columns_to_csc(cols, 2 * n)
        return PowerFlowModel(Y=self.Y, s=self.s, C=C, b=np.array(b),
                              obs_map=dict(self.id2idx), constraint_labels=tuple(labels),
                              vm_start=self.vset.copy(),
                              va_start=np.array([bus.Va for bus in self.case.buses]))


def build_admittance(case):
    """Assemble the bus-branch network (admittance matrix and injections)."""
    return BusBranchNetwork(case)


def _columns_to_csc(cols, nrows):
    rows, cix, vals = [], [], []
    for j, (r, v) in enumerate(cols):
        rows.extend(r)
        cix.extend([j] * len(r))
        vals.extend(v)
    return sp.coo_matrix((vals, (rows, cix)), shape=(nrows, len(cols))).tocsc()


# ---------------------------------------------------------------------------
# Breaker-level (bus section) model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Section:
    """One bus section: home bus plus the single element attached to it."""
    index: int          # global section index
    bus: int            # home bus index in the bus-branch model
    element: str        # 'branch' | 'load' | 'gen'
    branch_index: int = -1   # for 'branch': index into case.branches
    branch_end: int = -1     # 0 = from side, 1 = to side

    def key(self):
        if self.element == "branch":
            return ("branch", self.branch_index, self.branch_end)
        return (self.element,)


@dataclass(frozen=True)
class SplitCandidate:
    """Opening two breakers of one ring: the breakaway arc leaves the substation."""
    bus: int                    # home bus index
    breakers: tuple             # pair of breaker positions on the ring
    breakaway: tuple            # global section indices of the breakaway arc
    label: str

    def key(self):
        return (self.bus, frozenset(self.breakaway))


class BreakerNetwork:
    """Every bus expanded into a ring substation with one section per element.

    Ring order: branch-end sections ascending by (neighbor bus id, branch index),
    then the load section, then the generator section. The first section is the
    master; bus shunts attach to the master. Ties run star-fashion from each
    slave to its master (one angle row, one magnitude row per slave).
    """

    def __init__(self, net):
        self.net = net
        case = net.case
        n_bus = net.n

        sections = []
        rings = []       # per bus: list of global section indices, cyclic order
        masters = []
        for i in range(n_bus):
            elems = []
            for j, blk in enumerate(net.branch_blocks):
                if blk is None:
                    continue
                bi, bk, _ = blk
                br = case.branches[j]
                # parallel circuits order by intrinsic parameters, so the ring
                # layout does not depend on the branch list order
                key = (br.x, br.r, br.b_charge, br.tap, br.shift)
                if bi == i:
                    elems.append(((net.bus_ids[bk],) + key, j,
                                  Section(0, i, "branch", j, 0)))
                elif bk == i:
                    elems.append(((net.bus_ids[bi],) + key, j,
                                  Section(0, i, "branch", j, 1)))
            elems.sort(key=lambda t: (t[0], t[1]))
            ring = [e[2] for e in elems]
            bus = case.buses[i]
            if bus.Pd != 0.0 or bus.Qd != 0.0:
                ring.append(Section(0, i, "load"))
            if i in net.gens_at:
                ring.append(Section(0, i, "gen"))
            if not ring:
                raise CaseValidationError(
                    "bus %s has no attached elements" % net.bus_ids[i])
            start = len(sections)
            ring = [Section(start + p, s.bus, s.element, s.branch_index, s.branch_end)
                    for p, s in enumerate(ring)]
            sections.extend(ring)
            rings.append([s.index for s in ring])
            masters.append(start)

        self.sections = sections
        self.rings = rings
        self.masters = masters
        ns = self.n_sections = len(sections)

        # section-level admittance: branch entries at their end sections,
        # bus shunts on the master section
        rows, cols, vals = [], [], []
        sec_of_branch_end = {}
        for s in sections:
            if s.element == "branch":
                sec_of_branch_end[(s.branch_index, s.branch_end)] = s.index
        for j, blk in enumerate(net.branch_blocks):
            if blk is None:
                continue
            sf = sec_of_branch_end[(j, 0)]
            st = sec_of_branch_end[(j, 1)]
            _, _, block = blk
            rows.extend((sf, sf, st, st))
            cols.extend((sf, st, sf, st))
            vals.extend((block[0, 0], block[0, 1], block[1, 0], block[1, 1]))
        for i in range(n_bus):
            bus = case.buses[i]
            if bus.Gs != 0.0 or bus.Bs != 0.0:
                m = masters[i]
                rows.append(m)
                cols.append(m)
                vals.append(complex(bus.Gs, bus.Bs))
        self.Y = sp.coo_matrix((vals, (rows, cols)), shape=(ns, ns), dtype=complex).tocsr()

        # section-level injections: loads and generators sit on their own sections
        s_vec = np.zeros(2 * ns)
        for sec in sections:
            if sec.element == "load":
                bus = case.buses[sec.bus]
                s_vec[sec.index] -= bus.Pd
                s_vec[ns + sec.index] -= bus.Qd
            elif sec.element == "gen":
                s_vec[sec.index] += sum(g.Pg for g in net.gens_at[sec.bus])
                s_vec[ns + sec.index] += sum(g.Qg for g in net.gens_at[sec.bus])
        self.s = s_vec

        # tie constraints: star to master, angle row then magnitude row per slave
        cols_c, b, labels = [], [], []
        self.tie_cols = {}   # slave section index -> (angle col, magnitude col)
        for i in range(n_bus):
            m = masters[i]
            for sidx in rings[i]:
                if sidx == m:
                    continue
                self.tie_cols[sidx] = (len(cols_c), len(cols_c) + 1)
                cols_c.append(([sidx, m], [1.0, -1.0]))
                b.append(0.0)
                labels.append("tie-theta[sec %d]" % sidx)
                cols_c.append(([ns + sidx, ns + m], [1.0, -1.0]))
                b.append(0.0)
                labels.append("tie-vm[sec %d]" % sidx)
        self.n_tie_cols = len(cols_c)
        sm = masters[net.slack]
        cols_c.append(([sm], [1.0]))
        b.append(net.va_slack)
        labels.append("theta[bus %s]" % net.bus_ids[net.slack])
        cols_c.append(([ns + sm], [1.0]))
        b.append(net.vset[net.slack])
        labels.append("vm[bus %s]" % net.bus_ids[net.slack])
        for i, kind in enumerate(net.kinds):
            if kind == "pv":
                cols_c.append(([ns + masters[i]], [1.0]))
                b.append(net.vset[i])
                labels.append("vm[bus %s]" % net.bus_ids[i])
        self.C = _columns_to_csc(cols_c, 2 * ns)
        self.b = np.array(b)
        self.constraint_labels = tuple(labels)

    def flow_model(self):
        net = self.net
        vm0 = np.array([net.vset[s.bus] for s in self.sections])
        va0 = np.array([net.case.buses[s.bus].Va for s in self.sections])
        obs = {bid: self.masters[net.id2idx[bid]] for bid in net.bus_ids}
        return PowerFlowModel(Y=self.Y, s=self.s, C=self.C, b=self.b,
                              obs_map=obs, constraint_labels=self.constraint_labels,
                              vm_start=vm0, va_start=va0)

    def master_of_bus_id(self, bus_id):
        return self.masters[self.net.id2idx[bus_id]]

    def map_state(self, bus_state):
        """Map a solved bus-branch state onto sections and recover tie multipliers.

        Every section takes its home bus's (theta, vm). Tie multipliers come out
        of the slave sections' own power balances; boundary multipliers from the
        master balances after the tie contributions are known.
        """
        from . import acpf

        ns = self.n_sections
        theta = np.array([bus_state.theta[s.bus] for s in self.sections])
        vmag = np.array([bus_state.vmag[s.bus] for s in self.sections])
        H = acpf.injections(theta, vmag, self.Y)
        lam = np.zeros(self.C.shape[1])
        for sidx, (ca, cm) in self.tie_cols.items():
            lam[ca] = self.s[sidx] - H[sidx]
            lam[cm] = self.s[ns + sidx] - H[ns + sidx]
        # boundary rows: whatever the ties leave unbalanced at the master
        resid = self.s - H - self.C[:, :self.n_tie_cols] @ lam[:self.n_tie_cols]
        bc = self.C[:, self.n_tie_cols:].tocoo()
        for r, c, v in zip(bc.row, bc.col, bc.data):
            lam[self.n_tie_cols + c] = resid[r] / v
        return acpf.SystemState(theta=theta, vmag=vmag, lam=lam)

    def enumerate_splits(self):
        """All admissible two-breaker openings across every ring substation.

        A partition is dropped when an arc carries an injection element (load or
        generator) but no branch element, or when the ring has fewer than two
        sections. The arc not containing the master is the breakaway group.
        """
        out = []
        for bus, ring in enumerate(self.rings):
            d = len(ring)
            if d < 2:
                continue
            for p in range(d):
                for q in range(p + 1, d):
                    # opening breakers p and q (breaker r sits between sections
                    # r-1 and r) yields arcs ring[p:q] and ring[q:] + ring[:p]
                    arc1 = ring[p:q]
                    arc2 = ring[q:] + ring[:p]
                    master = self.masters[bus]
                    breakaway = arc1 if master not in arc1 else arc2
                    if not self._arc_admissible(breakaway) or not self._arc_admissible(
                            arc2 if breakaway is arc1 else arc1):
                        continue
                    labels = ",".join(self._section_label(s) for s in breakaway)
                    out.append(SplitCandidate(
                        bus=bus, breakers=(p, q), breakaway=tuple(breakaway),
                        label="split bus %s away:[%s]" % (self.net.bus_ids[bus], labels)))
        return out

    def _arc_admissible(self, arc):
        has_branch = any(self.sections[s].element == "branch" for s in arc)
        has_inj = any(self.sections[s].element in ("load", "gen") for s in arc)
        return has_branch or not has_inj

    def _section_label(self, sidx):
        s = self.sections[sidx]
        if s.element == "branch":
            br = self.net.case.branches[s.branch_index]
            other = br.to_bus if s.branch_end == 0 else br.from_bus
            return "br%d->%s" % (s.branch_index, other)
        return s.element


def expand_to_breaker_model(net):
    """Expand every bus of a bus-branch network into a ring substation."""
    return BreakerNetwork(net)


def enumerate_splits(bnet):
    return bnet.enumerate_splits()


# ---------------------------------------------------------------------------
# PMU observation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PMUDeployment:
    """PMUs on a set of buses; each contributes a (theta, vm) row pair."""
    buses: tuple   # bus ids, kept sorted

    def __init__(self, buses):
        object.__setattr__(self, "buses", tuple(sorted(set(buses))))

    @property
    def m(self):
        return 2 * len(self.buses)


def extend_with_neighbors(bus_ids, net):
    """PMU buses plus every bus adjacent through an in-service branch.

    A PMU reports voltage and branch-current phasors, so the voltages of
    neighbouring buses are derived observations; sweeps observe this set.
    """
    obs = set(bus_ids)
    for j in net.in_service_branches():
        br = net.case.branches[j]
        if br.from_bus in bus_ids:
            obs.add(br.to_bus)
        if br.to_bus in bus_ids:
            obs.add(br.from_bus)
    return sorted(obs)


def observation_operator(deployment, model):
    """Selector picking observed (theta, vm) state components, 2 rows per PMU.

    On a breaker model the PMU reads the master section of its bus (the model's
    obs_map resolves that). Multiplier entries are ignored: the selector only
    spans the voltage block.
    """
    n = model.n
    rows, cols, vals = [], [], []
    for r, bus_id in enumerate(deployment.buses):
        idx = model.variable_index(bus_id)
        rows.extend((2 * r, 2 * r + 1))
        cols.extend((idx, n + idx))
        vals.extend((1.0, 1.0))
    return sp.coo_matrix((vals, (rows, cols)), shape=(deployment.m, 2 * n)).tocsr()


def observe(E, state):
    """Observed voltage components of a state (E applied to the voltage block)."""
    v = np.concatenate([state.theta, state.vmag])
    return E @ v
