"""Low-rank contingency blocks, voltage-shift fingerprints, and scores.

Each hypothesized topology change perturbs the bordered power-flow system in a
way supported on a handful of rows. Block elimination against the factorized
pre-event matrix yields the predicted state shift with two or three linear
solves; the filter score needs no solves at all once the observation rows of
the inverse are cached.
"""

from dataclasses import dataclass

import numpy as np


class DegenerateContingency(RuntimeError):
    """The candidate's reduced system is singular (indistinguishable hypothesis)."""


LINE_Z = np.array([0.0, 0.5, 0.5])


@dataclass(frozen=True)
class ContingencyBlocks:
    """Sparse low-rank data of one hypothesis.

    rows holds the global state-row indices carrying the blocks; U0 (and V0 for
    line failures) are the dense values on those rows. For merges and splits
    rhs is the 2-vector driving the bordered solve; line failures instead use
    the fixed combination vector z = [0, 1/2, 1/2].
    """
    kind: str                 # 'line' | 'merge' | 'split'
    rows: np.ndarray
    U0: np.ndarray            # (len(rows), p)
    V0: np.ndarray = None     # (len(rows), p), line only
    rhs: np.ndarray = None    # (p,), merge/split only

    @property
    def p(self):
        return self.U0.shape[1]

    def dense_U(self, dim):
        U = np.zeros((dim, self.p))
        U[self.rows, :] = self.U0
        return U

    def dense_V(self, dim):
        V = np.zeros((dim, self.p))
        V[self.rows, :] = self.V0
        return V


@dataclass
class Fingerprint:
    """Predicted state shift for one hypothesis."""
    delta_x: np.ndarray       # 2n + c
    gamma: np.ndarray


def line_blocks_from_delta(state, n, delta):
    """Blocks of a line outage given its admittance change on buses {i, k}.

    The four affected injection components and their derivatives with respect
    to (theta_i - theta_k, log vm_i, log vm_k) give a rank-3 factorization of
    the Jacobian change; the residual term is recovered as U0 @ [0, 1/2, 1/2].
    """
    i, k = delta.i, delta.k
    gii, bii = delta.block[0, 0].real, delta.block[0, 0].imag
    gik, bik = delta.block[0, 1].real, delta.block[0, 1].imag
    gki, bki = delta.block[1, 0].real, delta.block[1, 0].imag
    gkk, bkk = delta.block[1, 1].real, delta.block[1, 1].imag
    vi, vk = state.vmag[i], state.vmag[k]
    if vi == 0.0 or vk == 0.0:
        raise ValueError("zero voltage magnitude at an endpoint of the failed line")
    tik = state.theta[i] - state.theta[k]
    c, s = np.cos(tik), np.sin(tik)

    Pik = vi * vk * (gik * c + bik * s)
    Qik = vi * vk * (-bik * c + gik * s)
    Pki = vk * vi * (gki * c - bki * s)
    Qki = vk * vi * (-bki * c - gki * s)

    Pi = Pik + gii * vi * vi
    Qi = Qik - bii * vi * vi
    Pk = Pki + gkk * vk * vk
    Qk = Qki - bkk * vk * vk

    gii2, bii2 = gii * vi * vi, bii * vi * vi
    gkk2, bkk2 = gkk * vk * vk, bkk * vk * vk
    U = np.array([
        [-Qi - bii2, Pi + gii2, Pi - gii2],
        [Qk + bkk2, Pk - gkk2, Pk + gkk2],
        [Pi - gii2, Qi - bii2, Qi + bii2],
        [-Pk + gkk2, Qk + bkk2, Qk - bkk2],
    ])
    Vt = np.array([
        [1.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0 / vi, 0.0],
        [0.0, 0.0, 0.0, 1.0 / vk],
    ])
    rows = np.array([i, k, n + i, n + k])
    return ContingencyBlocks(kind="line", rows=rows, U0=U, V0=Vt.T)


def line_blocks(state, net, branch_index):
    """Blocks for the outage of one in-service branch of a bus-branch network."""
    delta = net.branch_outage_delta(branch_index)
    return line_blocks_from_delta(state, net.n, delta)


def merge_blocks(state, model, pair):
    """Blocks tying together two voltage variable pairs (theta and vm ties).

    pair gives the two variable indices in the theta block; the corresponding
    magnitude variables are tied as well. rhs is the pre-event constraint gap.
    """
    i, j = pair
    if i == j:
        raise ValueError("cannot merge a voltage variable with itself")
    n = model.n
    rows = np.array([i, j, n + i, n + j])
    U = np.array([
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
    ])
    rhs = np.array([state.theta[i] - state.theta[j],
                    state.vmag[i] - state.vmag[j]])
    return ContingencyBlocks(kind="merge", rows=rows, U0=U, rhs=rhs)


def split_blocks(state, bnet, candidate):
    """Blocks freeing a breakaway group of bus sections from its master.

    Column 1 relaxes the magnitude ties of the breakaway sections, column 2 the
    angle ties; rhs sums the corresponding tie multipliers (the power the group
    stops receiving through the opened breakers).
    """
    ns = bnet.n_sections
    rows, vals = [], []
    for sidx in candidate.breakaway:
        ca, cm = bnet.tie_cols[sidx]
        rows.append(2 * ns + cm)
        vals.append((1.0, 0.0))
        rows.append(2 * ns + ca)
        vals.append((0.0, 1.0))
    rows = np.array(rows)
    U = np.array(vals)
    rhs = U.T @ state.lam[rows - 2 * ns]
    return ContingencyBlocks(kind="split", rows=rows, U0=U, rhs=rhs)


def eliminate(bordered, blocks):
    """Predicted state shift by block elimination against the factorized system.

    Merges/splits take two solves: gamma = (U^T A^-1 U)^-1 rhs and
    dx = -A^-1 U gamma. Line failures take three: with W = V^T A^-1 U,
    gamma = -(I + W)^-1 W z and dx = -A^-1 U (z + gamma).
    """
    dim = bordered.dim
    if blocks.kind != "line" and not np.any(blocks.rhs):
        # constraint gap already closed: the hypothesis predicts no shift
        return Fingerprint(delta_x=np.zeros(dim), gamma=np.zeros(blocks.p))
    AinvU = bordered.solve(blocks.dense_U(dim))
    if blocks.kind == "line":
        W = blocks.V0.T @ AinvU[blocks.rows, :]
        try:
            gamma = -np.linalg.solve(np.eye(blocks.p) + W, W @ LINE_Z)
        except np.linalg.LinAlgError as exc:
            raise DegenerateContingency("singular (I + W) capture matrix") from exc
        delta_x = -AinvU @ (LINE_Z + gamma)
    else:
        M = blocks.U0.T @ AinvU[blocks.rows, :]
        try:
            gamma = np.linalg.solve(M, blocks.rhs)
        except np.linalg.LinAlgError as exc:
            raise DegenerateContingency("singular U^T A^-1 U capture matrix") from exc
        delta_x = -AinvU @ gamma
    if not np.all(np.isfinite(delta_x)):
        raise DegenerateContingency("non-finite fingerprint")
    return Fingerprint(delta_x=delta_x, gamma=gamma)


def observed_shift(E, fingerprint, n):
    """PMU-visible part of a predicted shift (multiplier entries ignored)."""
    return E @ fingerprint.delta_x[:2 * n]


def filter_score(obs_delta, obs_rows, blocks, weights=None):
    """Least-squares residual of the observed shift against the candidate's span.

    obs_rows is the cached (m x dim) block of observation rows of the inverse;
    only the candidate's few columns are touched. Rank-deficient spans fall
    back to the minimum-norm fit (no error).
    """
    cols = obs_rows[:, blocks.rows] @ blocks.U0
    y = obs_delta
    if weights is not None:
        cols = cols * weights[:, None]
        y = y * weights
    mu, *_ = np.linalg.lstsq(cols, y, rcond=None)
    return float(np.linalg.norm(y - cols @ mu))


def fingerprint_score(obs_delta, predicted_obs, weights=None):
    """Euclidean distance between observed and predicted PMU shifts."""
    d = obs_delta - predicted_obs
    if weights is not None:
        d = d * weights
    return float(np.linalg.norm(d))
