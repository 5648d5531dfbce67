"""AC power flow: mismatches, Jacobians, Newton solves, bordered-system factorization.

State layout is x = (theta_1..theta_n, vm_1..vm_n, lam_1..lam_c) throughout.
The bordered matrix couples the power-flow Jacobian with the constraint
columns C; its factorization is reused for every contingency scan.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ConvergenceFailure(RuntimeError):
    """Newton iteration failed (divergence, iteration cap, or singular system)."""


class SingularSystemError(RuntimeError):
    """Bordered matrix is singular; usually an isolated island or missing reference."""


@dataclass
class SystemState:
    theta: np.ndarray   # radians
    vmag: np.ndarray    # p.u.
    lam: np.ndarray     # multipliers, p.u. power

    def stack(self):
        return np.concatenate([self.theta, self.vmag, self.lam])

    @classmethod
    def from_stack(cls, x, n, c):
        return cls(theta=x[:n].copy(), vmag=x[n:2 * n].copy(), lam=x[2 * n:2 * n + c].copy())

    def copy(self):
        return SystemState(self.theta.copy(), self.vmag.copy(), self.lam.copy())


def injections(theta, vmag, Y):
    """Bus power injections [P; Q] implied by the voltage state."""
    V = vmag * np.exp(1j * theta)
    S = V * np.conj(Y @ V)
    return np.concatenate([S.real, S.imag])


def power_mismatch(state, model):
    """Residual [H(v) + C lam - s ; C^T v - b] of the constrained power flow."""
    H = injections(state.theta, state.vmag, model.Y)
    v = np.concatenate([state.theta, state.vmag])
    top = H + model.C @ state.lam - model.s
    bot = model.C.T @ v - model.b
    return np.concatenate([top, bot])


def jacobian(theta, vmag, Y):
    """Analytic partials of the injections w.r.t. (theta, vm), 2n x 2n sparse."""
    n = len(theta)
    V = vmag * np.exp(1j * theta)
    Ibus = Y @ V
    diagV = sp.diags(V)
    diagI = sp.diags(Ibus)
    diagVnorm = sp.diags(np.exp(1j * theta))
    dS_dVa = 1j * diagV @ (diagI - Y @ diagV).conj()
    dS_dVm = diagV @ (Y @ diagVnorm).conj() + diagI.conj() @ diagVnorm
    return sp.bmat([[dS_dVa.real, dS_dVm.real],
                    [dS_dVa.imag, dS_dVm.imag]], format="csr")


def _assemble_bordered(model, state):
    J = jacobian(state.theta, state.vmag, model.Y)
    c = model.n_constraints
    return sp.bmat([[J, model.C],
                    [model.C.T, sp.csr_matrix((c, c))]], format="csc")


def _name_zero_pivot(A, labels, n):
    """Best-effort diagnostic: name a variable whose pivot vanishes (small systems)."""
    if A.shape[0] > 1200:
        return "system too large to localize the zero pivot"
    dense = A.toarray()
    dim = dense.shape[0]
    for k in range(dim):
        p = k + int(np.argmax(np.abs(dense[k:, k])))
        if abs(dense[p, k]) < 1e-12:
            if k < n:
                return "zero pivot at theta variable %d" % k
            if k < 2 * n:
                return "zero pivot at vm variable %d" % (k - n)
            lab = labels[k - 2 * n] if k - 2 * n < len(labels) else str(k)
            return "zero pivot at multiplier %s" % lab
        if p != k:
            dense[[k, p]] = dense[[p, k]]
        dense[k + 1:, k:] -= np.outer(dense[k + 1:, k] / dense[k, k], dense[k, k:])
    return "no exact zero pivot found (near-singular)"


class BorderedSystem:
    """Factorized bordered Jacobian [[dH/dv, C], [C^T, 0]] at a linearization state.

    Immutable after construction; solve() and solve_transpose() may be called
    concurrently from many workers.
    """

    def __init__(self, model, state):
        self.model = model
        self.n = model.n
        self.dim = model.dim
        self.A = _assemble_bordered(model, state)
        try:
            self._lu = spla.splu(self.A.tocsc())
        except RuntimeError as exc:
            raise SingularSystemError(
                "bordered power-flow matrix is singular (%s); %s"
                % (exc, _name_zero_pivot(self.A, model.constraint_labels, self.n))) from exc
        self._check_factorization()

    def _check_factorization(self):
        # splu can succeed with exact zeros on U's diagonal; probe before trusting it
        du = self._lu.U.diagonal()
        bad = np.abs(du) < 1e-14
        if bad.any():
            raise SingularSystemError(
                "bordered power-flow matrix is singular; %s"
                % _name_zero_pivot(self.A, self.model.constraint_labels, self.n))

    def solve(self, rhs):
        """x with A x = rhs; rhs may be a vector or a (dim, k) block."""
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def solve_transpose(self, rhs):
        """x with A^T x = rhs (used to form observation rows of A^{-1})."""
        return self._lu.solve(np.asarray(rhs, dtype=float), trans="T")


def initial_state(model, flat=False):
    """Starting point for Newton: case voltages, or a flat start."""
    n = model.n
    if flat:
        theta = np.full(n, 0.0)
        vmag = np.ones(n)
    else:
        theta = model.va_start.copy()
        vmag = model.vm_start.copy()
    return SystemState(theta=theta, vmag=vmag, lam=np.zeros(model.n_constraints))


def newton_solve(model, x0=None, tol=1e-8, max_iter=50, max_halvings=4):
    """Solve the constrained power flow by Newton's method.

    Raises ConvergenceFailure when the residual fails to reach tol in max_iter
    iterations or the linear system is singular (e.g. islanded network).
    Residual history is attached to the returned state as .residuals.
    """
    state = (x0 or initial_state(model)).copy()
    n, c = model.n, model.n_constraints
    resid = power_mismatch(state, model)
    norm = np.max(np.abs(resid))
    history = [norm]
    for _ in range(max_iter):
        if norm < tol:
            state.residuals = history
            return state
        try:
            A = _assemble_bordered(model, state)
            lu = spla.splu(A)
            du = lu.U.diagonal()
            if np.any(np.abs(du) < 1e-14):
                raise RuntimeError("zero pivot")
            step = lu.solve(-resid)
        except RuntimeError as exc:
            raise ConvergenceFailure("singular Newton system: %s" % exc) from exc
        if not np.all(np.isfinite(step)):
            raise ConvergenceFailure("non-finite Newton step")
        x = state.stack()
        alpha = 1.0
        accepted = False
        for h in range(max_halvings + 1):
            trial = SystemState.from_stack(x + alpha * step, n, c)
            if np.all(trial.vmag > 0):
                trial_resid = power_mismatch(trial, model)
                trial_norm = np.max(np.abs(trial_resid))
                if np.isfinite(trial_norm) and (trial_norm < norm or h == max_halvings):
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            raise ConvergenceFailure("step halving produced no usable iterate")
        state, resid, norm = trial, trial_resid, trial_norm
        history.append(norm)
        if norm > 1e8:
            raise ConvergenceFailure("residual diverged (%.3g)" % norm)
    raise ConvergenceFailure(
        "no convergence in %d iterations (residual %.3g)" % (max_iter, norm))
