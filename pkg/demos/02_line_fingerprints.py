"""Predict the voltage shift of a line outage from the pre-event state alone.

The outage changes the admittance matrix on just two buses, so the Jacobian
changes by a rank-3 update. Block elimination against the factorized pre-event
system yields the predicted shift with three sparse solves; here we compare it
against a full nonlinear re-solve of the damaged network.
"""

import numpy as np

from flier import acpf, cases, fingerprint, harness, netmodel

case = cases.load_bundled("case57")
net = netmodel.build_admittance(case)
model = net.flow_model()
pre = acpf.newton_solve(model, tol=1e-11)
bordered = acpf.BorderedSystem(model, pre)

branch_index = 7                      # the 8-9 line
br = case.branches[branch_index]
print("hypothesis: line %d-%d fails" % (br.from_bus, br.to_bus))

blocks = fingerprint.line_blocks(pre, net, branch_index)
pred = fingerprint.eliminate(bordered, blocks)
print("low-rank blocks on state rows %s, gamma = %s" %
      (blocks.rows.tolist(), np.round(pred.gamma, 5)))

sim, status = harness.simulate_line_failure(case, net, branch_index, pre)
net2, post = sim
exact = np.concatenate([post.theta - pre.theta, post.vmag - pre.vmag])
approx = pred.delta_x[:2 * net.n]

print("predicted |shift| %.5f, exact |shift| %.5f, error %.5f (%.1f%%)" %
      (np.linalg.norm(approx), np.linalg.norm(exact),
       np.linalg.norm(approx - exact),
       100 * np.linalg.norm(approx - exact) / np.linalg.norm(exact)))

print("\nbus   dtheta_pred  dtheta_true   dvm_pred   dvm_true")
for bid in (8, 9, 10, 12, 55):
    i = net.id2idx[bid]
    print("%3d   %+.5f    %+.5f    %+.5f   %+.5f" %
          (bid, approx[i], exact[i], approx[net.n + i], exact[net.n + i]))
