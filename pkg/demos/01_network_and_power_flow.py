"""Load a bundled network, assemble its admittance model, and solve the power flow.

Walks through the basic objects everything else builds on: the parsed case,
the bus-branch admittance matrix, the constrained flow model, and a Newton
solution with its residual history.
"""

import numpy as np

from flier import acpf, cases, netmodel

case = cases.load_bundled("case57")
print("case %s: %d buses, %d generators, %d branches" %
      (case.name, len(case.buses), len(case.generators), len(case.branches)))

net = netmodel.build_admittance(case)
print("Y-bus: %d x %d with %d nonzeros" % (net.n, net.n, net.Y.nnz))

# the flow model couples the injections with the boundary constraints:
# the slack bus pins its angle and magnitude, PV buses pin magnitudes,
# and multipliers absorb the matching unknown injections
model = net.flow_model()
print("constraints:", ", ".join(model.constraint_labels[:4]), "...")

state = acpf.newton_solve(model)
print("newton residuals:", " -> ".join("%.2e" % r for r in state.residuals))

n = net.n
H = acpf.injections(state.theta, state.vmag, net.Y)
slack_mw = (H[net.slack] + case.buses[net.slack].Pd) * case.baseMVA
print("slack generation %.2f MW, system losses %.2f MW" %
      (slack_mw, H[:n].sum() * case.baseMVA))
print("voltage magnitudes: %.4f to %.4f p.u." %
      (state.vmag.min(), state.vmag.max()))

# the recovered multipliers carry the absorbed injections: the slack P
# multiplier equals scheduled-minus-actual slack generation
lam = dict(zip(model.constraint_labels, state.lam))
print("slack P multiplier: %.4f p.u." % lam["theta[bus 1]"])
