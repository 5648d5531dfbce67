"""flier: identify power-network topology changes from sparse PMU observations.

The package splits into:

- netmodel: case parsing, admittance assembly, breaker-level expansion, PMU operators
- acpf: constrained AC power flow (mismatch, Jacobian, Newton, bordered solves)
- fingerprint: low-rank contingency blocks, voltage-shift fingerprints, scores
- ranking: filtered candidate scan with lazy fingerprint evaluation
- harness: ground-truth simulation, sweeps, CSV/JSON outputs
- cases: bundled test networks and a synthetic large-grid generator
"""

from .netmodel import (
    Branch,
    Bus,
    BusBranchNetwork,
    CaseParseError,
    CaseValidationError,
    DeltaY,
    Generator,
    PMUDeployment,
    PowerFlowModel,
    RawCase,
    build_admittance,
    expand_to_breaker_model,
    enumerate_splits,
    extend_with_neighbors,
    load_case,
    observation_operator,
    observe,
    parse_case,
    parse_json_case,
    render_matpower,
)
from .acpf import (
    BorderedSystem,
    ConvergenceFailure,
    SingularSystemError,
    SystemState,
    initial_state,
    injections,
    jacobian,
    newton_solve,
    power_mismatch,
)
from .fingerprint import (
    ContingencyBlocks,
    DegenerateContingency,
    Fingerprint,
    eliminate,
    filter_score,
    fingerprint_score,
    line_blocks,
    line_blocks_from_delta,
    merge_blocks,
    observed_shift,
    split_blocks,
)
from .ranking import (
    Candidate,
    RankedDiagnosis,
    detect,
    diagnosis_to_json,
    line_candidates,
    merge_candidates,
    no_change_candidate,
    precompute_observation_rows,
    rank,
    split_candidates,
)
from .harness import (
    ExperimentConfig,
    SweepResult,
    add_noise,
    emit_outputs,
    resolve_deployment,
    run_sweep,
    simulate_line_failure,
    simulate_merge,
    simulate_split,
)

__version__ = "0.1.0"
