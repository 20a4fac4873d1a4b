"""Reduced-order fluid simulation with a learned linear step operator.

Train on snapshot data from any solver, then roll out, jump to
arbitrary times, reverse time, edit the spectrum, inject forces, and
upscale guided low-res flows, all in a small complex mode basis.
"""

from .dmd import (
    ControlOperator,
    LMConfig,
    ReducedModel,
    SnapshotMatrix,
    check_constraints,
    conjugate_pairs,
    exact_dmd,
    fit_control,
    optdmd,
    vandermonde,
)
from .editing import EditSpec, apply_edit, band_energy, cluster_modes, omega
from .errors import (
    BadMagicError,
    BadVersionError,
    ChecksumError,
    ConvergenceError,
    EigenvalueFloorError,
    FlowDmdError,
    FormatError,
    RolloutOverflowError,
    SizeMismatchError,
)
from .grid import (
    GridSpec,
    MacField,
    ScalarField,
    build_divergence,
    build_downsample,
    coarse_grid,
    divergence,
    flatten,
    unflatten,
)
from .linalg import SvdResult, eig_small, lstsq, pinv, randomized_svd, truncated_svd
from .model_io import (
    load_dataset,
    load_edit,
    load_model,
    load_scene,
    save_dataset,
    save_edit,
    save_model,
    save_scene,
)
from .runtime import (
    ReducedState,
    decode,
    encode,
    eval_continuous,
    inverse_step,
    kinetic_energy,
    rollout,
    step,
    step_forced,
    step_k,
)
from .solver import (
    SceneConfig,
    SimParams,
    SimState,
    advect_maccormack,
    add_body_forces,
    generate_dataset,
    initial_state,
    project_pressure,
    step as solver_step,
    vorticity_confinement,
)
from .upres import (
    Projector,
    UpresConfig,
    blend_fields,
    build_projector,
    constrained_project,
    guided_rollout,
    upres_step,
)

__version__ = "0.1.0"
