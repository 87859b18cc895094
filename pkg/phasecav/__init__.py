from .utils import (
    NumericalError,
    ResourceLimitError,
    FactorizationError,
    NewtonConvergenceError,
    StagnationError,
)

from .mesh import (
    BoundaryMarker,
    Mesh,
    generate_disk_mesh,
    generate_cavity_mesh,
    refine_marked,
    mark_by_gradient,
    boundary_trace_interpolate,
)

from .fem import (
    NodalField,
    SparseSystem,
    assemble_stiffness,
    assemble_mass,
    assemble_load,
    assemble_boundary_mass,
    solve_sparse,
    l2_norm,
)

from .forward import (
    ForwardSolution,
    solve_forward,
    solve_cavity_reference,
    conductive_energy,
)

from .adjoint import (
    solve_adjoint,
)

from .measurements import (
    GaussianSource,
    MeasurementSet,
    make_sources,
    make_rng,
    add_noise,
    synthesize_measurements,
    source_support_fraction,
)

from .objective import (
    ProblemContext,
    Evaluation,
    misfit,
    gl_energy,
    eval_J,
    solve_adjoints,
    explicit_gradient,
    implicit_gradient,
    full_gradient,
    gradient_check,
)

from .optimizer import (
    FeasibleSet,
    IterationRecord,
    PhaseResult,
    inner_solve,
    projected_gradient_step,
    stationarity,
    run_phase,
)

from .continuation import (
    PhaseSummary,
    ContinuationResult,
    run_continuation,
    load_checkpoint,
)

from .analysis import (
    ReconstructionMetrics,
    extract_contour,
    symmetric_difference,
    hausdorff_distance,
    interface_band,
    compute_metrics,
)

from .fileio import (
    write_mesh,
    read_mesh,
    write_field,
    read_field,
    write_vtk,
    write_contours,
    read_contours,
    write_history,
    read_history,
    write_measurements,
    read_measurements,
)
