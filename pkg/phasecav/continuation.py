"""The continuation module drives the optimizer over a decreasing schedule of
interface widths and fictitious conductivities, warm-starting every phase from
the result of the previous one. Phase results can be checkpointed to disk and
a run can be resumed from the last completed phase.
"""

import json
import logging
import pathlib
import typing
import pydantic

from pydantic import Field
from typing_extensions import Annotated

from phasecav.utils import NumericalError
from phasecav.mesh import Mesh
from phasecav.fem import NodalField
from phasecav.optimizer import FeasibleSet, IterationRecord, run_phase
from phasecav.fileio import write_mesh, read_mesh, write_field, read_field
from phasecav.data_models.parameters import (
    Schedule,
    PhaseFieldParams,
    FictitiousParams,
    NewtonParams,
    StepController,
    Scheme,
)

logger = logging.getLogger(__name__)

CHECKPOINT_MESH = 'mesh.txt'
"""File name of the mesh in a phase checkpoint directory.
"""

CHECKPOINT_FIELD = 'v.csv'
"""File name of the phase field in a phase checkpoint directory.
"""

class PhaseSummary(pydantic.BaseModel):
    '''Final state of one continuation phase, evaluated at its own
    (epsilon, delta).
    '''
    phase: Annotated[int, Field(ge=0)] = pydantic.Field(..., description='Phase index')
    epsilon: float = pydantic.Field(..., description='Interface width')
    delta: float = pydantic.Field(..., description='Fictitious conductivity')
    alpha: float = pydantic.Field(..., description='Regularization weight')
    J: float = pydantic.Field(..., description='Final functional value')
    misfit: float = pydantic.Field(..., description='Final misfit')
    reg: float = pydantic.Field(..., description='Final Ginzburg-Landau energy')
    iterations: int = pydantic.Field(..., description='Accepted iterations')
    converged: bool = pydantic.Field(..., description='Stopping tolerance reached')
    stationarity: float = pydantic.Field(..., description='Projected gradient residual')
    tau: float = pydantic.Field(..., description='Step length at the end of the phase')
    nverts: int = pydantic.Field(..., description='Final mesh vertex count')

class ContinuationResult(typing.NamedTuple):
    v: NodalField
    history: typing.List[IterationRecord]
    phases: typing.List[PhaseSummary]

def phase_directory(checkpoint_dir:typing.Union[str, pathlib.Path], n:int) -> pathlib.Path:
    return pathlib.Path(checkpoint_dir) / f'phase_{n}'

def write_checkpoint(checkpoint_dir, n:int, v:NodalField, summary:PhaseSummary,
                     config_hash:typing.Optional[str]=None) -> pathlib.Path:
    '''Write mesh, phase field and summary of phase ``n``.
    '''
    path = phase_directory(checkpoint_dir, n)
    path.mkdir(parents=True, exist_ok=True)

    write_mesh(v.mesh, path / CHECKPOINT_MESH, config_hash=config_hash)
    write_field(v, path / CHECKPOINT_FIELD, config_hash=config_hash)
    with open(path / 'summary.json', 'w') as fp:
        json.dump(summary.model_dump(mode='json'), fp, indent=2, sort_keys=True)

    logger.info(f'Wrote checkpoint of phase {n} to {path}')
    return path

def load_checkpoint(checkpoint_dir) -> typing.Tuple[int, NodalField]:
    '''Return the index and phase field of the last completed phase found in
    ``checkpoint_dir``.

    Raises:
        FileNotFoundError: If the directory holds no complete checkpoint.
    '''

    root = pathlib.Path(checkpoint_dir)
    done = []
    for path in root.glob('phase_*'):
        suffix = path.name.split('_', 1)[1]
        if suffix.isdigit() and (path / CHECKPOINT_MESH).is_file() and (path / CHECKPOINT_FIELD).is_file():
            done.append(int(suffix))

    if not done:
        raise FileNotFoundError(f'No phase checkpoint found in {root}')

    n = max(done)
    path = phase_directory(root, n)
    mesh = read_mesh(path / CHECKPOINT_MESH)
    v = read_field(path / CHECKPOINT_FIELD, mesh)

    logger.info(f'Loaded checkpoint of phase {n} from {path} ({mesh.nverts} vertices)')
    return n, v

def initial_phase_field(mesh:Mesh, d0:float, value:float=0.0) -> NodalField:
    '''Constant initial guess with the boundary band pinned to 1.
    '''
    return FeasibleSet(mesh, d0).initial(value)

def run_continuation(schedule:Schedule, data, mesh:Mesh,
                     phase_field:PhaseFieldParams=PhaseFieldParams(),
                     fictitious:FictitiousParams=FictitiousParams(),
                     step:StepController=StepController(),
                     newton:NewtonParams=NewtonParams(),
                     scheme:Scheme=Scheme.SEMI_IMPLICIT,
                     snap_to_circle:bool=True,
                     v0:typing.Optional[NodalField]=None,
                     start_phase:int=0,
                     checkpoint_dir=None,
                     config_hash:typing.Optional[str]=None) -> ContinuationResult:
    '''Run the phases ``start_phase .. n_phases-1`` of the schedule.

    Phase ``n`` minimizes the functional at
    (epsilon0 / epsilon_factor**n, delta0 / delta_factor**n) starting from the
    result of phase ``n-1`` on its (possibly refined) mesh. The step length
    carries over between phases unless ``schedule.reset_tau`` is set.

    Args:
        schedule (Schedule): Continuation schedule
        data (MeasurementSet): Boundary measurements
        mesh (Mesh): Initial reconstruction mesh
        phase_field (PhaseFieldParams): Potential and normalization. Epsilon
            and alpha are replaced per phase.
        fictitious (FictitiousParams): Fictitious material. Delta is replaced
            per phase.
        step (StepController): Initial step controller
        newton (NewtonParams): Forward solver settings
        scheme (Scheme): Update scheme
        snap_to_circle (bool): Snap refined boundary vertices to the circle
        v0 (NodalField): Initial phase field. Defaults to 0 with the pinned
            band at 1.
        start_phase (int): First phase to run, used when resuming
        checkpoint_dir (str): Directory for per-phase checkpoints
        config_hash (str): Hash embedded in checkpoint files

    Returns:
        ContinuationResult: Final phase field, concatenated history and
            per-phase summaries

    Raises:
        NumericalError: If a phase fails. The exception carries the partial
            history of all phases as ``history`` and the completed phase
            summaries as ``phases``.
    '''

    if not 0 <= start_phase < schedule.n_phases:
        raise ValueError(f'start_phase={start_phase} out of range [0, {schedule.n_phases})')

    v = initial_phase_field(mesh, fictitious.d0_band) if v0 is None else v0
    ctrl = step.model_copy()
    history: typing.List[IterationRecord] = []
    phases: typing.List[PhaseSummary] = []

    for n in range(start_phase, schedule.n_phases):
        eps, delta, alpha = schedule.phase_parameters(n)
        params = phase_field.model_copy(update={'epsilon': eps, 'alpha': alpha})
        fict = fictitious.model_copy(update={'delta': delta})

        if schedule.reset_tau:
            ctrl = step.model_copy()

        offset = history[-1].iter + 1 if history else 0

        try:
            result = run_phase(v, data, params, fict, ctrl=ctrl, stop=schedule.stopping, newton=newton,
                               scheme=scheme, snap_to_circle=snap_to_circle, phase=n, iter_offset=offset)
        except NumericalError as error:
            error.history = history + list(getattr(error, 'history', []))
            error.phases = phases
            logger.error(f'Phase {n} failed: {error}')
            raise

        v = result.v
        ctrl = ctrl.model_copy(update={'tau': min(max(result.tau, ctrl.tau_min), ctrl.tau_max)})
        history.extend(result.history)

        summary = PhaseSummary(
            phase=n, epsilon=eps, delta=delta, alpha=alpha,
            J=result.evaluation.total, misfit=result.evaluation.misfit, reg=result.evaluation.regularizer,
            iterations=result.iterations, converged=result.converged, stationarity=result.stationarity,
            tau=result.tau, nverts=v.mesh.nverts,
        )
        phases.append(summary)

        if checkpoint_dir is not None:
            write_checkpoint(checkpoint_dir, n, v, summary, config_hash=config_hash)

    return ContinuationResult(v, history, phases)
