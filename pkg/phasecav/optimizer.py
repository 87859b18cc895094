"""The optimizer module runs the minimizing-movement iteration for the relaxed
functional: constrained quadratic updates of the phase field, acceptance of
decreasing steps with adaptive step length, and periodic mesh adaptation
along the diffuse interface.
"""

import logging
import typing
import pydantic
import numpy as np
import scipy.sparse as sparse

from pydantic import Field
from typing_extensions import Annotated

from phasecav.utils import StagnationError
from phasecav.mesh import Mesh, mark_by_gradient, refine_marked
from phasecav.fem import NodalField, assemble_mass, assemble_stiffness, solve_sparse, l2_norm
from phasecav.objective import (
    ProblemContext,
    Evaluation,
    eval_J,
    solve_adjoints,
    explicit_gradient,
    implicit_gradient,
    full_gradient,
)
from phasecav.data_models.parameters import (
    PhaseFieldParams,
    FictitiousParams,
    NewtonParams,
    StepController,
    StoppingSpec,
    Scheme,
)

logger = logging.getLogger(__name__)

################
# Feasible Set #
################

class FeasibleSet():
    '''Box 0 <= v <= 1 with the vertices of the boundary band |x| >= R - d0
    pinned to 1.

    Args:
        mesh (Mesh): Mesh
        d0 (float): Band width
    '''

    def __init__(self, mesh:Mesh, d0:float):
        if d0 < 0.0:
            raise ValueError(f'Band width must be nonnegative, got {d0}')

        self.mesh = mesh
        self.d0 = float(d0)
        self.lower = 0.0
        self.upper = 1.0

        radii = np.linalg.norm(mesh.vertices, axis=1)
        self.pinned = radii >= mesh.radius - self.d0 - 1.0e-12 * mesh.radius
        self.pinned.setflags(write=False)

    def project(self, values) -> np.ndarray:
        '''Clamp to [0, 1] and reset pinned vertices to 1.
        '''
        values = np.clip(np.asarray(getattr(values, 'values', values), dtype=float), self.lower, self.upper)
        values[self.pinned] = self.upper
        return values

    def contains(self, values) -> bool:
        values = np.asarray(getattr(values, 'values', values), dtype=float)
        return bool(np.all(values >= self.lower) and np.all(values <= self.upper)
                    and np.all(values[self.pinned] == self.upper))

    def initial(self, value:float=0.0) -> NodalField:
        '''Constant interior value with the pinned band at 1.
        '''
        return NodalField(self.mesh, self.project(np.full(self.mesh.nverts, float(value))))

#################
# Inner Solvers #
#################

def projected_gradient_step(v_k:NodalField, gradient:NodalField, tau:float, feasible:FeasibleSet, mass=None) -> NodalField:
    '''Explicit step v = P(v_k - tau * M^-1 g) with the L2 Riesz representer
    of the weak gradient g and the projection P onto the feasible set.
    '''
    mesh = v_k.mesh
    mass = _mass(mesh, mass)
    g = np.asarray(getattr(gradient, 'values', gradient), dtype=float)

    representer = solve_sparse(mass, g)

    return NodalField(mesh, feasible.project(v_k.values - tau * representer))

def inner_solve(v_k:NodalField, g_explicit:NodalField, tau:float, params:PhaseFieldParams, feasible:FeasibleSet,
                mass=None, stiffness=None, max_sweeps:int=50) -> NodalField:
    '''Semi-implicit update by a primal-dual active set method.

    Minimizes 1/(2 tau) |v - v_k|_M^2 + g.(v - v_k) + alpha*gamma*eps v.A v over
    the feasible set, i.e. solves K v = b with K = M/tau + 2 alpha gamma eps A
    and b = M v_k / tau - g subject to the box constraints. Active sets are
    predicted from the multiplier mu = b - K v as
    U = {mu + c (v - 1) > 0}, L = {mu + c v < 0} with c = diag(K). The
    iteration stops when the active sets do not change.

    If the active sets still change after ``max_sweeps`` sweeps a projected
    gradient step with the full gradient is returned instead.

    Args:
        v_k (NodalField): Current feasible iterate
        g_explicit (NodalField): Explicit gradient in weak form
        tau (float): Step length
        params (PhaseFieldParams): Phase-field parameters
        feasible (FeasibleSet): Feasible set on the mesh of ``v_k``
        mass: Optional unit mass matrix
        stiffness: Optional unit stiffness matrix
        max_sweeps (int): Sweep cap

    Returns:
        NodalField: Feasible update
    '''

    mesh = v_k.mesh
    mass = _mass(mesh, mass)
    stiffness = _stiffness(mesh, stiffness)

    g = np.asarray(getattr(g_explicit, 'values', g_explicit), dtype=float)
    K = sparse.csr_matrix(mass / tau + 2.0 * params.alpha * params.gamma * params.epsilon * stiffness)
    b = mass @ v_k.values / tau - g
    c = K.diagonal()

    v = v_k.values.copy()
    mu = np.zeros(mesh.nverts)
    pinned = feasible.pinned
    upper = np.zeros(mesh.nverts, dtype=bool)
    lower = np.zeros(mesh.nverts, dtype=bool)

    for sweep in range(max_sweeps):
        new_upper = ((mu + c * (v - feasible.upper)) > 0.0) & ~pinned
        new_lower = ((mu + c * (v - feasible.lower)) < 0.0) & ~pinned & ~new_upper

        if sweep > 0 and np.array_equal(new_upper, upper) and np.array_equal(new_lower, lower):
            logger.debug(f'Active set converged after {sweep} sweeps: {upper.sum()} upper, {lower.sum()} lower')
            return NodalField(mesh, v)

        upper, lower = new_upper, new_lower
        fixed = upper | lower | pinned
        free = ~fixed

        v = np.zeros(mesh.nverts)
        v[upper | pinned] = feasible.upper
        v[lower] = feasible.lower

        if np.any(free):
            rhs = b[free] - K[free][:, fixed] @ v[fixed]
            v[free] = solve_sparse(K[free][:, free], rhs)

        mu = b - K @ v
        mu[free] = 0.0

    logger.warning(f'Active set iteration did not settle in {max_sweeps} sweeps, using projected gradient step')

    full = g + 2.0 * params.alpha * params.gamma * params.epsilon * (stiffness @ v_k.values)
    return projected_gradient_step(v_k, full, tau, feasible, mass)

def _mass(mesh, mass):
    return assemble_mass(mesh, 1.0) if mass is None else mass

def _stiffness(mesh, stiffness):
    return assemble_stiffness(mesh, 1.0) if stiffness is None else stiffness

###########
# History #
###########

class IterationRecord(pydantic.BaseModel):
    '''One evaluated (tentative or accepted) optimizer iterate.
    '''
    iter: Annotated[int, Field(ge=0)] = pydantic.Field(..., description='Iteration index')
    J: float = pydantic.Field(..., description='Functional value')
    misfit: float = pydantic.Field(..., description='Misfit term')
    reg: float = pydantic.Field(..., description='Ginzburg-Landau energy')
    tau: float = pydantic.Field(..., description='Step length used')
    accepted: bool = pydantic.Field(..., description='Whether the iterate was accepted')
    nverts: Annotated[int, Field(ge=0)] = pydantic.Field(..., description='Mesh vertex count')
    phase: Annotated[int, Field(ge=0)] = pydantic.Field(0, description='Continuation phase')

def _record(it:int, ev:Evaluation, tau:float, accepted:bool, nverts:int, phase:int) -> IterationRecord:
    return IterationRecord(iter=it, J=ev.total, misfit=ev.misfit, reg=ev.regularizer, tau=tau,
                           accepted=accepted, nverts=nverts, phase=phase)

class PhaseResult(typing.NamedTuple):
    v: NodalField
    history: typing.List[IterationRecord]
    evaluation: Evaluation
    tau: float
    iterations: int
    converged: bool
    stationarity: float

#############
# Algorithm #
#############

def stationarity(v:NodalField, gradient:NodalField, feasible:FeasibleSet, mass=None) -> float:
    '''Projected gradient residual |v - P(v - M^-1 g)|_L2, zero at points
    satisfying the first-order optimality condition over the feasible set.
    '''
    mass = _mass(v.mesh, mass)
    step = projected_gradient_step(v, gradient, 1.0, feasible, mass)
    return l2_norm(v.mesh, v.values - step.values, mass)

def run_phase(v0:NodalField, data, params:PhaseFieldParams, fict:FictitiousParams,
              ctrl:StepController=StepController(), stop:StoppingSpec=StoppingSpec(),
              newton:NewtonParams=NewtonParams(), scheme:Scheme=Scheme.SEMI_IMPLICIT,
              snap_to_circle:bool=True, phase:int=0, iter_offset:int=0) -> PhaseResult:
    '''Minimize the relaxed functional for fixed (epsilon, delta).

    Each iteration computes a tentative update with step length tau. If the
    functional increases the update is rejected and tau shrinks, otherwise it
    is accepted and tau grows. Every ``stop.n_adapt`` accepted steps the mesh
    is refined where the phase field gradient is steepest. The phase ends
    when the relative L2 increment falls below ``stop.rtol`` or after
    ``stop.max_iterations`` accepted steps.

    The functional is re-evaluated on a refined mesh without writing a
    record. A tentative step is accepted only if its value is below both the
    re-evaluated functional and the last accepted value, so accepted values
    in the history never increase. When refinement raised the functional and
    no step gets back below the last accepted value the phase ends early
    without convergence.

    Args:
        v0 (NodalField): Feasible initial phase field
        data (MeasurementSet): Boundary measurements
        params (PhaseFieldParams): Phase-field parameters
        fict (FictitiousParams): Fictitious material parameters
        ctrl (StepController): Step controller, not modified
        stop (StoppingSpec): Stopping and adaptation settings
        newton (NewtonParams): Forward solver settings
        scheme (Scheme): Update scheme
        snap_to_circle (bool): Project refined boundary vertices on the circle
        phase (int): Phase index stored in the records
        iter_offset (int): First iteration index of the records

    Returns:
        PhaseResult: Final iterate, history and diagnostics

    Raises:
        ValueError: If ``v0`` is not feasible.
        StagnationError: If no decreasing step exists above ``tau_min``.
    '''

    ctrl = ctrl.model_copy()
    scheme = Scheme(scheme)
    mesh = v0.mesh
    feasible = FeasibleSet(mesh, fict.d0_band)

    if not feasible.contains(v0):
        raise ValueError('Initial phase field is not feasible: values must lie in [0, 1] and equal 1 on the boundary band.')

    ctx = ProblemContext(mesh, data)
    v = v0
    ev = eval_J(v, data, params, fict, newton, context=ctx)
    it = iter_offset
    history = [_record(it, ev, ctrl.tau, True, mesh.nverts, phase)]

    logger.info(f'Phase {phase}: eps={params.epsilon:.4g}, delta={fict.delta:.3g}, alpha={params.alpha:.3g}, '
                f'J0={ev.total:.6e}, nverts={mesh.nverts}')

    adjoints = solve_adjoints(v, ev.states, data, fict, newton, context=ctx)
    g = explicit_gradient(v, ev.states, adjoints, params, fict)

    accepted = 0
    converged = False
    j_accepted = ev.total
    # Set when a rejected step decreased J on the current mesh but not below
    # the value accepted before the last refinement
    blocked = False

    while accepted < stop.max_iterations:
        tau = ctrl.tau
        if scheme == Scheme.SEMI_IMPLICIT:
            v_try = inner_solve(v, g, tau, params, feasible, ctx.mass, ctx.stiffness, stop.pdas_max_sweeps)
        else:
            full = g.values + implicit_gradient(v, params, ctx.stiffness).values
            v_try = projected_gradient_step(v, full, tau, feasible, ctx.mass)

        ev_try = eval_J(v_try, data, params, fict, newton, warm_states=ev.states, context=ctx)
        it += 1

        reference = min(ev.total, j_accepted)
        if ev_try.total > reference:
            history.append(_record(it, ev_try, tau, False, mesh.nverts, phase))
            logger.debug(f'Iteration {it}: rejected J={ev_try.total:.6e} > {reference:.6e} at tau={tau:.3e}')
            blocked = blocked or ev_try.total <= ev.total

            if not ctrl.adaptive or ctrl.rejected() < ctrl.tau_min:
                if blocked:
                    logger.warning(f'No step returns below J={j_accepted:.6e} accepted before refinement, '
                                   f'ending phase {phase} after {accepted} accepted steps')
                    break
                if not ctrl.adaptive:
                    raise StagnationError(f'Fixed step tau={tau:.3e} does not decrease the functional', history, v)
                raise StagnationError(f'Step length fell below tau_min={ctrl.tau_min:.1e} without decrease', history, v)
            continue

        norm_v = l2_norm(mesh, v.values, ctx.mass)
        increment = l2_norm(mesh, v_try.values - v.values, ctx.mass)
        dist = increment / norm_v if norm_v > 0.0 else increment

        v, ev = v_try, ev_try
        j_accepted = ev.total
        blocked = False
        accepted += 1
        history.append(_record(it, ev, tau, True, mesh.nverts, phase))
        ctrl.accepted()

        logger.debug(f'Iteration {it}: accepted J={ev.total:.6e} misfit={ev.misfit:.4e} reg={ev.regularizer:.4e} '
                     f'tau={tau:.3e} increment={dist:.3e}')

        if dist < stop.rtol:
            converged = True
            break

        if stop.n_adapt and accepted % stop.n_adapt == 0 and accepted < stop.max_iterations:
            marked = mark_by_gradient(mesh, v, stop.mark_fraction, stop.h_min)
            new_mesh, transferred = refine_marked(mesh, marked, [v] + list(ev.states), h_min=stop.h_min,
                                                  snap_to_circle=snap_to_circle, max_vertices=stop.max_vertices)
            if new_mesh is not mesh:
                logger.info(f'Adapted mesh after {accepted} steps: {mesh.nverts} -> {new_mesh.nverts} vertices')
                mesh = new_mesh
                feasible = FeasibleSet(mesh, fict.d0_band)
                ctx = ProblemContext(mesh, data)
                v = NodalField(mesh, feasible.project(transferred[0]))
                ev = eval_J(v, data, params, fict, newton, warm_states=transferred[1:], context=ctx)
                logger.debug(f'Functional on the refined mesh: {j_accepted:.6e} -> {ev.total:.6e}')

        adjoints = solve_adjoints(v, ev.states, data, fict, newton, context=ctx)
        g = explicit_gradient(v, ev.states, adjoints, params, fict)

    adjoints = solve_adjoints(v, ev.states, data, fict, newton, context=ctx)
    gradient = full_gradient(v, ev.states, adjoints, params, fict, ctx.stiffness)
    residual = stationarity(v, gradient, feasible, ctx.mass)

    logger.info(f'Phase {phase} finished after {accepted} accepted steps ({"converged" if converged else "iteration cap"}): '
                f'J={ev.total:.6e}, stationarity={residual:.3e}')

    return PhaseResult(v, history, ev, ctrl.tau, accepted, converged, residual)
