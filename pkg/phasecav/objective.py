"""The objective module evaluates the relaxed functional

    J(v) = 1/N sum_i 1/2 int_Sigma (u_i(v) - m_i)^2 + alpha * G(v),
    G(v) = int gamma*eps*|grad v|^2 + (gamma/eps) W(v),

and its derivative with respect to the phase field. The derivative is split
into an explicit part (misfit and potential) and an implicit part
2*alpha*gamma*eps*A v that the semi-implicit optimizer treats on the unknown.
"""

import logging
import typing
import numpy as np

from phasecav.mesh import Mesh
from phasecav.fem import (
    NodalField,
    assemble_stiffness,
    assemble_mass,
    assemble_load,
    assemble_boundary_mass,
    assemble_quadrature_vector,
    integrate_quadrature,
    quadrature_values,
)
from phasecav.forward import solve_forward
from phasecav.adjoint import solve_adjoint, trace_vector
from phasecav.data_models.parameters import (
    PhaseFieldParams,
    FictitiousParams,
    NewtonParams,
    Potential,
    AdjointWeight,
)

logger = logging.getLogger(__name__)

##############
# Potentials #
##############

def potential(v:np.ndarray, kind:Potential) -> np.ndarray:
    '''Ginzburg-Landau potential W(v).
    '''
    if Potential(kind) == Potential.CONVEX:
        return v * (1.0 - v)
    return v**2 * (1.0 - v)**2

def potential_derivative(v:np.ndarray, kind:Potential) -> np.ndarray:
    '''Derivative W'(v).
    '''
    if Potential(kind) == Potential.CONVEX:
        return 1.0 - 2.0 * v
    return 2.0 * v * (1.0 - v) * (1.0 - 2.0 * v)

###########
# Context #
###########

class ProblemContext():
    '''Mesh-dependent data of the reconstruction problem: source loads, arc
    vertices, measured traces on the arc, and unit stiffness, mass and
    boundary mass matrices. Rebuilt whenever the mesh changes.

    Args:
        mesh (Mesh): Reconstruction mesh
        data (MeasurementSet): Boundary measurements
    '''

    def __init__(self, mesh:Mesh, data):
        self.mesh = mesh
        self.data = data
        self.arc = data.arc
        self.sources = data.source_functions()
        self.loads = [assemble_load(mesh, f) for f in self.sources]
        self.sigma = mesh.sigma_vertices(self.arc)
        self.measured = data.on_mesh(mesh)
        self.stiffness = assemble_stiffness(mesh, 1.0)
        self.mass = assemble_mass(mesh, 1.0)
        self.boundary_mass = assemble_boundary_mass(mesh, self.arc)

    @property
    def num_sources(self) -> int:
        return len(self.sources)

    def residuals(self, states) -> typing.List[np.ndarray]:
        '''Trace residuals u_i - m_i on the arc vertices.
        '''
        return [s.values[self.sigma] - m for s, m in zip(states, self.measured)]

def _context(v:NodalField, data, context:typing.Optional[ProblemContext]) -> ProblemContext:
    if context is not None and context.mesh is v.mesh and context.data is data:
        return context
    return ProblemContext(v.mesh, data)

#########
# Terms #
#########

def misfit(mesh:Mesh, traces, measured, arc=None, boundary_mass=None) -> float:
    '''Average boundary misfit 1/N sum_i 1/2 int_Sigma (u_i - m_i)^2.

    Args:
        mesh (Mesh): Mesh carrying the traces
        traces (list): Per-source values at the arc vertices
        measured (:obj:`np.ndarray`): Measured values at the arc vertices,
            shape (N, n_sigma), or a ``MeasurementSet``
        arc (ArcSpec): Accessible boundary arc
        boundary_mass: Optional precomputed boundary mass matrix of ``arc``

    Raises:
        ValueError: If the number of traces and measurements differ.
    '''

    if hasattr(measured, 'on_mesh'):
        arc = measured.arc
        measured = measured.on_mesh(mesh)

    traces = [np.asarray(getattr(t, 'values', t), dtype=float) for t in traces]
    measured = np.atleast_2d(np.asarray(measured, dtype=float))

    if len(traces) != measured.shape[0]:
        raise ValueError(f'{len(traces)} traces for {measured.shape[0]} measurements')
    if len(traces) == 0:
        raise ValueError('Misfit requires at least one measurement.')

    bmass = assemble_boundary_mass(mesh, arc) if boundary_mass is None else boundary_mass

    total = 0.0
    for t, m in zip(traces, measured):
        r = trace_vector(mesh, t - m if t.shape == m.shape else t[mesh.sigma_vertices(arc)] - m, arc)
        total += 0.5 * float(r @ (bmass @ r))

    return total / len(traces)

def gl_energy(v:NodalField, params:PhaseFieldParams, stiffness=None) -> float:
    '''Ginzburg-Landau energy int gamma*eps*|grad v|^2 + (gamma/eps) W(v).

    Gradients are exact per element, the potential is integrated with the
    midpoint rule.
    '''
    mesh = v.mesh
    stiffness = assemble_stiffness(mesh, 1.0) if stiffness is None else stiffness

    dirichlet = float(v.values @ (stiffness @ v.values))
    bulk = integrate_quadrature(mesh, potential(quadrature_values(mesh, v), params.potential))

    return params.gamma * params.epsilon * dirichlet + params.gamma / params.epsilon * bulk

class Evaluation(typing.NamedTuple):
    total: float
    misfit: float
    regularizer: float
    states: list

def eval_J(v:NodalField, data, params:PhaseFieldParams, fict:FictitiousParams,
           newton:NewtonParams=NewtonParams(), warm_states:typing.Optional[list]=None,
           context:typing.Optional[ProblemContext]=None) -> Evaluation:
    '''Evaluate the relaxed functional.

    Args:
        v (NodalField): Feasible phase field
        data (MeasurementSet): Boundary measurements
        params (PhaseFieldParams): Phase-field parameters
        fict (FictitiousParams): Fictitious material parameters
        newton (NewtonParams): Forward solver settings
        warm_states (list): Forward states used as Newton initial guesses
        context (ProblemContext): Cached mesh-dependent data

    Returns:
        Evaluation: ``(total, misfit, regularizer, states)`` with
            ``total = misfit + alpha*regularizer``

    Raises:
        NewtonConvergenceError: If a forward solve does not converge.
    '''

    ctx = _context(v, data, context)
    mesh = v.mesh

    states = []
    for i, (f, load) in enumerate(zip(ctx.sources, ctx.loads)):
        u0 = None if warm_states is None else warm_states[i]
        states.append(solve_forward(mesh, v, fict, f, newton, u0=u0, load=load))

    mis = 0.0
    for r in ctx.residuals(states):
        full = trace_vector(mesh, r, ctx.arc)
        mis += 0.5 * float(full @ (ctx.boundary_mass @ full))
    mis /= ctx.num_sources

    reg = gl_energy(v, params, stiffness=ctx.stiffness)

    return Evaluation(mis + params.alpha * reg, mis, reg, states)

#############
# Gradients #
#############

def solve_adjoints(v:NodalField, states:list, data, fict:FictitiousParams, newton:NewtonParams=NewtonParams(),
                   context:typing.Optional[ProblemContext]=None) -> typing.List[NodalField]:
    '''Adjoint states of every source for the trace residuals of ``states``.
    '''
    ctx = _context(v, data, context)
    return [solve_adjoint(v.mesh, v, fict, u, r, arc=ctx.arc, newton=newton, boundary_mass=ctx.boundary_mass)
            for u, r in zip(states, ctx.residuals(states))]

def explicit_gradient(v:NodalField, states:list, adjoints:list, params:PhaseFieldParams,
                      fict:FictitiousParams) -> NodalField:
    '''Explicit part of the derivative of J in weak form, g_j = J'(v)[phi_j]
    without the implicit term 2*alpha*gamma*eps*A v.

    The misfit part is -1/N sum_i [ (1-delta) int grad u_i . grad p_i phi_j
    + c int u_i^3 p_i phi_j ] with c = 1 for consistent adjoint weighting and
    c = 1 - delta otherwise. The potential part is
    alpha*gamma/eps int W'(v) phi_j.

    Raises:
        ValueError: If the numbers of states and adjoints differ.
    '''

    if len(states) != len(adjoints):
        raise ValueError(f'{len(states)} forward states for {len(adjoints)} adjoint states')

    mesh = v.mesh
    for s in list(states) + list(adjoints):
        if len(s) != mesh.nverts:
            raise ValueError(f'State length {len(s)} does not match vertex count {mesh.nverts}')

    cubic = 1.0 if AdjointWeight(fict.adjoint_weight) == AdjointWeight.CONSISTENT else 1.0 - fict.delta

    g = np.zeros(mesh.nverts)
    for u, p in zip(states, adjoints):
        gu = mesh.gradient(u.values)
        gp = mesh.gradient(p.values)
        # Coefficient a_K depends on each vertex value of K with weight 1/3
        elem = (1.0 - fict.delta) * mesh.areas / 3.0 * np.sum(gu * gp, axis=1)
        g -= np.bincount(mesh.triangles.ravel(), weights=np.repeat(elem, 3), minlength=mesh.nverts)

        uq = quadrature_values(mesh, u)
        pq = quadrature_values(mesh, p)
        g -= cubic * assemble_quadrature_vector(mesh, uq**3 * pq)

    if len(states):
        g /= len(states)

    wprime = potential_derivative(quadrature_values(mesh, v), params.potential)
    g += params.alpha * params.gamma / params.epsilon * assemble_quadrature_vector(mesh, wprime)

    return NodalField(mesh, g)

def implicit_gradient(v:NodalField, params:PhaseFieldParams, stiffness=None) -> NodalField:
    '''Implicit part of the derivative of J in weak form, 2*alpha*gamma*eps*A v.
    '''
    stiffness = assemble_stiffness(v.mesh, 1.0) if stiffness is None else stiffness
    return NodalField(v.mesh, 2.0 * params.alpha * params.gamma * params.epsilon * (stiffness @ v.values))

def full_gradient(v:NodalField, states:list, adjoints:list, params:PhaseFieldParams,
                  fict:FictitiousParams, stiffness=None) -> NodalField:
    '''Complete derivative of J in weak form.
    '''
    g = explicit_gradient(v, states, adjoints, params, fict).values
    return NodalField(v.mesh, g + implicit_gradient(v, params, stiffness).values)

def gradient_check(v:NodalField, direction, data, params:PhaseFieldParams, fict:FictitiousParams,
                   newton:NewtonParams=NewtonParams(), steps:typing.Sequence[float]=(1.0e-4, 1.0e-5, 1.0e-6, 1.0e-7)) -> dict:
    '''Compare the analytic directional derivative of J with central finite
    differences.

    Args:
        v (NodalField): Phase field with ``v +- step*direction`` feasible
        direction (:obj:`np.ndarray`): Perturbation direction
        data (MeasurementSet): Boundary measurements
        params (PhaseFieldParams): Phase-field parameters
        fict (FictitiousParams): Fictitious material parameters
        newton (NewtonParams): Forward solver settings
        steps (list): Finite difference steps

    Returns:
        dict: ``analytic`` derivative, ``finite_differences`` per step,
            ``errors`` per step and the smallest relative ``error``
    '''

    ctx = ProblemContext(v.mesh, data)
    direction = np.asarray(getattr(direction, 'values', direction), dtype=float)

    base = eval_J(v, data, params, fict, newton, context=ctx)
    adjoints = solve_adjoints(v, base.states, data, fict, newton, context=ctx)
    analytic = float(full_gradient(v, base.states, adjoints, params, fict, ctx.stiffness).values @ direction)

    fds = []
    errors = []
    for h in steps:
        plus = eval_J(v.with_values(v.values + h * direction), data, params, fict, newton, warm_states=base.states, context=ctx)
        minus = eval_J(v.with_values(v.values - h * direction), data, params, fict, newton, warm_states=base.states, context=ctx)
        fd = (plus.total - minus.total) / (2.0 * h)
        fds.append(fd)
        errors.append(abs(fd - analytic) / max(abs(fd), np.finfo(float).tiny))

    error = float(min(errors))
    logger.info(f'Gradient check ({fict.adjoint_weight}): analytic {analytic:.6e}, best relative error {error:.3e}')

    return {'analytic': analytic, 'finite_differences': fds, 'errors': errors, 'error': error}
