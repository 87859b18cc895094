"""The forward module solves the semilinear Neumann problems of the package:
the fictitious-material problem -div(a_delta(v) grad u) + v u^3 = f on the full
disk and the cavity problem -lap u + u^3 = f on the perforated domain.

Both are solved by a damped Newton iteration on the P1 discretization with
natural (homogeneous Neumann) boundary conditions.
"""

import logging
import typing
import numpy as np

from phasecav.utils import NewtonConvergenceError
from phasecav.mesh import Mesh
from phasecav.fem import (
    NodalField,
    assemble_stiffness,
    assemble_mass,
    assemble_load,
    assemble_quadrature_vector,
    quadrature_values,
    element_means,
    solve_sparse,
)
from phasecav.data_models.parameters import NewtonParams, FictitiousParams

logger = logging.getLogger(__name__)

class ForwardSolution(NodalField):
    '''Forward state together with its Newton convergence report.

    Attributes:
        iterations (int): Number of Newton iterations performed
        residual_history (list): Residual norm of every Newton iterate
    '''

    def __init__(self, mesh:Mesh, values, iterations:int=0, residual_history:typing.Sequence[float]=()):
        super().__init__(mesh, values)
        self.iterations = int(iterations)
        self.residual_history = list(residual_history)
        self.converged = True

def _newton(mesh:Mesh, stiffness, vq:np.ndarray, load:np.ndarray, newton:NewtonParams,
            u0:typing.Optional[np.ndarray]=None) -> ForwardSolution:
    '''Damped Newton iteration for R(u) = A u + N(u) - F with N(u)_i = int w u^3 phi_i,
    where ``vq`` is the weight w at the midpoint quadrature points.
    '''

    def residual(u):
        uq = quadrature_values(mesh, u)
        return stiffness @ u + assemble_quadrature_vector(mesh, vq * uq**3) - load

    tol = newton.atol + newton.rtol * np.linalg.norm(load)

    if u0 is None:
        mean_f = np.sum(load) / mesh.area
        u = np.full(mesh.nverts, max(mean_f, 0.0)**(1.0/3.0))
    else:
        u = np.array(u0, dtype=float)

    r = residual(u)
    history = [float(np.linalg.norm(r))]

    for it in range(newton.max_iterations):
        if history[-1] <= tol:
            return ForwardSolution(mesh, u, iterations=it, residual_history=history)

        uq = quadrature_values(mesh, u)
        jacobian = stiffness + assemble_mass(mesh, 3.0 * vq * uq**2)
        du = solve_sparse(jacobian, -r, method=newton.linear_solver, rtol=newton.linear_rtol)

        # Backtracking on the residual norm
        step = newton.damping
        for _ in range(newton.max_backtracks + 1):
            u_try = u + step * du
            r_try = residual(u_try)
            norm_try = float(np.linalg.norm(r_try))
            if norm_try < history[-1] or norm_try <= tol:
                break
            step *= 0.5
        else:
            history.append(norm_try)
            raise NewtonConvergenceError(f'Newton damping exhausted at iteration {it} with residual {history[-2]:.3e}', history)

        if step < newton.damping:
            logger.debug(f'Newton iteration {it} damped to step {step:.3e}')

        u, r = u_try, r_try
        history.append(norm_try)
        logger.debug(f'Newton iteration {it}: residual {norm_try:.3e}')

    if history[-1] <= tol:
        return ForwardSolution(mesh, u, iterations=newton.max_iterations, residual_history=history)

    raise NewtonConvergenceError(f'Newton did not converge in {newton.max_iterations} iterations, residual {history[-1]:.3e} > {tol:.3e}', history)

def _check_phase_field(v:NodalField):
    vals = v.values
    if vals.min() < -1.0e-12 or vals.max() > 1.0 + 1.0e-12:
        raise ValueError(f'Phase field values must lie in [0, 1], got range [{vals.min()}, {vals.max()}]')

def solve_forward(mesh:Mesh, v:NodalField, params:FictitiousParams, f,
                  newton:NewtonParams=NewtonParams(), u0=None, load:typing.Optional[np.ndarray]=None) -> ForwardSolution:
    '''Solve the fictitious-material problem
    -div(a_delta(v) grad u) + v u^3 = f with homogeneous Neumann conditions.

    The coefficient a_delta(v) = delta + (1-delta) v is evaluated per element
    at the mean of the vertex values of v. The cubic term and its Jacobian
    are integrated with the midpoint rule.

    Args:
        mesh (Mesh): Mesh
        v (NodalField): Phase field with values in [0, 1]
        params (FictitiousParams): Fictitious material parameters
        f: Source, a coordinate function ``f(points) -> values`` or constant
        newton (NewtonParams): Newton settings
        u0 (NodalField): Optional initial guess (warm start)
        load (:obj:`np.ndarray`): Optional precomputed load vector of ``f``

    Returns:
        ForwardSolution: Converged state u

    Raises:
        NewtonConvergenceError: If Newton does not converge.
    '''

    _check_phase_field(v)

    coeff = params.conductivity(element_means(mesh, v))
    stiffness = assemble_stiffness(mesh, coeff)
    vq = quadrature_values(mesh, v)
    load = assemble_load(mesh, f) if load is None else load

    guess = None if u0 is None else np.asarray(getattr(u0, 'values', u0), dtype=float)
    if guess is not None and guess.shape[0] != mesh.nverts:
        guess = None

    return _newton(mesh, stiffness, vq, load, newton, u0=guess)

def solve_cavity_reference(cavity_mesh:Mesh, f, newton:NewtonParams=NewtonParams()) -> ForwardSolution:
    '''Solve the cavity problem -lap u + u^3 = f on the perforated domain with
    homogeneous Neumann conditions on the outer and cavity boundaries.

    Args:
        cavity_mesh (Mesh): Mesh of the domain without the cavity
        f: Source, a coordinate function or constant
        newton (NewtonParams): Newton settings

    Returns:
        ForwardSolution: Converged state u
    '''

    stiffness = assemble_stiffness(cavity_mesh, 1.0)
    vq = np.ones((cavity_mesh.ntris, 3))
    load = assemble_load(cavity_mesh, f)

    return _newton(cavity_mesh, stiffness, vq, load, newton)

def conductive_energy(mesh:Mesh, v:NodalField, params:FictitiousParams, u:NodalField) -> float:
    '''Energy int a_delta(v) |grad u|^2 of a forward state.
    '''
    coeff = params.conductivity(element_means(mesh, v))
    grad = mesh.gradient(u.values)
    return float(np.sum(coeff * mesh.areas * np.sum(grad**2, axis=1)))
