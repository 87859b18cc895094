"""The adjoint module solves the linear adjoint problem whose solution enters the
derivative of the boundary misfit with respect to the phase field.
"""

import logging
import typing
import numpy as np

from phasecav.mesh import Mesh
from phasecav.fem import (
    NodalField,
    SparseSystem,
    assemble_stiffness,
    assemble_mass,
    assemble_boundary_mass,
    quadrature_values,
    element_means,
)
from phasecav.data_models.parameters import FictitiousParams, AdjointWeight, NewtonParams

logger = logging.getLogger(__name__)

def adjoint_weight(mesh:Mesh, v:NodalField, params:FictitiousParams, u:NodalField) -> np.ndarray:
    '''Zero-order weight w of the adjoint operator at the midpoint quadrature
    points, such that the operator is A[a_delta(v)] + 3 M[w].

    With ``consistent`` weighting w = v u^2 and the operator equals the
    Newton Jacobian of the forward problem. With ``conductivity`` weighting
    w = a_delta(v) u^2.
    '''
    uq = quadrature_values(mesh, u)

    if AdjointWeight(params.adjoint_weight) == AdjointWeight.CONSISTENT:
        return quadrature_values(mesh, v) * uq**2

    return params.conductivity(element_means(mesh, v))[:, None] * uq**2

def adjoint_operator(mesh:Mesh, v:NodalField, params:FictitiousParams, u:NodalField):
    coeff = params.conductivity(element_means(mesh, v))
    return assemble_stiffness(mesh, coeff) + assemble_mass(mesh, 3.0 * adjoint_weight(mesh, v, params, u))

def trace_vector(mesh:Mesh, trace_residual, arc=None) -> np.ndarray:
    '''Extend values given on the arc vertices to a full nodal vector, zero
    elsewhere. Full-length input is returned unchanged.
    '''
    values = np.asarray(getattr(trace_residual, 'values', trace_residual), dtype=float)
    if values.shape[0] == mesh.nverts:
        return values

    sigma = mesh.sigma_vertices(arc)
    if values.shape[0] != sigma.shape[0]:
        raise ValueError(f'Trace residual has {values.shape[0]} values, arc has {sigma.shape[0]} vertices')

    full = np.zeros(mesh.nverts)
    full[sigma] = values
    return full

def solve_adjoint(mesh:Mesh, v:NodalField, params:FictitiousParams, u:NodalField, trace_residual,
                  arc=None, newton:NewtonParams=NewtonParams(), boundary_mass=None) -> NodalField:
    '''Solve the adjoint problem
    int a_delta(v) grad p . grad psi + int 3 w p psi = int_Sigma r psi  for all psi,
    with the weight w selected by ``params.adjoint_weight``.

    Args:
        mesh (Mesh): Mesh
        v (NodalField): Phase field
        params (FictitiousParams): Fictitious material parameters
        u (NodalField): Converged forward state
        trace_residual (:obj:`np.ndarray`): Values of u - u_meas at the arc
            vertices ordered as ``mesh.sigma_vertices(arc)``, or a full
            nodal vector
        arc (ArcSpec): Accessible boundary arc
        newton (NewtonParams): Linear solver settings
        boundary_mass: Optional precomputed boundary mass matrix of ``arc``

    Returns:
        NodalField: Adjoint state p
    '''

    residual = trace_vector(mesh, trace_residual, arc)
    bmass = assemble_boundary_mass(mesh, arc) if boundary_mass is None else boundary_mass

    system = SparseSystem(adjoint_operator(mesh, v, params, u), bmass @ residual, mesh=mesh)
    p = system.solve(method=newton.linear_solver, rtol=newton.linear_rtol)

    return NodalField(mesh, p)
