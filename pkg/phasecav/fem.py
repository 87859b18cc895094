"""The fem module provides piecewise-linear finite element assembly on a
``Mesh`` and the sparse linear solves used by the forward, adjoint and
optimizer modules.

Element integrals of products of P1 functions use the three-point edge
midpoint rule, which is exact for quadratic polynomials. Mass matrices with a
per-element constant weight are therefore the exact consistent mass matrices.
"""

import logging
import typing
import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from phasecav.utils import FactorizationError
from phasecav.mesh import Mesh
from phasecav.data_models.parameters import LinearSolver

logger = logging.getLogger(__name__)

# Basis values at the edge midpoints. Row q is the midpoint of local edge
# (q, q+1), column k the basis function of local vertex k.
MIDPOINT_BASIS = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])

# Relative residual accepted from the direct solver
DIRECT_RTOL = 1.0e-10

###############
# Nodal Field #
###############

class NodalField():
    '''Scalar P1 field given by its values at the mesh vertices.

    Args:
        mesh (Mesh): Mesh carrying the field
        values (array_like): One finite value per vertex

    Raises:
        ValueError: If the length differs from the vertex count or a value is
            not finite.
    '''

    def __init__(self, mesh:Mesh, values):
        values = np.array(values, dtype=float).reshape(-1)

        if values.shape[0] != mesh.nverts:
            raise ValueError(f'NodalField has {values.shape[0]} values, mesh has {mesh.nverts} vertices')

        if not np.all(np.isfinite(values)):
            raise ValueError('NodalField values must be finite.')

        values.setflags(write=False)
        self._mesh = mesh
        self._values = values

    def __str__(self) -> str:
        return f'<NodalField: nverts={self._values.shape[0]}, min={self._values.min():.6g}, max={self._values.max():.6g}>'

    def __repr__(self) -> str:
        return self.__str__()

    def __len__(self) -> int:
        return self._values.shape[0]

    @property
    def mesh(self) -> Mesh:
        return self._mesh

    @property
    def values(self) -> np.ndarray:
        return self._values

    @classmethod
    def constant(cls, mesh:Mesh, value:float):
        return cls(mesh, np.full(mesh.nverts, float(value)))

    @classmethod
    def interpolate(cls, mesh:Mesh, func:typing.Callable):
        '''Nodal interpolant of a coordinate function ``func(points) -> values``.
        '''
        return cls(mesh, np.broadcast_to(func(mesh.vertices), (mesh.nverts,)))

    def with_values(self, values):
        '''New field on the same mesh.
        '''
        return NodalField(self._mesh, values)

################
# Sparse Utils #
################

class SparseSystem():
    '''Symmetric sparse operator with a right-hand side.

    Args:
        matrix (:obj:`scipy.sparse.spmatrix`): Square symmetric matrix
        rhs (:obj:`np.ndarray`): Right-hand side
        mesh (Mesh): Optional mesh whose vertex count must match
    '''

    def __init__(self, matrix, rhs, mesh:typing.Optional[Mesh]=None, sym_tol:float=1.0e-12):
        matrix = sparse.csr_matrix(matrix)
        rhs = np.asarray(rhs, dtype=float)

        n = matrix.shape[0]
        if matrix.shape[1] != n or rhs.shape != (n,):
            raise ValueError(f'System dimensions do not match: matrix {matrix.shape}, rhs {rhs.shape}')
        if mesh is not None and n != mesh.nverts:
            raise ValueError(f'System dimension {n} does not match mesh vertex count {mesh.nverts}')

        asym = abs(matrix - matrix.T).max() if matrix.nnz else 0.0
        scale = max(abs(matrix).max() if matrix.nnz else 0.0, 1.0)
        if asym > sym_tol * scale:
            raise ValueError(f'System matrix is not symmetric: max asymmetry {asym:.3e}')

        self.matrix = matrix
        self.rhs = rhs

    def solve(self, **kwargs) -> np.ndarray:
        return solve_sparse(self.matrix, self.rhs, **kwargs)

def _assemble_matrix(mesh:Mesh, local:np.ndarray):
    '''Sum local (m, 3, 3) element matrices into a CSR matrix.
    '''
    tri = mesh.triangles
    rows = np.broadcast_to(tri[:, :, None], local.shape)
    cols = np.broadcast_to(tri[:, None, :], local.shape)
    mat = sparse.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(mesh.nverts, mesh.nverts))
    return mat.tocsr()

def _assemble_vector(mesh:Mesh, local:np.ndarray) -> np.ndarray:
    '''Sum local (m, 3) element vectors.
    '''
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.nverts)

def _element_weights(mesh:Mesh, weight, name:str) -> np.ndarray:
    '''Broadcast a scalar, per-element or per-quadrature-point weight to the
    quadrature points, shape (m, 3).
    '''
    w = np.asarray(weight, dtype=float)
    if w.ndim == 0:
        w = np.full((mesh.ntris, 3), float(w))
    elif w.shape == (mesh.ntris,):
        w = np.repeat(w[:, None], 3, axis=1)
    elif w.shape != (mesh.ntris, 3):
        raise ValueError(f'{name} must be scalar, shape ({mesh.ntris},) or ({mesh.ntris}, 3), got {w.shape}')

    if not np.all(np.isfinite(w)):
        raise ValueError(f'{name} must be finite.')

    return w

##############
# Quadrature #
##############

def quadrature_values(mesh:Mesh, values) -> np.ndarray:
    '''Values of a P1 field at the three edge midpoints of every triangle,
    shape (m, 3).
    '''
    values = np.asarray(getattr(values, 'values', values), dtype=float)
    return values[mesh.triangles] @ MIDPOINT_BASIS.T

def element_means(mesh:Mesh, values) -> np.ndarray:
    '''Mean of the three vertex values of every triangle.
    '''
    values = np.asarray(getattr(values, 'values', values), dtype=float)
    return values[mesh.triangles].mean(axis=1)

def integrate_quadrature(mesh:Mesh, qvalues:np.ndarray) -> float:
    '''Integrate a function given at the midpoint quadrature points.
    '''
    return float(np.sum(mesh.areas[:, None] / 3.0 * qvalues))

def assemble_quadrature_vector(mesh:Mesh, qvalues:np.ndarray) -> np.ndarray:
    '''Vector with entries int g*phi_i for g given at the midpoint quadrature
    points, shape (m, 3).
    '''
    local = (mesh.areas[:, None] / 3.0 * qvalues) @ MIDPOINT_BASIS
    return _assemble_vector(mesh, local)

############
# Assembly #
############

def assemble_stiffness(mesh:Mesh, coeff=1.0):
    '''Assemble the stiffness matrix sum_K coeff_K int_K grad(phi_i).grad(phi_j).

    Args:
        mesh (Mesh): Mesh
        coeff (float or :obj:`np.ndarray`): Positive per-element coefficient

    Returns:
        scipy.sparse.csr_matrix: Symmetric positive semidefinite matrix

    Raises:
        ValueError: If a coefficient is not positive.
    '''

    c = np.asarray(coeff, dtype=float)
    c = np.full(mesh.ntris, float(c)) if c.ndim == 0 else c

    if c.shape != (mesh.ntris,):
        raise ValueError(f'Stiffness coefficient must be scalar or shape ({mesh.ntris},), got {c.shape}')
    if not np.all(c > 0.0):
        raise ValueError(f'Stiffness coefficient must be positive, minimum is {c.min()}')

    g = mesh.basis_gradients
    local = (c * mesh.areas)[:, None, None] * np.einsum('tid,tjd->tij', g, g)

    return _assemble_matrix(mesh, local)

def assemble_mass(mesh:Mesh, weight=1.0):
    '''Assemble the weighted consistent mass matrix sum_K int_K w phi_i phi_j.

    Args:
        mesh (Mesh): Mesh
        weight (float or :obj:`np.ndarray`): Nonnegative weight, either scalar,
            per element (m,), or at the midpoint quadrature points (m, 3)

    Returns:
        scipy.sparse.csr_matrix: Symmetric positive semidefinite matrix

    Raises:
        ValueError: If a weight is negative.
    '''

    w = _element_weights(mesh, weight, 'Mass weight')
    if np.any(w < 0.0):
        raise ValueError(f'Mass weight must be nonnegative, minimum is {w.min()}')

    # M_ij = sum_q |K|/3 w_q B_qi B_qj
    wq = mesh.areas[:, None] / 3.0 * w
    local = np.einsum('tq,qi,qj->tij', wq, MIDPOINT_BASIS, MIDPOINT_BASIS)

    return _assemble_matrix(mesh, local)

def assemble_load(mesh:Mesh, f) -> np.ndarray:
    '''Assemble the load vector int f phi_i by midpoint quadrature.

    Args:
        mesh (Mesh): Mesh
        f: Coordinate function ``f(points) -> values`` or a constant

    Returns:
        np.ndarray: Load vector
    '''

    e = mesh.edges
    midpoints = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])

    if callable(f):
        fe = np.broadcast_to(np.asarray(f(midpoints), dtype=float), (e.shape[0],))
    else:
        fe = np.full(e.shape[0], float(f))

    return assemble_quadrature_vector(mesh, fe[mesh.triangle_edges])

def assemble_boundary_mass(mesh:Mesh, arc=None):
    '''Assemble the boundary mass matrix int_Sigma phi_i phi_j over the OUTER
    edges of the accessible arc.

    Args:
        mesh (Mesh): Mesh
        arc (ArcSpec): Boundary arc. ``None`` selects the full boundary.

    Returns:
        scipy.sparse.csr_matrix: Matrix supported on the arc vertices

    Raises:
        ValueError: If the arc selects no boundary edge.
    '''

    edges = mesh.sigma_edges(arc)
    if edges.shape[0] == 0:
        raise ValueError(f'Boundary arc {arc} selects no boundary edge.')

    length = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
    local = (length / 6.0)[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]])

    rows = np.broadcast_to(edges[:, :, None], local.shape)
    cols = np.broadcast_to(edges[:, None, :], local.shape)
    mat = sparse.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(mesh.nverts, mesh.nverts))

    return mat.tocsr()

def l2_norm(mesh:Mesh, values, mass=None) -> float:
    '''L2 norm of a P1 field.
    '''
    values = np.asarray(getattr(values, 'values', values), dtype=float)
    mass = assemble_mass(mesh) if mass is None else mass
    return float(np.sqrt(max(values @ (mass @ values), 0.0)))

###########
# Solvers #
###########

def _diagnostics(matrix, rhs) -> dict:
    diag = matrix.diagonal()
    return {
        'dimension': matrix.shape[0],
        'nnz': int(matrix.nnz),
        'diag_min': float(diag.min()) if diag.size else float('nan'),
        'diag_max': float(diag.max()) if diag.size else float('nan'),
        'nonfinite': bool(not np.all(np.isfinite(matrix.data)) or not np.all(np.isfinite(rhs))),
    }

def solve_sparse(matrix, rhs, method:LinearSolver=LinearSolver.DIRECT, rtol:float=1.0e-12,
                 maxiter:typing.Optional[int]=None) -> np.ndarray:
    '''Solve a symmetric sparse linear system.

    The direct method uses a sparse LU factorization. The ``cg`` method uses
    conjugate gradients preconditioned with an incomplete LU factorization.

    Args:
        matrix (:obj:`scipy.sparse.spmatrix`): Symmetric matrix
        rhs (:obj:`np.ndarray`): Right-hand side
        method (LinearSolver): ``direct`` or ``cg``
        rtol (float): Relative tolerance of the iterative method
        maxiter (int): Iteration cap of the iterative method

    Returns:
        np.ndarray: Solution

    Raises:
        FactorizationError: If the factorization or iteration fails or
            produces non-finite values.
    '''

    rhs = np.asarray(rhs, dtype=float)
    matrix = sparse.csc_matrix(matrix)

    if not np.any(rhs):
        return np.zeros_like(rhs)

    if not np.all(np.isfinite(matrix.data)) or not np.all(np.isfinite(rhs)):
        raise FactorizationError('Linear system has non-finite entries.', _diagnostics(matrix, rhs))

    method = LinearSolver(method)

    if method == LinearSolver.DIRECT:
        try:
            x = spla.splu(matrix).solve(rhs)
        except RuntimeError as e:
            raise FactorizationError(f'Sparse LU factorization failed: {e}.', _diagnostics(matrix, rhs))
    else:
        try:
            ilu = spla.spilu(matrix)
        except RuntimeError as e:
            raise FactorizationError(f'Incomplete LU factorization failed: {e}.', _diagnostics(matrix, rhs))
        precond = spla.LinearOperator(matrix.shape, ilu.solve)
        x, info = spla.cg(matrix, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=precond)
        if info != 0:
            raise FactorizationError(f'Conjugate gradient did not converge (info={info}).', _diagnostics(matrix, rhs))

    if not np.all(np.isfinite(x)):
        raise FactorizationError('Linear solve produced non-finite values.', _diagnostics(matrix, rhs))

    residual = np.linalg.norm(matrix @ x - rhs) / np.linalg.norm(rhs)
    if method == LinearSolver.DIRECT and residual > DIRECT_RTOL:
        logger.warning(f'Direct solve relative residual {residual:.3e} exceeds {DIRECT_RTOL:.0e}')

    return x
