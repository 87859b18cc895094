# Test Imports
import pytest
from pytest import approx
import math
import numpy as np
import scipy.sparse as sparse

# Modules Under Test
from phasecav.utils import FactorizationError
from phasecav.fem import *
from phasecav.data_models.parameters import ArcSpec, LinearSolver

def test_nodal_field(coarse_mesh):
    v = NodalField.constant(coarse_mesh, 0.5)
    assert len(v) == coarse_mesh.nverts
    assert v.mesh is coarse_mesh
    assert np.all(v.values == 0.5)

    with pytest.raises(ValueError):
        v.values[0] = 1.0

    w = v.with_values(np.ones(coarse_mesh.nverts))
    assert w.mesh is coarse_mesh
    assert np.all(w.values == 1.0)

def test_nodal_field_validation(coarse_mesh):
    with pytest.raises(ValueError):
        NodalField(coarse_mesh, np.zeros(coarse_mesh.nverts + 1))

    values = np.zeros(coarse_mesh.nverts)
    values[3] = np.nan
    with pytest.raises(ValueError):
        NodalField(coarse_mesh, values)

def test_stiffness(disk_mesh):
    A = assemble_stiffness(disk_mesh, 1.0)
    ones = np.ones(disk_mesh.nverts)

    assert abs(A - A.T).max() < 1e-14
    assert A @ ones == approx(np.zeros(disk_mesh.nverts), abs=1e-12)

    # int |grad x|^2 = |Omega|
    x = disk_mesh.vertices[:, 0]
    assert x @ (A @ x) == approx(disk_mesh.area, rel=1e-12)

    # Per-element coefficient scales the energy
    A2 = assemble_stiffness(disk_mesh, np.full(disk_mesh.ntris, 2.5))
    assert x @ (A2 @ x) == approx(2.5 * disk_mesh.area, rel=1e-12)

def test_stiffness_validation(coarse_mesh):
    with pytest.raises(ValueError):
        assemble_stiffness(coarse_mesh, 0.0)

    with pytest.raises(ValueError):
        assemble_stiffness(coarse_mesh, np.ones(3))

def test_mass(disk_mesh):
    M = assemble_mass(disk_mesh)
    ones = np.ones(disk_mesh.nverts)
    assert ones @ (M @ ones) == approx(disk_mesh.area, rel=1e-12)

    # Exact for products of P1 functions: int x^2 over each element
    x = disk_mesh.vertices[:, 0]
    p = disk_mesh.vertices[disk_mesh.triangles][:, :, 0]
    exact = np.sum(disk_mesh.areas / 6.0 * (np.sum(p**2, axis=1) + p[:, 0]*p[:, 1] + p[:, 1]*p[:, 2] + p[:, 2]*p[:, 0]))
    assert x @ (M @ x) == approx(exact, rel=1e-12)

    Mw = assemble_mass(disk_mesh, 3.0)
    assert ones @ (Mw @ ones) == approx(3.0 * disk_mesh.area, rel=1e-12)

def test_mass_validation(coarse_mesh):
    with pytest.raises(ValueError):
        assemble_mass(coarse_mesh, -1.0)

    with pytest.raises(ValueError):
        assemble_mass(coarse_mesh, np.ones((2, 2)))

def test_load(disk_mesh):
    b = assemble_load(disk_mesh, 1.0)
    assert np.sum(b) == approx(disk_mesh.area, rel=1e-12)

    b = assemble_load(disk_mesh, lambda p: p[:, 0])
    x = disk_mesh.vertices[:, 0]
    M = assemble_mass(disk_mesh)
    assert b == approx(M @ x, abs=1e-14)

def test_boundary_mass(disk_mesh):
    B = assemble_boundary_mass(disk_mesh)
    ones = np.ones(disk_mesh.nverts)

    outer = disk_mesh.outer_edges
    perimeter = np.sum(np.linalg.norm(disk_mesh.vertices[outer[:, 1]] - disk_mesh.vertices[outer[:, 0]], axis=1))
    assert ones @ (B @ ones) == approx(perimeter, rel=1e-12)
    assert perimeter == approx(2 * math.pi, rel=1e-2)

    # Supported on the boundary only
    interior = np.setdiff1d(np.arange(disk_mesh.nverts), disk_mesh.outer_vertices)
    assert abs(B[interior]).max() == 0.0

def test_boundary_mass_arc(disk_mesh):
    B = assemble_boundary_mass(disk_mesh, ArcSpec(start=0.0, end=math.pi))
    ones = np.ones(disk_mesh.nverts)
    assert ones @ (B @ ones) == approx(math.pi, rel=2e-2)

    with pytest.raises(ValueError):
        assemble_boundary_mass(disk_mesh, ArcSpec(start=0.0, end=1e-6))

def test_quadrature(coarse_mesh):
    v = NodalField.interpolate(coarse_mesh, lambda p: p[:, 0] + 2.0)
    assert integrate_quadrature(coarse_mesh, quadrature_values(coarse_mesh, v)) == approx(2.0 * coarse_mesh.area, rel=1e-12)
    assert element_means(coarse_mesh, v) == approx(coarse_mesh.vertices[coarse_mesh.triangles][:, :, 0].mean(axis=1) + 2.0, abs=1e-14)

def test_l2_norm(disk_mesh):
    assert l2_norm(disk_mesh, np.ones(disk_mesh.nverts)) == approx(math.sqrt(disk_mesh.area), rel=1e-12)

@pytest.mark.parametrize("method", [LinearSolver.DIRECT, LinearSolver.CG])
def test_solve_sparse(disk_mesh, method):
    K = assemble_stiffness(disk_mesh) + assemble_mass(disk_mesh)
    x = np.cos(disk_mesh.vertices[:, 0])
    b = K @ x

    sol = solve_sparse(K, b, method=method, rtol=1e-12)
    assert sol == approx(x, abs=1e-8)

def test_solve_sparse_zero_rhs(coarse_mesh):
    K = assemble_mass(coarse_mesh)
    assert np.all(solve_sparse(K, np.zeros(coarse_mesh.nverts)) == 0.0)

def test_solve_sparse_nonfinite(coarse_mesh):
    K = assemble_mass(coarse_mesh)
    b = np.ones(coarse_mesh.nverts)
    b[0] = np.inf

    with pytest.raises(FactorizationError) as excinfo:
        solve_sparse(K, b)
    assert excinfo.value.diagnostics['nonfinite']
    assert excinfo.value.diagnostics['dimension'] == coarse_mesh.nverts

def test_sparse_system(coarse_mesh):
    K = assemble_mass(coarse_mesh)
    system = SparseSystem(K, K @ np.ones(coarse_mesh.nverts), mesh=coarse_mesh)
    assert system.solve() == approx(np.ones(coarse_mesh.nverts), abs=1e-10)

    with pytest.raises(ValueError):
        SparseSystem(sparse.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]])), np.ones(2))

    with pytest.raises(ValueError):
        SparseSystem(K, np.ones(3))
