# Test Imports
import pytest
from pytest import approx
import numpy as np

# Modules Under Test
from phasecav.utils import NewtonConvergenceError
from phasecav.fem import NodalField, assemble_stiffness
from phasecav.mesh import generate_disk_mesh, generate_cavity_mesh, boundary_trace_interpolate
from phasecav.forward import *
from phasecav.measurements import make_sources
from phasecav.data_models.geometry import CavitySpec, DiskComponent
from phasecav.data_models.parameters import FictitiousParams, NewtonParams, SourceSpec

@pytest.mark.parametrize("c", [1.0, 8.0])
def test_constant_source(coarse_mesh, c):
    v = NodalField.constant(coarse_mesh, 1.0)
    u = solve_forward(coarse_mesh, v, FictitiousParams(), c)

    assert isinstance(u, ForwardSolution)
    assert u.values == approx(np.full(coarse_mesh.nverts, c**(1.0/3.0)), abs=1e-10)

def test_constant_source_warm_start(coarse_mesh):
    v = NodalField.constant(coarse_mesh, 1.0)
    u = solve_forward(coarse_mesh, v, FictitiousParams(), 8.0, u0=np.full(coarse_mesh.nverts, 0.5))

    assert u.iterations > 0
    assert u.residual_history[-1] < u.residual_history[0]
    assert u.values == approx(np.full(coarse_mesh.nverts, 2.0), abs=1e-8)

@pytest.mark.parametrize("delta", [1e-3, 1e-5])
def test_bounds(disk_mesh, delta):
    # 0 <= u <= (sup f)^(1/3) for nonnegative sources with peak 1
    v = NodalField.interpolate(disk_mesh, lambda p: np.where(np.linalg.norm(p, axis=1) < 0.3, 0.0, 1.0))
    for f in make_sources(SourceSpec()):
        u = solve_forward(disk_mesh, v, FictitiousParams(delta=delta), f)
        assert u.values.min() >= -0.01
        assert u.values.max() <= 1.05

def test_newton_failure(coarse_mesh):
    v = NodalField.constant(coarse_mesh, 1.0)
    with pytest.raises(NewtonConvergenceError) as excinfo:
        solve_forward(coarse_mesh, v, FictitiousParams(), 1.0, newton=NewtonParams(max_iterations=1),
                      u0=np.full(coarse_mesh.nverts, 5.0))

    assert len(excinfo.value.residual_history) >= 2

def test_phase_field_range(coarse_mesh):
    v = NodalField.constant(coarse_mesh, 1.5)
    with pytest.raises(ValueError):
        solve_forward(coarse_mesh, v, FictitiousParams(), 1.0)

def test_empty_cavity_reference():
    mesh = generate_cavity_mesh(1.0, CavitySpec(components=[]), 0.15)
    f = lambda p: 1.0 + p[:, 0]**2

    ref = solve_cavity_reference(mesh, f)
    u = solve_forward(mesh, NodalField.constant(mesh, 1.0), FictitiousParams(), f)

    assert ref.values == approx(u.values, abs=1e-10)

def test_cavity_reference(disk_cavity_mesh):
    u = solve_cavity_reference(disk_cavity_mesh, 1.0)
    assert u.values == approx(np.ones(disk_cavity_mesh.nverts), abs=1e-10)

def test_conductive_energy(coarse_mesh):
    v = NodalField.constant(coarse_mesh, 1.0)
    params = FictitiousParams()
    u = solve_forward(coarse_mesh, v, params, lambda p: 1.0 + p[:, 0])

    A = assemble_stiffness(coarse_mesh, 1.0)
    assert conductive_energy(coarse_mesh, v, params, u) == approx(u.values @ (A @ u.values), rel=1e-10)

def test_energy_bounded_in_delta(disk_mesh):
    v = NodalField.interpolate(disk_mesh, lambda p: np.where(np.linalg.norm(p, axis=1) < 0.3, 0.0, 1.0))
    f = lambda p: 1.0 + 0.5 * p[:, 0]

    energies = []
    for delta in [1e-3, 1e-4, 1e-5]:
        params = FictitiousParams(delta=delta)
        u = solve_forward(disk_mesh, v, params, f)
        energies.append(conductive_energy(disk_mesh, v, params, u))

    assert np.all(np.isfinite(energies))
    assert max(energies) < 1.5 * min(energies)

def test_newton_quadratic_tail(coarse_mesh):
    v = NodalField.constant(coarse_mesh, 1.0)
    u = solve_forward(coarse_mesh, v, FictitiousParams(), 8.0, newton=NewtonParams(rtol=1e-14),
                      u0=np.full(coarse_mesh.nverts, 0.5))

    r = np.array(u.residual_history)
    tail = [k for k in range(r.size - 1) if r[k] < 1e-3]
    assert len(tail) > 0
    for k in tail:
        assert r[k + 1] <= 10.0 * r[k]**2 + 1e-12

def test_shrinking_cavity_trace():
    # Boundary traces approach the trace without cavity as the cavity shrinks
    h = 0.05
    f = lambda p: 1.0 + 0.5 * p[:, 0]
    ref_mesh = generate_disk_mesh(1.0, h)
    ref = solve_cavity_reference(ref_mesh, f)
    ref_trace = ref.values[ref_mesh.outer_vertices]

    distances = []
    for radius in [0.3, 0.15, 0.075]:
        mesh = generate_cavity_mesh(1.0, CavitySpec(components=[DiskComponent(radius=radius)]), h)
        u = solve_cavity_reference(mesh, f)
        trace = boundary_trace_interpolate(mesh, u, ref_mesh)
        distances.append(np.max(np.abs(trace - ref_trace)))

    assert distances[0] > 0.0
    assert np.all(np.diff(distances) < 0.0)
