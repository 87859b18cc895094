# Test Imports
import pytest
from pytest import approx
import math
import numpy as np

# Modules Under Test
from phasecav.fem import NodalField
from phasecav.mesh import generate_disk_mesh
from phasecav.objective import *
from phasecav.data_models.parameters import PhaseFieldParams, FictitiousParams, Potential, AdjointWeight

def test_potentials():
    v = np.array([0.0, 0.25, 0.5, 1.0])

    assert potential(v, Potential.CONVEX) == approx([0.0, 0.1875, 0.25, 0.0])
    assert potential(v, Potential.DOUBLE_WELL) == approx([0.0, 0.03515625, 0.0625, 0.0])

    h = 1e-6
    for kind in [Potential.CONVEX, Potential.DOUBLE_WELL]:
        fd = (potential(v + h, kind) - potential(v - h, kind)) / (2 * h)
        assert potential_derivative(v, kind) == approx(fd, abs=1e-8)

def test_misfit(disk_mesh):
    sigma = disk_mesh.sigma_vertices()

    # Unit residual on the whole circle: 1/2 * 2*pi
    assert misfit(disk_mesh, [np.ones(sigma.shape[0])], np.zeros((1, sigma.shape[0]))) == approx(math.pi, rel=1e-2)
    assert misfit(disk_mesh, [np.zeros(sigma.shape[0])], np.zeros((1, sigma.shape[0]))) == 0.0

def test_misfit_full_traces(disk_mesh):
    sigma = disk_mesh.sigma_vertices()
    traces = [np.full(disk_mesh.nverts, 2.0), np.full(disk_mesh.nverts, 1.0)]
    measured = np.ones((2, sigma.shape[0]))

    # Average of 1/2*|circle| and 0
    assert misfit(disk_mesh, traces, measured) == approx(0.5 * math.pi, rel=1e-2)

def test_misfit_validation(disk_mesh):
    sigma = disk_mesh.sigma_vertices()
    with pytest.raises(ValueError):
        misfit(disk_mesh, [np.ones(sigma.shape[0])], np.zeros((2, sigma.shape[0])))

    with pytest.raises(ValueError):
        misfit(disk_mesh, [], np.zeros((0, sigma.shape[0])))

def test_gl_energy_constant(coarse_mesh):
    params = PhaseFieldParams(epsilon=0.1)
    assert gl_energy(NodalField.constant(coarse_mesh, 0.0), params) == approx(0.0, abs=1e-14)
    assert gl_energy(NodalField.constant(coarse_mesh, 1.0), params) == approx(0.0, abs=1e-12)

    # W(1/2) = 1/4 over the whole disk
    assert gl_energy(NodalField.constant(coarse_mesh, 0.5), params) == approx(params.gamma / 0.1 * 0.25 * coarse_mesh.area, rel=1e-12)

def test_gl_energy_optimal_profile():
    # Optimal one-dimensional profile across the circle r = 0.5 approximates its perimeter
    eps = 0.1
    mesh = generate_disk_mesh(1.0, 0.02)
    s = (np.linalg.norm(mesh.vertices, axis=1) - 0.5) / eps
    v = NodalField(mesh, 0.5 * (1.0 + np.sin(np.clip(s, -0.5 * math.pi, 0.5 * math.pi))))

    assert gl_energy(v, PhaseFieldParams(epsilon=eps)) == approx(math.pi, rel=0.1)

def test_eval_J(coarse_mesh, coarse_measurements):
    v = NodalField.constant(coarse_mesh, 1.0)
    params = PhaseFieldParams(alpha=1e-3)
    result = eval_J(v, coarse_measurements, params, FictitiousParams())

    assert isinstance(result, Evaluation)
    assert len(result.states) == coarse_measurements.num_sources
    assert result.regularizer == approx(0.0, abs=1e-12)
    assert result.misfit > 0.0
    assert result.total == approx(result.misfit + params.alpha * result.regularizer)

    # Cached context gives the same value
    ctx = ProblemContext(coarse_mesh, coarse_measurements)
    again = eval_J(v, coarse_measurements, params, FictitiousParams(), context=ctx, warm_states=result.states)
    assert again.total == approx(result.total, rel=1e-10)

def test_eval_J_truth_smaller(coarse_mesh, coarse_measurements, disk_cavity):
    params = PhaseFieldParams(alpha=0.0)
    fict = FictitiousParams(delta=1e-3)

    full = eval_J(NodalField.constant(coarse_mesh, 1.0), coarse_measurements, params, fict)
    truth = NodalField.interpolate(coarse_mesh, lambda p: np.where(disk_cavity.contains(p), 0.0, 1.0))
    close = eval_J(truth, coarse_measurements, params, fict)

    assert close.misfit < full.misfit

@pytest.fixture
def interior_field(coarse_mesh):
    yield NodalField.interpolate(coarse_mesh, lambda p: 0.5 + 0.3 * np.cos(3.0 * p[:, 0]) * p[:, 1])

@pytest.mark.parametrize("seed", range(10))
def test_gradient_check(coarse_mesh, coarse_measurements, seed):
    rng = np.random.default_rng(seed)
    v = NodalField(coarse_mesh, 0.2 + 0.6 * rng.random(coarse_mesh.nverts))
    direction = rng.uniform(-1.0, 1.0, coarse_mesh.nverts)
    params = PhaseFieldParams(epsilon=0.1, alpha=1e-3)

    report = gradient_check(v, direction, coarse_measurements, params, FictitiousParams(delta=1e-2))
    assert report['error'] < 1e-4
    assert len(report['errors']) == len(report['finite_differences'])

def test_gradient_check_double_well(interior_field, coarse_measurements):
    direction = np.exp(-np.sum((interior_field.mesh.vertices - [0.2, 0.1])**2, axis=1) / 0.1)
    params = PhaseFieldParams(epsilon=0.1, alpha=1e-3, potential=Potential.DOUBLE_WELL)

    report = gradient_check(interior_field, direction, coarse_measurements, params, FictitiousParams(delta=1e-2))
    assert report['error'] < 1e-4

def test_gradient_check_conductivity_weighting(interior_field, coarse_measurements):
    direction = np.exp(-np.sum(interior_field.mesh.vertices**2, axis=1) / 0.1)
    params = PhaseFieldParams(epsilon=0.1, alpha=0.0)
    fict = FictitiousParams(delta=0.5, adjoint_weight=AdjointWeight.CONDUCTIVITY)

    # The alternative weighting is not the exact discrete derivative
    report = gradient_check(interior_field, direction, coarse_measurements, params, fict)
    assert np.isfinite(report['error'])

@pytest.mark.parametrize("seed", range(3))
def test_gradient_check_both_weightings(coarse_mesh, coarse_measurements, seed):
    rng = np.random.default_rng(seed)
    v = NodalField(coarse_mesh, 0.2 + 0.6 * rng.random(coarse_mesh.nverts))
    direction = rng.uniform(-1.0, 1.0, coarse_mesh.nverts)
    params = PhaseFieldParams(epsilon=0.1, alpha=1e-3)

    reports = {}
    for weight in AdjointWeight:
        fict = FictitiousParams(delta=1e-2, adjoint_weight=weight)
        reports[weight] = gradient_check(v, direction, coarse_measurements, params, fict)

    assert reports[AdjointWeight.CONSISTENT]['error'] < 1e-4
    assert reports[AdjointWeight.CONSISTENT]['error'] <= reports[AdjointWeight.CONDUCTIVITY]['error']
    assert reports[AdjointWeight.CONSISTENT]['finite_differences'] == approx(reports[AdjointWeight.CONDUCTIVITY]['finite_differences'])

def test_gradient_split(interior_field, coarse_measurements):
    params = PhaseFieldParams(alpha=1e-3)
    fict = FictitiousParams()
    base = eval_J(interior_field, coarse_measurements, params, fict)
    adjoints = solve_adjoints(interior_field, base.states, coarse_measurements, fict)

    g = full_gradient(interior_field, base.states, adjoints, params, fict)
    ge = explicit_gradient(interior_field, base.states, adjoints, params, fict)
    gi = implicit_gradient(interior_field, params)
    assert g.values == approx(ge.values + gi.values, abs=1e-14)

    with pytest.raises(ValueError):
        explicit_gradient(interior_field, base.states, adjoints[:-1], params, fict)
