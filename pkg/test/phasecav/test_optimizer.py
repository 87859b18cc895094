# Test Imports
import pytest
from pytest import approx
import numpy as np

# Modules Under Test
import phasecav.optimizer
from phasecav.utils import StagnationError
from phasecav.fem import NodalField, assemble_mass, assemble_stiffness
from phasecav.optimizer import *
from phasecav.data_models.parameters import (
    PhaseFieldParams,
    FictitiousParams,
    StepController,
    StoppingSpec,
    Scheme,
)

def test_feasible_set(coarse_mesh):
    feasible = FeasibleSet(coarse_mesh, 0.05)
    radii = np.linalg.norm(coarse_mesh.vertices, axis=1)

    assert np.all(feasible.pinned[coarse_mesh.outer_vertices])
    assert np.all(radii[feasible.pinned] >= 0.95 - 1e-12)
    assert not np.any(feasible.pinned[radii < 0.9])

    projected = feasible.project(np.linspace(-1.0, 2.0, coarse_mesh.nverts))
    assert projected.min() >= 0.0 and projected.max() <= 1.0
    assert np.all(projected[feasible.pinned] == 1.0)
    assert feasible.contains(projected)

    v0 = feasible.initial()
    assert feasible.contains(v0)
    assert np.all(v0.values[~feasible.pinned] == 0.0)

    assert not feasible.contains(np.zeros(coarse_mesh.nverts))

    with pytest.raises(ValueError):
        FeasibleSet(coarse_mesh, -0.1)

def test_projected_gradient_step(coarse_mesh):
    feasible = FeasibleSet(coarse_mesh, 0.05)
    v = feasible.initial(0.5)

    assert projected_gradient_step(v, np.zeros(coarse_mesh.nverts), 1.0, feasible).values == approx(v.values)

    # Descent along a positive gradient decreases the free values down to the bound
    step = projected_gradient_step(v, np.ones(coarse_mesh.nverts), 100.0, feasible)
    assert feasible.contains(step)
    assert np.all(step.values[~feasible.pinned] <= 0.5)

def test_inner_solve_fixed_point(coarse_mesh):
    feasible = FeasibleSet(coarse_mesh, 0.05)
    v = NodalField.constant(coarse_mesh, 1.0)

    result = inner_solve(v, np.zeros(coarse_mesh.nverts), 1.0, PhaseFieldParams(alpha=1e-3), feasible)
    assert result.values == approx(np.ones(coarse_mesh.nverts), abs=1e-12)

def test_inner_solve_optimality(coarse_mesh):
    feasible = FeasibleSet(coarse_mesh, 0.05)
    params = PhaseFieldParams(alpha=1e-3)
    v_k = feasible.initial(0.5)
    x = coarse_mesh.vertices
    g = 0.05 * np.sin(3.0 * x[:, 0]) * np.cos(2.0 * x[:, 1])
    tau = 10.0

    v = inner_solve(v_k, g, tau, params, feasible)
    assert feasible.contains(v)

    M = assemble_mass(coarse_mesh)
    A = assemble_stiffness(coarse_mesh)
    K = M / tau + 2.0 * params.alpha * params.gamma * params.epsilon * A
    mu = (M @ v_k.values / tau - g) - K @ v.values

    free = ~feasible.pinned
    inactive = free & (v.values > 0.0) & (v.values < 1.0)
    scale = np.abs(M @ v_k.values / tau).max()
    assert np.all(np.abs(mu[inactive]) <= 1e-8 * scale)
    assert np.all(mu[free & (v.values == 1.0)] >= -1e-8 * scale)
    assert np.all(mu[free & (v.values == 0.0)] <= 1e-8 * scale)

def test_inner_solve_bounds(coarse_mesh):
    feasible = FeasibleSet(coarse_mesh, 0.05)
    v_k = feasible.initial(0.5)
    g = 10.0 * np.sign(coarse_mesh.vertices[:, 0])

    v = inner_solve(v_k, g, 1.0, PhaseFieldParams(), feasible)
    assert feasible.contains(v)
    assert np.any(v.values == 0.0)
    assert np.any(v.values[~feasible.pinned] == 1.0)

def test_inner_solve_small_steps(coarse_mesh):
    feasible = FeasibleSet(coarse_mesh, 0.05)
    params = PhaseFieldParams(alpha=1e-3)
    v_k = feasible.initial(0.5)
    x = coarse_mesh.vertices
    g = 0.05 * np.sin(3.0 * x[:, 0]) * np.cos(2.0 * x[:, 1])

    norms = [np.linalg.norm(inner_solve(v_k, g, tau, params, feasible).values - v_k.values) for tau in [1.0, 1e-2, 1e-4]]
    assert norms[-1] > 0.0
    assert np.all(np.diff(norms) < 0.0)

def _accepted_values(history):
    return np.array([r.J for r in history if r.accepted])

def test_run_phase(coarse_mesh, coarse_measurements):
    v0 = NodalField.constant(coarse_mesh, 1.0)
    params = PhaseFieldParams(epsilon=0.1, alpha=1e-4)
    fict = FictitiousParams(delta=1e-2)
    stop = StoppingSpec(max_iterations=5, n_adapt=0)

    result = run_phase(v0, coarse_measurements, params, fict, ctrl=StepController(tau=1.0), stop=stop)

    assert isinstance(result, PhaseResult)
    assert FeasibleSet(coarse_mesh, fict.d0_band).contains(result.v)
    assert result.iterations <= 5
    assert result.history[0].accepted and result.history[0].iter == 0
    assert result.evaluation.total <= result.history[0].J
    assert result.stationarity >= 0.0 and np.isfinite(result.stationarity)
    assert np.all(np.diff(_accepted_values(result.history)) <= 0.0)

def test_run_phase_from_empty_interior(coarse_mesh, coarse_measurements):
    fict = FictitiousParams(delta=1e-2)
    v0 = FeasibleSet(coarse_mesh, fict.d0_band).initial()

    result = run_phase(v0, coarse_measurements, PhaseFieldParams(epsilon=0.1, alpha=1e-4), fict,
                       stop=StoppingSpec(max_iterations=1, n_adapt=0))

    accepted = _accepted_values(result.history)
    assert len(accepted) == 2
    assert accepted[1] < accepted[0]

def test_run_phase_adaptation(coarse_mesh, coarse_measurements):
    v0 = NodalField.constant(coarse_mesh, 1.0)
    stop = StoppingSpec(max_iterations=4, n_adapt=2, rtol=1e-12, h_min=0.02)

    result = run_phase(v0, coarse_measurements, PhaseFieldParams(alpha=1e-4), FictitiousParams(delta=1e-2),
                       stop=stop, phase=2, iter_offset=10)

    assert result.history[0].iter == 10
    assert all(r.phase == 2 for r in result.history)
    assert max(r.nverts for r in result.history) >= coarse_mesh.nverts
    assert result.v.mesh.nverts == result.history[-1].nverts

    # One record per evaluated iterate, accepted values never increase across refinements
    iters = [r.iter for r in result.history]
    assert len(set(iters)) == len(iters)
    assert np.all(np.diff(iters) == 1)
    assert np.all(np.diff(_accepted_values(result.history)) <= 0.0)

def test_run_phase_refinement_keeps_descent(coarse_mesh, coarse_measurements):
    v0 = NodalField.constant(coarse_mesh, 1.0)
    stop = StoppingSpec(max_iterations=6, n_adapt=2, rtol=1e-12, h_min=0.02)

    result = run_phase(v0, coarse_measurements, PhaseFieldParams(alpha=1e-4), FictitiousParams(delta=1e-2), stop=stop)

    accepted = [r for r in result.history if r.accepted]
    assert result.v.mesh.nverts >= coarse_mesh.nverts
    assert np.all(np.diff([r.J for r in accepted]) <= 0.0)
    assert len({r.iter for r in result.history}) == len(result.history)

def test_run_phase_refinement_raises_functional(coarse_mesh, coarse_measurements, monkeypatch):
    # Evaluations off the initial mesh are shifted up, so no step after the
    # refinement can return below the last accepted value
    real = phasecav.optimizer.eval_J

    def shifted(v, *args, **kwargs):
        ev = real(v, *args, **kwargs)
        return ev._replace(total=ev.total + (0.0 if v.mesh is coarse_mesh else 1.0))

    monkeypatch.setattr(phasecav.optimizer, 'eval_J', shifted)

    stop = StoppingSpec(max_iterations=6, n_adapt=2, rtol=1e-12, h_min=0.02)
    result = run_phase(NodalField.constant(coarse_mesh, 1.0), coarse_measurements, PhaseFieldParams(alpha=1e-4),
                       FictitiousParams(delta=1e-2), ctrl=StepController(tau=1.0, tau_min=1e-3), stop=stop)

    assert result.v.mesh is not coarse_mesh
    assert result.iterations == 2
    assert not result.converged

    accepted = _accepted_values(result.history)
    assert len(accepted) == 3
    assert np.all(np.diff(accepted) <= 0.0)
    assert all(not r.accepted for r in result.history if r.nverts != coarse_mesh.nverts)

def test_run_phase_projected_gradient(coarse_mesh, coarse_measurements):
    v0 = NodalField.constant(coarse_mesh, 1.0)
    stop = StoppingSpec(max_iterations=3, n_adapt=0)

    result = run_phase(v0, coarse_measurements, PhaseFieldParams(alpha=1e-4), FictitiousParams(delta=1e-2),
                       ctrl=StepController(tau=0.1), stop=stop, scheme=Scheme.PROJECTED_GRADIENT)

    assert result.evaluation.total <= result.history[0].J

def test_run_phase_infeasible(coarse_mesh, coarse_measurements):
    with pytest.raises(ValueError):
        run_phase(NodalField.constant(coarse_mesh, 0.0), coarse_measurements, PhaseFieldParams(), FictitiousParams())

def test_run_phase_does_not_modify_controller(coarse_mesh, coarse_measurements):
    ctrl = StepController(tau=1.0)
    run_phase(NodalField.constant(coarse_mesh, 1.0), coarse_measurements, PhaseFieldParams(), FictitiousParams(),
              ctrl=ctrl, stop=StoppingSpec(max_iterations=2, n_adapt=0))
    assert ctrl.tau == 1.0

@pytest.fixture
def increasing_J(monkeypatch):
    # Every evaluation after the first reports a larger functional value
    calls = {'n': 0}
    real = phasecav.optimizer.eval_J

    def fake(*args, **kwargs):
        ev = real(*args, **kwargs)
        calls['n'] += 1
        return ev._replace(total=ev.total + calls['n'])

    monkeypatch.setattr(phasecav.optimizer, 'eval_J', fake)
    yield calls

def test_stagnation_adaptive(coarse_mesh, coarse_measurements, increasing_J):
    ctrl = StepController(tau=1.0, tau_min=0.1)
    with pytest.raises(StagnationError) as excinfo:
        run_phase(NodalField.constant(coarse_mesh, 1.0), coarse_measurements, PhaseFieldParams(), FictitiousParams(),
                  ctrl=ctrl, stop=StoppingSpec(n_adapt=0))

    history = excinfo.value.history
    # Rejections at tau = 1, 0.5, 0.25, 0.125
    assert [r.accepted for r in history] == [True, False, False, False, False]
    assert [r.tau for r in history[1:]] == approx([1.0, 0.5, 0.25, 0.125])
    assert excinfo.value.v.values == approx(np.ones(coarse_mesh.nverts))

def test_stagnation_fixed_step(coarse_mesh, coarse_measurements, increasing_J):
    ctrl = StepController(tau=1.0, adaptive=False)
    with pytest.raises(StagnationError) as excinfo:
        run_phase(NodalField.constant(coarse_mesh, 1.0), coarse_measurements, PhaseFieldParams(), FictitiousParams(),
                  ctrl=ctrl, stop=StoppingSpec(n_adapt=0))

    assert len(excinfo.value.history) == 2
    assert increasing_J['n'] == 2

def test_iteration_record():
    record = IterationRecord(iter=3, J=1.0, misfit=0.5, reg=5.0, tau=0.1, accepted=True, nverts=100)
    assert record.phase == 0

    with pytest.raises(ValueError):
        IterationRecord(iter=-1, J=1.0, misfit=0.5, reg=5.0, tau=0.1, accepted=True, nverts=100)
