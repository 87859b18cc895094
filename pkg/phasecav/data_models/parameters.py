"""The parameters module provides the validated parameter groups of the
forward solver, the phase-field functional, the optimizer and the
continuation schedule.
"""

import enum
import math
import typing
import pydantic
import numpy as np

from pydantic import Field
from typing import List
from typing_extensions import Annotated

import phasecav.constants as pcc

#########
# Enums #
#########

class Potential(str, enum.Enum):
    '''Ginzburg-Landau potential W(v).
    '''
    DOUBLE_WELL = 'double_well'
    CONVEX = 'convex'

class AdjointWeight(str, enum.Enum):
    '''Zero-order weight of the adjoint operator. ``consistent`` uses v*3u^2,
    the transpose of the Newton Jacobian. ``conductivity`` uses a_delta(v)*3u^2.
    '''
    CONSISTENT = 'consistent'
    CONDUCTIVITY = 'conductivity'

class LinearSolver(str, enum.Enum):
    DIRECT = 'direct'
    CG = 'cg'

class Scheme(str, enum.Enum):
    '''Minimizing-movement update used by the optimizer.
    '''
    SEMI_IMPLICIT = 'semi_implicit'
    PROJECTED_GRADIENT = 'projected_gradient'

##################
# Forward Solver #
##################

class NewtonParams(pydantic.BaseModel):
    '''Newton iteration settings for the semilinear forward problem.
    Convergence is reached when ``|R(u)| <= atol + rtol*|F|``.
    '''
    atol: Annotated[float, Field(gt=0.0)] = pydantic.Field(1.0e-12, description='Absolute residual tolerance')
    rtol: Annotated[float, Field(gt=0.0)] = pydantic.Field(1.0e-10, description='Residual tolerance relative to the load vector norm')
    max_iterations: Annotated[int, Field(ge=1)] = pydantic.Field(50, description='Maximum number of Newton iterations')
    damping: Annotated[float, Field(gt=0.0, le=1.0)] = pydantic.Field(1.0, description='Initial Newton step factor')
    max_backtracks: Annotated[int, Field(ge=0)] = pydantic.Field(30, description='Maximum step halvings per iteration')
    linear_solver: LinearSolver = pydantic.Field(LinearSolver.DIRECT, description='Sparse linear solver')
    linear_rtol: Annotated[float, Field(gt=0.0)] = pydantic.Field(1.0e-12, description='Relative tolerance of the iterative linear solver')

class FictitiousParams(pydantic.BaseModel):
    '''Fictitious material a_delta(v) = delta + (1 - delta)*v and the boundary
    band where the phase field is fixed to one.
    '''
    delta: Annotated[float, Field(gt=0.0, lt=1.0)] = pydantic.Field(pcc.DELTA0, description='Fictitious conductivity of the cavity region')
    d0_band: Annotated[float, Field(gt=0.0)] = pydantic.Field(pcc.D0_BAND, description='Width of the boundary band where v = 1. Units: [domain]')
    adjoint_weight: AdjointWeight = pydantic.Field(AdjointWeight.CONSISTENT, description='Zero-order weight of the adjoint operator')

    def conductivity(self, v):
        '''Evaluate a_delta at phase field values.
        '''
        return self.delta + (1.0 - self.delta) * v

###############
# Phase Field #
###############

class PhaseFieldParams(pydantic.BaseModel):
    '''Relaxed perimeter regularization gamma*eps*|grad v|^2 + (gamma/eps)*W(v)
    weighted by alpha. When gamma is omitted it is set so that the limit of
    the energy is the perimeter.
    '''
    epsilon: Annotated[float, Field(gt=0.0)] = pydantic.Field(pcc.EPSILON0, description='Diffuse interface width')
    alpha: Annotated[float, Field(ge=0.0)] = pydantic.Field(pcc.ALPHA, description='Regularization weight')
    potential: Potential = pydantic.Field(Potential.CONVEX, description='Ginzburg-Landau potential')
    gamma: typing.Optional[Annotated[float, Field(gt=0.0)]] = pydantic.Field(None, description='Normalization constant')

    @pydantic.model_validator(mode='after')
    def default_gamma(self):
        if self.gamma is None:
            self.gamma = pcc.GAMMA_CONVEX if self.potential == Potential.CONVEX else pcc.GAMMA_DOUBLE_WELL
        return self

#############
# Optimizer #
#############

class StepController(pydantic.BaseModel):
    '''Adaptive step length of the minimizing-movement iteration.
    '''
    tau: Annotated[float, Field(gt=0.0)] = pydantic.Field(1.0, description='Current step length')
    tau_min: Annotated[float, Field(gt=0.0)] = pydantic.Field(1.0e-8, description='Minimum step length')
    tau_max: Annotated[float, Field(gt=0.0)] = pydantic.Field(1.0e3, description='Maximum step length')
    shrink: Annotated[float, Field(gt=0.0, lt=1.0)] = pydantic.Field(0.5, description='Step reduction factor on rejection')
    grow: Annotated[float, Field(gt=1.0)] = pydantic.Field(1.2, description='Step increase factor on acceptance')
    adaptive: bool = pydantic.Field(True, description='Adapt the step length. When false tau stays fixed.')

    @pydantic.model_validator(mode='after')
    def validate_bounds(self):
        if self.tau_min > self.tau_max:
            raise ValueError(f'tau_min={self.tau_min} must not exceed tau_max={self.tau_max}')
        if not (self.tau_min <= self.tau <= self.tau_max):
            raise ValueError(f'tau={self.tau} must lie in [{self.tau_min}, {self.tau_max}]')
        return self

    def rejected(self) -> float:
        '''Shrink the step after a rejected update and return the new value.
        '''
        self.tau = self.tau * self.shrink
        return self.tau

    def accepted(self) -> float:
        '''Grow the step after an accepted update, capped at tau_max.
        '''
        if self.adaptive:
            self.tau = min(self.tau * self.grow, self.tau_max)
        return self.tau

class StoppingSpec(pydantic.BaseModel):
    '''Termination criteria of one optimization phase.
    '''
    rtol: Annotated[float, Field(gt=0.0)] = pydantic.Field(1.0e-4, description='Relative L2 distance between accepted iterates')
    max_iterations: Annotated[int, Field(ge=1)] = pydantic.Field(500, description='Maximum number of accepted iterations')
    n_adapt: Annotated[int, Field(ge=0)] = pydantic.Field(pcc.N_ADAPT, description='Accepted steps between mesh adaptations. 0 disables adaptation.')
    mark_fraction: Annotated[float, Field(gt=0.0, le=1.0)] = pydantic.Field(pcc.MARK_FRACTION, description='Fraction of elements marked for refinement')
    h_min: Annotated[float, Field(gt=0.0)] = pydantic.Field(pcc.H_MIN, description='Minimum element diameter')
    max_vertices: Annotated[int, Field(ge=3)] = pydantic.Field(pcc.MAX_VERTICES, description='Vertex cap of mesh operations')
    pdas_max_sweeps: Annotated[int, Field(ge=1)] = pydantic.Field(50, description='Primal-dual active set sweep cap')

################
# Continuation #
################

class Schedule(pydantic.BaseModel):
    '''Continuation plan over decreasing (epsilon, delta).
    '''
    epsilon0: Annotated[float, Field(gt=0.0)] = pydantic.Field(pcc.EPSILON0, description='Initial interface width')
    delta0: Annotated[float, Field(gt=0.0, lt=1.0)] = pydantic.Field(pcc.DELTA0, description='Initial fictitious conductivity')
    epsilon_factor: Annotated[float, Field(gt=1.0)] = pydantic.Field(pcc.EPSILON_FACTOR, description='Reduction factor of epsilon between phases')
    delta_factor: Annotated[float, Field(gt=1.0)] = pydantic.Field(pcc.DELTA_FACTOR, description='Reduction factor of delta between phases')
    n_phases: Annotated[int, Field(ge=1)] = pydantic.Field(pcc.N_PHASES, description='Number of continuation phases')
    alpha: Annotated[float, Field(ge=0.0)] = pydantic.Field(pcc.ALPHA, description='Regularization weight')
    alpha_overrides: typing.Optional[List[Annotated[float, Field(ge=0.0)]]] = pydantic.Field(None, description='Per-phase regularization weights')
    stopping: StoppingSpec = pydantic.Field(StoppingSpec(), description='Per-phase stopping criteria')
    reset_tau: bool = pydantic.Field(False, description='Reset the step length at the start of every phase')

    @pydantic.model_validator(mode='after')
    def validate_overrides(self):
        if self.alpha_overrides is not None and len(self.alpha_overrides) != self.n_phases:
            raise ValueError(f'alpha_overrides has {len(self.alpha_overrides)} entries, expected n_phases={self.n_phases}')
        return self

    def phase_parameters(self, n:int) -> typing.Tuple[float, float, float]:
        '''Return (epsilon_n, delta_n, alpha_n) of phase ``n``.
        '''
        if not 0 <= n < self.n_phases:
            raise ValueError(f'Phase index {n} out of range [0, {self.n_phases})')

        eps = self.epsilon0 / self.epsilon_factor**n
        delta = self.delta0 / self.delta_factor**n
        alpha = self.alpha if self.alpha_overrides is None else self.alpha_overrides[n]

        return eps, delta, alpha

################
# Measurements #
################

class SourceSpec(pydantic.BaseModel):
    '''Gaussian sources exp(-|x - x_i|^2 / r_f^2) on a ring of radius R_f.
    '''
    count: Annotated[int, Field(ge=1)] = pydantic.Field(pcc.N_MEAS, description='Number of sources N_meas')
    ring_radius: Annotated[float, Field(gt=0.0)] = pydantic.Field(pcc.SOURCE_RING_RADIUS, description='Radius R_f of the source centers. Units: [domain]')
    width: Annotated[float, Field(gt=0.0)] = pydantic.Field(pcc.SOURCE_WIDTH, description='Gaussian width r_f. Units: [domain]')
    amplitude: Annotated[float, Field(gt=0.0)] = pydantic.Field(1.0, description='Peak value of each source')

    def centers(self) -> List[typing.Tuple[float, float]]:
        '''Source centers R_f*(cos(i*pi/N), sin(i*pi/N)) for i = 1..N.
        '''
        return [(self.ring_radius * math.cos(i * math.pi / self.count),
                 self.ring_radius * math.sin(i * math.pi / self.count)) for i in range(1, self.count + 1)]

class ArcSpec(pydantic.BaseModel):
    '''Accessible part of the outer boundary. ``None`` bounds select the full
    circle. Angles in radians, interval taken counter-clockwise from
    ``start`` to ``end``.
    '''
    start: typing.Optional[float] = pydantic.Field(None, description='Start angle. Units: [rad]')
    end: typing.Optional[float] = pydantic.Field(None, description='End angle. Units: [rad]')

    @pydantic.model_validator(mode='after')
    def validate_pair(self):
        if (self.start is None) != (self.end is None):
            raise ValueError('Both start and end of the boundary arc must be given.')
        if self.start is not None and self.end <= self.start:
            raise ValueError(f'Arc end {self.end} must be larger than start {self.start}.')
        return self

    @property
    def is_full(self) -> bool:
        return self.start is None

    def contains(self, theta):
        '''Mask of angles lying in the arc.
        '''
        theta = np.asarray(theta, dtype=float)
        if self.is_full:
            return np.ones(theta.shape, dtype=bool)

        shifted = np.mod(theta - self.start, 2.0 * math.pi)
        return shifted <= (self.end - self.start) + 1.0e-12

    @classmethod
    def parse(cls, text:typing.Optional[str]):
        '''Parse a command line arc ``"a,b"``. Empty input selects the full
        boundary.
        '''
        if text is None or text.strip() == '' or text.strip().lower() == 'full':
            return cls()

        parts = text.split(',')
        if len(parts) != 2:
            raise ValueError(f'Boundary arc "{text}" must have the form "a,b".')

        return cls(start=float(parts[0]), end=float(parts[1]))

class MeshSettings(pydantic.BaseModel):
    '''Mesh resolution of reconstruction and synthetic data meshes.
    '''
    radius: Annotated[float, Field(gt=0.0)] = pydantic.Field(pcc.DOMAIN_RADIUS, description='Domain radius')
    recon_h: Annotated[float, Field(gt=0.0)] = pydantic.Field(0.05, description='Target element size of the reconstruction mesh')
    fine_factor: Annotated[float, Field(gt=1.0)] = pydantic.Field(2.0, description='Ratio between reconstruction and data mesh sizes')
    snap_to_circle: bool = pydantic.Field(True, description='Project refined outer boundary vertices onto the circle')

    @property
    def fine_h(self) -> float:
        return self.recon_h / self.fine_factor
