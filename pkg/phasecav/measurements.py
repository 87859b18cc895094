"""The measurements module generates synthetic boundary data. Sources are
Gaussian bumps near the boundary, reference solutions are computed on a finer
mesh fitted to the true cavity, and boundary traces are interpolated onto the
reconstruction mesh before Gaussian noise is added.
"""

import math
import logging
import typing
import pydantic
import numpy as np

from pydantic import Field
from typing import List, Optional
from typing_extensions import Annotated

import phasecav.constants as pcc
from phasecav.mesh import Mesh, generate_cavity_mesh, generate_disk_mesh, boundary_trace_interpolate, vertex_angles
from phasecav.fem import integrate_quadrature
from phasecav.forward import solve_cavity_reference
from phasecav.data_models.geometry import CavitySpec
from phasecav.data_models.parameters import SourceSpec, ArcSpec, NewtonParams

logger = logging.getLogger(__name__)

###########
# Sources #
###########

class GaussianSource():
    '''Source f(x) = amplitude * exp(-|x - center|^2 / width^2).
    '''

    def __init__(self, center:typing.Sequence[float], width:float, amplitude:float=1.0):
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)
        self.amplitude = float(amplitude)

    def __call__(self, points:np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        d2 = np.sum((points - self.center)**2, axis=1)
        return self.amplitude * np.exp(-d2 / self.width**2)

    def __repr__(self) -> str:
        return f'<GaussianSource: center=({self.center[0]:.6g}, {self.center[1]:.6g}), width={self.width}, amplitude={self.amplitude}>'

def make_sources(spec:SourceSpec) -> typing.List[GaussianSource]:
    '''Gaussian sources centered at R_f*(cos(i*pi/N), sin(i*pi/N)), i = 1..N.

    Args:
        spec (SourceSpec): Source definitions

    Returns:
        list: ``N`` nonnegative coordinate functions
    '''
    return [GaussianSource(c, spec.width, spec.amplitude) for c in spec.centers()]

def source_support_fraction(spec:SourceSpec, radius:float=pcc.DOMAIN_RADIUS, d0:float=pcc.D0_BAND,
                            target_h:float=0.02) -> typing.List[float]:
    '''Fraction of the mass of every source lying outside the boundary band
    {|x| > radius - d0}, computed by midpoint quadrature on a disk mesh.
    '''

    mesh = generate_disk_mesh(radius, target_h)
    p = mesh.vertices[mesh.triangles]
    qpoints = 0.5 * (p + np.roll(p, -1, axis=1))
    inner = np.linalg.norm(qpoints.reshape(-1, 2), axis=1).reshape(-1, 3) < radius - d0

    fractions = []
    for f in make_sources(spec):
        fq = f(qpoints.reshape(-1, 2)).reshape(-1, 3)
        total = integrate_quadrature(mesh, fq)
        fractions.append(integrate_quadrature(mesh, np.where(inner, fq, 0.0)) / total)

    return fractions

#########
# Noise #
#########

def make_rng(seed:int) -> np.random.Generator:
    '''Seeded generator with the PCG64 bit generator.
    '''
    return np.random.Generator(np.random.PCG64(seed))

def add_noise(trace, eta:float, rng:np.random.Generator) -> np.ndarray:
    '''Add i.i.d. Gaussian noise with standard deviation ``eta * max|trace|``.

    Args:
        trace (:obj:`np.ndarray`): Boundary values
        eta (float): Relative noise level
        rng (:obj:`np.random.Generator`): Seeded generator

    Returns:
        np.ndarray: Noisy copy of the trace. The generator is not advanced
            when ``eta`` is zero.
    '''

    if eta < 0.0:
        raise ValueError(f'Noise level must be nonnegative, got {eta}')

    trace = np.array(trace, dtype=float)
    if eta == 0.0:
        return trace

    std = eta * float(np.max(np.abs(trace)))
    return trace + rng.normal(0.0, std, size=trace.shape)

###################
# Measurement Set #
###################

class MeasurementSet(pydantic.BaseModel):
    '''Boundary traces of every source on the accessible arc of a
    reconstruction mesh, with the provenance needed to reproduce them.
    '''
    traces: List[List[float]] = pydantic.Field(..., description='Per-source values at the arc vertices')
    sigma_vertices: List[Annotated[int, Field(ge=0)]] = pydantic.Field(..., description='Arc vertex indices on the reconstruction mesh')
    sigma_points: List[Annotated[List[float], Field(min_length=2, max_length=2)]] = pydantic.Field(..., description='Arc vertex coordinates')
    sources: SourceSpec = pydantic.Field(SourceSpec(), description='Source definitions')
    arc: ArcSpec = pydantic.Field(ArcSpec(), description='Accessible boundary arc')
    eta: Annotated[float, Field(ge=0.0)] = pydantic.Field(0.0, description='Relative noise level')
    seed: Annotated[int, Field(ge=0)] = pydantic.Field(0, description='Noise generator seed')
    rng: str = pydantic.Field(pcc.RNG_ALGORITHM, description='Bit generator algorithm')
    interpolation_error: Optional[float] = pydantic.Field(None, description='Relative error of resolving the data trace on the reconstruction boundary')
    support_fraction: Optional[List[float]] = pydantic.Field(None, description='Per-source mass fraction outside the boundary band')
    config_hash: Optional[str] = pydantic.Field(None, description='Hash of the generating configuration')

    @pydantic.model_validator(mode='after')
    def validate_lengths(self):
        n = len(self.sigma_vertices)
        if len(self.sigma_points) != n:
            raise ValueError(f'{len(self.sigma_points)} arc points for {n} arc vertices')
        if len(self.traces) != self.sources.count:
            raise ValueError(f'{len(self.traces)} traces for {self.sources.count} sources')
        for i, t in enumerate(self.traces):
            if len(t) != n:
                raise ValueError(f'Trace {i} has {len(t)} values, expected {n}')
        return self

    @property
    def num_sources(self) -> int:
        return len(self.traces)

    @property
    def noise_free(self) -> bool:
        return self.eta == 0.0

    def trace_array(self) -> np.ndarray:
        return np.asarray(self.traces, dtype=float).reshape(self.num_sources, -1)

    def points_array(self) -> np.ndarray:
        return np.asarray(self.sigma_points, dtype=float).reshape(-1, 2)

    def source_functions(self) -> typing.List[GaussianSource]:
        return make_sources(self.sources)

    def on_mesh(self, mesh:Mesh) -> np.ndarray:
        '''Traces at the arc vertices of ``mesh``, shape (N, n_sigma).

        The stored traces are used directly on the mesh they were generated
        for, otherwise they are interpolated linearly in the polar angle.
        '''

        sigma = mesh.sigma_vertices(self.arc)
        points = mesh.vertices[sigma]
        stored = self.points_array()
        traces = self.trace_array()

        if sigma.shape[0] == stored.shape[0] and np.array_equal(sigma, np.asarray(self.sigma_vertices)) \
                and np.allclose(points, stored, rtol=0.0, atol=1.0e-12):
            return traces

        theta_src = vertex_angles(stored)
        theta_dst = vertex_angles(points)

        if self.arc.is_full:
            return np.vstack([np.interp(theta_dst, theta_src, t, period=2.0 * math.pi) for t in traces])

        shift_src = np.mod(theta_src - self.arc.start, 2.0 * math.pi)
        shift_dst = np.mod(theta_dst - self.arc.start, 2.0 * math.pi)
        order = np.argsort(shift_src, kind='stable')
        return np.vstack([np.interp(shift_dst, shift_src[order], t[order]) for t in traces])

#############
# Synthesis #
#############

def synthesize_measurements(cavity:CavitySpec, sources:SourceSpec, eta:float, seed:int, fine_h:float,
                            recon_mesh:Mesh, arc:typing.Optional[ArcSpec]=None,
                            newton:NewtonParams=NewtonParams()) -> MeasurementSet:
    '''Generate noisy boundary measurements of the cavity problem.

    The reference problem is solved on a mesh of the perforated domain at
    resolution ``fine_h``. The reconstruction mesh only provides the arc
    vertices the traces are interpolated onto. Noise is drawn from a single
    seeded stream in source order.

    Args:
        cavity (CavitySpec): True cavity
        sources (SourceSpec): Source definitions
        eta (float): Relative noise level
        seed (int): Noise generator seed
        fine_h (float): Element size of the data mesh. Must be smaller than the
            outer edge length of ``recon_mesh``.
        recon_mesh (Mesh): Reconstruction mesh
        arc (ArcSpec): Accessible boundary arc
        newton (NewtonParams): Newton settings of the reference solves

    Returns:
        MeasurementSet: Measurements on the arc vertices of ``recon_mesh``
    '''

    arc = ArcSpec() if arc is None else arc

    outer = recon_mesh.outer_edges
    boundary_h = float(np.mean(np.linalg.norm(recon_mesh.vertices[outer[:, 1]] - recon_mesh.vertices[outer[:, 0]], axis=1)))
    if fine_h >= boundary_h:
        raise ValueError(f'Data mesh size {fine_h} must be smaller than the reconstruction boundary resolution {boundary_h:.4g}')

    data_mesh = generate_cavity_mesh(recon_mesh.radius, cavity, fine_h)
    logger.info(f'Synthesizing {sources.count} measurements on data mesh with {data_mesh.nverts} vertices')

    sigma = recon_mesh.sigma_vertices(arc)
    lookup = np.full(recon_mesh.nverts, -1, dtype=np.int64)
    lookup[recon_mesh.outer_vertices] = np.arange(recon_mesh.outer_vertices.size)
    index = lookup[sigma]

    fine_outer = data_mesh.outer_vertices
    theta_fine = vertex_angles(data_mesh.vertices[fine_outer])
    theta_recon = vertex_angles(recon_mesh.vertices[recon_mesh.outer_vertices])

    rng = make_rng(seed)
    traces = []
    errors = []

    for i, f in enumerate(make_sources(sources)):
        u = solve_cavity_reference(data_mesh, f, newton)
        trace = boundary_trace_interpolate(data_mesh, u, recon_mesh)

        # Resolution loss of the reconstruction boundary
        fine = u.values[fine_outer]
        back = np.interp(theta_fine, theta_recon, trace, period=2.0 * math.pi)
        errors.append(np.linalg.norm(back - fine) / max(np.linalg.norm(fine), np.finfo(float).tiny))

        traces.append(add_noise(trace[index], eta, rng))
        logger.debug(f'Source {i}: {u.iterations} Newton iterations, trace range [{trace.min():.4g}, {trace.max():.4g}]')

    return MeasurementSet(
        traces=[t.tolist() for t in traces],
        sigma_vertices=sigma.tolist(),
        sigma_points=recon_mesh.vertices[sigma].tolist(),
        sources=sources,
        arc=arc,
        eta=eta,
        seed=seed,
        interpolation_error=float(max(errors)),
    )
