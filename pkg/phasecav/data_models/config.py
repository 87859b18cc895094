"""The config module provides the run configuration aggregating every parameter
group of a synthetic-data generation or reconstruction run.
"""

import json
import logging
import pathlib
import typing
import pydantic

from pydantic import Field
from typing_extensions import Annotated

import phasecav.constants as pcc
from phasecav.utils import stable_hash
from .geometry import CavitySpec, DiskComponent
from .parameters import (
    NewtonParams,
    FictitiousParams,
    PhaseFieldParams,
    StepController,
    Schedule,
    SourceSpec,
    ArcSpec,
    MeshSettings,
    Scheme,
)

logger = logging.getLogger(__name__)

def _default_cavity():
    return CavitySpec(components=[DiskComponent(center=[0.0, 0.0], radius=0.3)])

class RunConfig(pydantic.BaseModel):
    '''Complete configuration of a run. Loaded from a JSON file, overridden
    by command line flags, and validated as a whole before any computation.
    '''
    mesh: MeshSettings = pydantic.Field(MeshSettings(), description='Mesh resolution settings')
    sources: SourceSpec = pydantic.Field(SourceSpec(), description='Source definitions')
    cavity: CavitySpec = pydantic.Field(default_factory=_default_cavity, description='True cavity used for synthetic data')
    noise: Annotated[float, Field(ge=0.0)] = pydantic.Field(pcc.NOISE_LEVEL, description='Relative noise level eta_noise')
    seed: Annotated[int, Field(ge=0, lt=2**64)] = pydantic.Field(0, description='Seed of the noise generator')
    sigma_arc: ArcSpec = pydantic.Field(ArcSpec(), description='Accessible boundary arc')
    schedule: Schedule = pydantic.Field(Schedule(), description='Continuation schedule')
    step: StepController = pydantic.Field(StepController(), description='Step length controller')
    phase_field: PhaseFieldParams = pydantic.Field(PhaseFieldParams(), description='Potential and normalization. Epsilon and alpha are set per phase by the schedule.')
    fictitious: FictitiousParams = pydantic.Field(FictitiousParams(), description='Fictitious material and pinned band. Delta is set per phase by the schedule.')
    newton: NewtonParams = pydantic.Field(NewtonParams(), description='Forward solver settings')
    scheme: Scheme = pydantic.Field(Scheme.SEMI_IMPLICIT, description='Minimizing-movement update')
    eta_diag: Annotated[float, Field(gt=0.0, lt=0.5)] = pydantic.Field(0.1, description='Threshold of the diffuse interface diagnostic')
    output_dir: str = pydantic.Field('output', description='Output directory')

    @pydantic.model_validator(mode='after')
    def validate_geometry(self):
        self.cavity.validate_in_domain(self.mesh.radius)

        if self.fictitious.d0_band >= self.mesh.radius:
            raise ValueError(f'd0_band={self.fictitious.d0_band} must be smaller than the domain radius {self.mesh.radius}')

        # The phase field is pinned to 1 on |x| >= R - d0_band
        for idx, comp in enumerate(self.cavity.components):
            gap = self.mesh.radius - comp.max_norm()
            if gap < self.fictitious.d0_band:
                raise ValueError(f'Cavity component {idx} is {gap:.4g} from the outer boundary and overlaps '
                                 f'the pinned band d0_band={self.fictitious.d0_band}')

        if self.sources.ring_radius >= self.mesh.radius:
            raise ValueError(f'Source ring radius {self.sources.ring_radius} must be smaller than the domain radius {self.mesh.radius}')

        return self

    @classmethod
    def load(cls, filepath:typing.Union[str, pathlib.Path]):
        '''Load a configuration from a JSON file.

        Args:
            filepath (str): Path to JSON configuration file

        Returns:
            RunConfig: Validated configuration
        '''

        with open(filepath, 'r') as fp:
            data = json.load(fp)

        logger.debug(f'Loaded configuration from {filepath}')

        return cls.model_validate(data)

    def with_overrides(self, **flags):
        '''Return a new configuration with command line overrides applied and
        revalidated. Flags with value ``None`` are ignored.

        Supported flags: ``output_dir``, ``seed``, ``noise``, ``alpha``,
        ``epsilon0``, ``delta0``, ``phases``, ``mesh_h``, ``sigma_arc``.
        '''

        data = self.model_dump(mode='json')

        targets = {
            'output_dir': ('output_dir',),
            'seed': ('seed',),
            'noise': ('noise',),
            'alpha': ('schedule', 'alpha'),
            'epsilon0': ('schedule', 'epsilon0'),
            'delta0': ('schedule', 'delta0'),
            'phases': ('schedule', 'n_phases'),
            'mesh_h': ('mesh', 'recon_h'),
        }

        for key, value in flags.items():
            if value is None:
                continue

            if key == 'sigma_arc':
                data['sigma_arc'] = ArcSpec.parse(value).model_dump(mode='json')
            elif key in targets:
                path = targets[key]
                node = data
                for p in path[:-1]:
                    node = node[p]
                node[path[-1]] = value
            else:
                raise ValueError(f'Unknown configuration override "{key}"')

        return RunConfig.model_validate(data)

    def config_hash(self) -> str:
        '''Hash of the configuration, independent of the output directory.
        '''
        return stable_hash(self.model_dump(mode='json', exclude={'output_dir'}))

    def save(self, filepath:typing.Union[str, pathlib.Path]):
        with open(filepath, 'w') as fp:
            json.dump(self.model_dump(mode='json'), fp, indent=2, sort_keys=True)
