"""Shared options, configuration loading, output directory handling and
exit code mapping of the command line interface.
"""

import json
import logging
import pathlib
import sys
import contextlib
import typing
import click

import phasecav.constants as pcc
from phasecav.utils import NumericalError
from phasecav.mesh import Mesh, generate_disk_mesh
from phasecav.data_models.config import RunConfig

logger = logging.getLogger(__name__)

RUN_FILE = 'run.json'
"""Configuration record of an output directory.
"""

MEASUREMENT_FILE = 'measurements.csv'
PROVENANCE_FILE = 'provenance.json'

###########
# Options #
###########

def config_options(func):
    '''Options mirroring the RunConfig override paths.
    '''
    options = [
        click.option('--config', 'config_path', default=None, type=click.Path(exists=True, dir_okay=False),
                     help='JSON configuration file'),
        click.option('--output-dir', default=None, type=click.Path(file_okay=False), help='Output directory'),
        click.option('--seed', default=None, type=int, help='Seed of the noise generator'),
        click.option('--noise', default=None, type=float, help='Relative noise level'),
        click.option('--alpha', default=None, type=float, help='Regularization weight'),
        click.option('--epsilon0', default=None, type=float, help='Initial interface width'),
        click.option('--delta0', default=None, type=float, help='Initial fictitious conductivity'),
        click.option('--phases', default=None, type=int, help='Number of continuation phases'),
        click.option('--mesh-h', default=None, type=float, help='Reconstruction mesh size'),
        click.option('--sigma-arc', default=None, type=str, help='Accessible boundary arc "a,b" in radians'),
        click.option('--overwrite', is_flag=True, default=False, help='Replace outputs of a different configuration'),
    ]
    for option in reversed(options):
        func = option(func)
    return func

def load_config(config_path:typing.Optional[str]=None, **flags) -> RunConfig:
    '''Load the configuration file (or defaults) and apply flag overrides.
    '''
    config = RunConfig.load(config_path) if config_path else RunConfig()
    return config.with_overrides(**flags)

def prepare_output_dir(config:RunConfig, overwrite:bool=False) -> pathlib.Path:
    '''Create the output directory and record the configuration in it.

    Raises:
        ValueError: If the directory holds outputs of a configuration with a
            different hash and ``overwrite`` is not set.
    '''
    path = pathlib.Path(config.output_dir)
    run_file = path / RUN_FILE

    if run_file.is_file() and not overwrite:
        with open(run_file) as fp:
            existing = json.load(fp).get('config_hash')
        if existing != config.config_hash():
            raise ValueError(f'Output directory {path} contains results of a different configuration '
                             f'(hash {existing}). Use --overwrite or choose another --output-dir.')

    path.mkdir(parents=True, exist_ok=True)
    with open(run_file, 'w') as fp:
        json.dump({'config_hash': config.config_hash(), 'config': config.model_dump(mode='json')}, fp, indent=2, sort_keys=True)

    return path

def reconstruction_mesh(config:RunConfig) -> Mesh:
    return generate_disk_mesh(config.mesh.radius, config.mesh.recon_h, config.schedule.stopping.max_vertices)

##########
# Errors #
##########

@contextlib.contextmanager
def exit_codes():
    '''Map exceptions raised by a command to the package exit codes.
    '''
    try:
        yield
    except click.exceptions.Exit:
        raise
    except click.ClickException:
        raise
    except NumericalError as error:
        logger.error(f'Numerical failure: {error}')
        sys.exit(pcc.EXIT_NUMERICAL)
    except ValueError as error:
        logger.error(f'Invalid input: {error}')
        sys.exit(pcc.EXIT_VALIDATION)
    except OSError as error:
        logger.error(f'I/O failure: {error}')
        sys.exit(pcc.EXIT_IO)
