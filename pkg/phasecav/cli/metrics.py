import json
import logging
import pathlib
import click

from phasecav.analysis import compute_metrics
from phasecav.fileio import read_mesh, read_field
from phasecav.data_models.config import RunConfig
from phasecav.data_models.geometry import CavitySpec
from phasecav.cli.common import exit_codes, PROVENANCE_FILE

logger = logging.getLogger(__name__)

def _load_truth(path:pathlib.Path) -> CavitySpec:
    '''True cavity from a provenance file or a run configuration.
    '''
    with open(path) as fp:
        payload = json.load(fp)
    if 'cavity' in payload:
        return CavitySpec.model_validate(payload['cavity'])
    if 'config' in payload:
        return RunConfig.model_validate(payload['config']).cavity
    raise ValueError(f'{path} contains no cavity description')

@click.command(name='metrics')
@click.option('--mesh', 'mesh_path', required=True, type=click.Path(dir_okay=False), help='Mesh file of the field')
@click.option('--field', 'field_path', required=True, type=click.Path(dir_okay=False), help='Phase field CSV')
@click.option('--truth', 'truth_path', required=True, type=click.Path(dir_okay=False),
              help=f'Provenance ({PROVENANCE_FILE}) or run.json with the true cavity')
@click.option('--eta-diag', default=0.1, type=float, help='Threshold of the diffuse interface band')
@click.option('--epsilon', default=None, type=float, help='Interface width for the band ratio')
@click.option('--output', default=None, type=click.Path(dir_okay=False), help='Write the report as JSON')
def metrics(mesh_path, field_path, truth_path, eta_diag, epsilon, output):
    '''Compare a reconstructed phase field with the true cavity.'''

    with exit_codes():
        mesh = read_mesh(mesh_path)
        v = read_field(field_path, mesh)
        truth = _load_truth(pathlib.Path(truth_path))

        report = compute_metrics(v, truth, eta_diag=eta_diag, epsilon=epsilon)

        text = json.dumps(report.model_dump(mode='json'), indent=2, sort_keys=True)
        if output is not None:
            with open(output, 'w') as fp:
                fp.write(text + '\n')
        click.echo(text)
