import json
import logging
import click

from phasecav.fileio import write_measurements, write_mesh
from phasecav.measurements import synthesize_measurements, source_support_fraction
from phasecav.cli.common import (
    config_options,
    load_config,
    prepare_output_dir,
    reconstruction_mesh,
    exit_codes,
    MEASUREMENT_FILE,
    PROVENANCE_FILE,
)

logger = logging.getLogger(__name__)

@click.command(name='generate-data')
@config_options
def generate_data(config_path, overwrite, **flags):
    '''Synthesize noisy boundary measurements of the configured cavity.'''

    with exit_codes():
        config = load_config(config_path, **flags)
        outdir = prepare_output_dir(config, overwrite)
        chash = config.config_hash()

        mesh = reconstruction_mesh(config)
        logger.info(f'Reconstruction mesh: {mesh.nverts} vertices, {mesh.ntris} triangles')

        data = synthesize_measurements(config.cavity, config.sources, config.noise, config.seed,
                                       config.mesh.fine_h, mesh, arc=config.sigma_arc, newton=config.newton)
        support = source_support_fraction(config.sources, config.mesh.radius, config.fictitious.d0_band)
        data = data.model_copy(update={'support_fraction': support, 'config_hash': chash})

        write_measurements(data, outdir / MEASUREMENT_FILE, config_hash=chash)
        write_mesh(mesh, outdir / 'recon_mesh.txt', config_hash=chash)

        provenance = {
            'config_hash': chash,
            'cavity': config.cavity.model_dump(mode='json'),
            'mesh': config.mesh.model_dump(mode='json'),
            'recon_nverts': mesh.nverts,
            'data_mesh_h': config.mesh.fine_h,
            'seed': config.seed,
            'rng': data.rng,
            'eta': data.eta,
            'noise_free': data.noise_free,
            'sigma': data.arc.model_dump(mode='json'),
            'interpolation_error': data.interpolation_error,
            'support_fraction': support,
        }
        with open(outdir / PROVENANCE_FILE, 'w') as fp:
            json.dump(provenance, fp, indent=2, sort_keys=True)

        click.echo(f'Wrote {data.num_sources} measurements to {outdir / MEASUREMENT_FILE}')
