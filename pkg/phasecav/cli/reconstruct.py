import json
import logging
import pathlib
import numpy as np
import click

from phasecav.utils import NumericalError
from phasecav.fem import NodalField
from phasecav.analysis import extract_contour, compute_metrics
from phasecav.continuation import run_continuation, load_checkpoint, phase_directory, CHECKPOINT_MESH, CHECKPOINT_FIELD
from phasecav.fileio import (
    read_measurements,
    read_mesh,
    read_field,
    write_mesh,
    write_field,
    write_vtk,
    write_contours,
    write_history,
)
from phasecav.cli.common import (
    config_options,
    load_config,
    prepare_output_dir,
    reconstruction_mesh,
    exit_codes,
    MEASUREMENT_FILE,
)

logger = logging.getLogger(__name__)

def _check_measurements(data, config):
    points = data.points_array()
    radii = np.linalg.norm(points, axis=1)
    if not np.allclose(radii, config.mesh.radius, rtol=1.0e-9, atol=0.0):
        raise ValueError(f'Measurement points do not lie on the boundary circle of radius {config.mesh.radius}')
    if data.arc != config.sigma_arc:
        raise ValueError(f'Measurement arc {data.arc} differs from the configured arc {config.sigma_arc}')
    if data.sources != config.sources:
        raise ValueError('Measurement sources differ from the configured sources')

def _export(v:NodalField, outdir:pathlib.Path, stem:str, chash:str):
    write_field(v, outdir / f'{stem}.csv', config_hash=chash)
    write_vtk(v, outdir / f'{stem}.vtk', config_hash=chash)
    write_contours(extract_contour(v, 0.5), outdir / f'{stem}_contour.csv', level=0.5, config_hash=chash)

@click.command(name='reconstruct')
@config_options
@click.option('--measurements', 'measurement_path', default=None, type=click.Path(dir_okay=False),
              help='Measurement file. Defaults to measurements.csv in the output directory.')
@click.option('--restart-from', default=None, type=click.Path(file_okay=False),
              help='Directory with phase checkpoints to resume from')
@click.option('--plot', is_flag=True, default=False, help='Write a PNG contour plot of the result')
def reconstruct(config_path, overwrite, measurement_path, restart_from, plot, **flags):
    '''Reconstruct the cavity from boundary measurements by continuation.'''

    with exit_codes():
        config = load_config(config_path, **flags)

        mpath = pathlib.Path(measurement_path) if measurement_path else pathlib.Path(config.output_dir) / MEASUREMENT_FILE
        if not mpath.is_file():
            raise FileNotFoundError(f'Measurement file {mpath} does not exist')

        data = read_measurements(mpath)
        _check_measurements(data, config)

        outdir = prepare_output_dir(config, overwrite)
        chash = config.config_hash()

        mesh = reconstruction_mesh(config)
        start_phase, v0 = 0, None
        if restart_from is not None:
            done, v0 = load_checkpoint(restart_from)
            start_phase = done + 1
            mesh = v0.mesh

        history, phases = [], []
        if start_phase < config.schedule.n_phases:
            try:
                result = run_continuation(config.schedule, data, mesh,
                                          phase_field=config.phase_field, fictitious=config.fictitious,
                                          step=config.step, newton=config.newton, scheme=config.scheme,
                                          snap_to_circle=config.mesh.snap_to_circle, v0=v0,
                                          start_phase=start_phase, checkpoint_dir=outdir, config_hash=chash)
            except NumericalError as error:
                write_history(getattr(error, 'history', []), outdir / 'history.csv', config_hash=chash)
                last = getattr(error, 'v', None)
                if isinstance(last, NodalField):
                    write_mesh(last.mesh, outdir / 'mesh_partial.txt', config_hash=chash)
                    write_field(last, outdir / 'v_partial.csv', config_hash=chash)
                raise
            v, history, phases = result.v, result.history, result.phases
        else:
            logger.info(f'All {config.schedule.n_phases} phases already completed in {restart_from}')
            v = v0

        for summary in phases:
            path = phase_directory(outdir, summary.phase)
            pv = read_field(path / CHECKPOINT_FIELD, read_mesh(path / CHECKPOINT_MESH))
            write_vtk(pv, path / 'v.vtk', config_hash=chash)
            write_contours(extract_contour(pv, 0.5), path / 'contour.csv', level=0.5, config_hash=chash)

        write_mesh(v.mesh, outdir / 'mesh_final.txt', config_hash=chash)
        _export(v, outdir, 'v_final', chash)
        write_history(history, outdir / 'history.csv', config_hash=chash)
        with open(outdir / 'phases.json', 'w') as fp:
            json.dump({'config_hash': chash, 'phases': [p.model_dump(mode='json') for p in phases]}, fp, indent=2, sort_keys=True)

        eps_final = config.schedule.phase_parameters(config.schedule.n_phases - 1)[0]
        metrics = compute_metrics(v, config.cavity, eta_diag=config.eta_diag, epsilon=eps_final)
        with open(outdir / 'metrics.json', 'w') as fp:
            json.dump({'config_hash': chash, **metrics.model_dump(mode='json')}, fp, indent=2, sort_keys=True)

        if plot:
            from phasecav.plotting import plot_reconstruction
            plot_reconstruction(v, outdir / 'reconstruction.png', truth=config.cavity,
                                title=f'eps={eps_final:.4g}, alpha={config.schedule.alpha:.1e}')

        click.echo(f'Reconstruction written to {outdir}: symmetric difference ratio {metrics.symdiff_ratio:.4f}, '
                   f'Hausdorff distance {metrics.hausdorff:.4f}')
