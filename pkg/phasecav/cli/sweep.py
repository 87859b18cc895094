import logging
import pathlib
import click

from phasecav.utils import NumericalError
from phasecav.analysis import compute_metrics
from phasecav.continuation import initial_phase_field
from phasecav.optimizer import run_phase
from phasecav.fileio import read_measurements, FLOAT_FORMAT
from phasecav.measurements import synthesize_measurements
from phasecav.cli.common import (
    config_options,
    load_config,
    prepare_output_dir,
    reconstruction_mesh,
    exit_codes,
    MEASUREMENT_FILE,
)

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ('param', 'value', 'J', 'misfit', 'reg', 'iterations', 'symdiff_ratio', 'hausdorff', 'band_fraction', 'status')

def _parse_values(text:str):
    try:
        values = [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise ValueError(f'Sweep values must be a comma separated list of numbers, got "{text}"')
    if not values:
        raise ValueError('Sweep needs at least one value')
    return values

@click.command(name='sweep')
@config_options
@click.option('--param', required=True, type=click.Choice(['epsilon', 'delta', 'alpha', 'noise'], case_sensitive=False),
              help='Parameter to vary')
@click.option('--values', 'values_text', required=True, type=str, help='Comma separated parameter values')
@click.option('--measurements', 'measurement_path', default=None, type=click.Path(dir_okay=False),
              help='Measurement file for epsilon, delta and alpha sweeps. Synthesized from the config when omitted.')
def sweep(config_path, overwrite, param, values_text, measurement_path, **flags):
    '''Single-phase reconstructions over a list of values of one parameter.'''

    with exit_codes():
        config = load_config(config_path, **flags)
        values = _parse_values(values_text)
        param = param.lower()

        mesh = reconstruction_mesh(config)
        eps0, delta0, alpha0 = config.schedule.phase_parameters(0)

        base_data = None
        if param != 'noise':
            if measurement_path is not None:
                if not pathlib.Path(measurement_path).is_file():
                    raise FileNotFoundError(f'Measurement file {measurement_path} does not exist')
                base_data = read_measurements(measurement_path)
            else:
                default = pathlib.Path(config.output_dir) / MEASUREMENT_FILE
                base_data = read_measurements(default) if default.is_file() else \
                    synthesize_measurements(config.cavity, config.sources, config.noise, config.seed,
                                            config.mesh.fine_h, mesh, arc=config.sigma_arc, newton=config.newton)

        outdir = prepare_output_dir(config, overwrite)
        rows = []

        for value in values:
            eps, delta, alpha, eta = eps0, delta0, alpha0, config.noise
            if param == 'epsilon':
                eps = value
            elif param == 'delta':
                delta = value
            elif param == 'alpha':
                alpha = value
            else:
                eta = value

            params = config.phase_field.model_validate({**config.phase_field.model_dump(), 'epsilon': eps, 'alpha': alpha})
            fict = config.fictitious.model_validate({**config.fictitious.model_dump(), 'delta': delta})

            data = base_data
            if data is None:
                data = synthesize_measurements(config.cavity, config.sources, eta, config.seed,
                                               config.mesh.fine_h, mesh, arc=config.sigma_arc, newton=config.newton)

            v0 = initial_phase_field(mesh, fict.d0_band)
            logger.info(f'Sweep {param}={value:g}')

            try:
                result = run_phase(v0, data, params, fict, ctrl=config.step, stop=config.schedule.stopping,
                                   newton=config.newton, scheme=config.scheme, snap_to_circle=config.mesh.snap_to_circle)
            except NumericalError as error:
                logger.warning(f'Sweep {param}={value:g} failed: {error}')
                rows.append((param, value) + (float('nan'),) * 3 + (0,) + (float('nan'),) * 3 + (type(error).__name__,))
                continue

            report = compute_metrics(result.v, config.cavity, eta_diag=config.eta_diag, epsilon=eps)
            ev = result.evaluation
            rows.append((param, value, ev.total, ev.misfit, ev.regularizer, result.iterations,
                         report.symdiff_ratio, report.hausdorff, report.band_fraction, 'ok'))

        with open(outdir / 'sweep.csv', 'w') as fp:
            fp.write(f'# config_hash: {config.config_hash()}\n')
            fp.write(','.join(SWEEP_COLUMNS) + '\n')
            for row in rows:
                fields = [format(x, FLOAT_FORMAT) if isinstance(x, float) else str(x) for x in row]
                fp.write(','.join(fields) + '\n')

        click.echo(f'Wrote {len(rows)} sweep results to {outdir / "sweep.csv"}')
