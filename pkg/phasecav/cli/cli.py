import logging
import click
from phasecav.__about__ import __version__

LOG_FORMAT = '%(levelname)s [%(filename)s:%(lineno)d:%(funcName)s] %(message)s'
"""Log record format, shared with pytest.ini.
"""

# Define top level command group
@click.group()
@click.version_option(version=__version__)
@click.option('-v', '--verbose', count=True, help='Increase log verbosity (-v info, -vv debug)')
def cli_group(verbose):
    level = logging.WARNING if verbose == 0 else (logging.INFO if verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT)


# Add Commands
from phasecav.cli.generate import generate_data
from phasecav.cli.reconstruct import reconstruct
from phasecav.cli.metrics import metrics
from phasecav.cli.sweep import sweep

cli_group.add_command(generate_data)
cli_group.add_command(reconstruct)
cli_group.add_command(metrics)
cli_group.add_command(sweep)

if __name__ == '__main__':
    cli_group()
