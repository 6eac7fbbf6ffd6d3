import logging
import sys

import click

from commands import register_commands
from utils.config_loading import init_cache, load_config
from utils.numerics import ToleranceConfig


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='Path to a JSON config file (default: application/config.json or $CAPBOUNDS_CONFIG).')
@click.option('--verbose', is_flag=True, help='Log at DEBUG level.')
@click.pass_context
def cli(ctx, config_path, verbose):
    """Capacity bounds for Gaussian channels under a (σ, ρ) power constraint."""
    config = load_config(config_path)

    # Configure logging
    level = logging.DEBUG if verbose else getattr(logging, str(config['log_level']).upper(), logging.INFO)
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s', stream=sys.stderr, force=True)

    # Fresh in-process cache for growth-rate results
    init_cache()

    ctx.obj = {'config': config, 'tol': ToleranceConfig.from_config(config)}


# Register commands
register_commands(cli)

# Run the CLI
if __name__ == '__main__':
    cli()
