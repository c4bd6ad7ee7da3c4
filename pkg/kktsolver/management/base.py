"""
Shared plumbing for the solver management commands.

Exit codes:
    0   success
    1   configuration or dimension error (nothing is written)
    2   solver did not converge / spectrum outside the expected interval
"""

import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from kktsolver.config import RunConfig, load_run_config
from kktsolver.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    DimensionTooLargeError,
    InvalidDimensionError,
    KKTSolverError,
    MeshOverflowError,
)

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2

CONFIG_ERRORS = (
    ConfigurationError,
    InvalidDimensionError,
    MeshOverflowError,
    DimensionMismatchError,
    DimensionTooLargeError,
)


class KKTCommand(BaseCommand):
    """Base class adding --config / --out-dir / --export-mm and error mapping"""

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            required=True,
            help='Path to the JSON run configuration',
        )
        parser.add_argument(
            '--out-dir',
            type=str,
            help='Output directory (overrides output.dir and KKT_OUTPUT_DIR)',
        )
        parser.add_argument(
            '--export-mm',
            action='store_true',
            help='Write the saddle system blocks in Matrix Market format',
        )

    def load_config(self, options) -> RunConfig:
        try:
            return load_run_config(options['config'])
        except ConfigurationError as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc

    def output_dir(self, options, config: RunConfig) -> Path:
        if options.get('out_dir'):
            return Path(options['out_dir'])
        if config.output.dir:
            return Path(config.output.dir)
        return Path(getattr(settings, 'KKT_OUTPUT_DIR', 'results'))

    def export_requested(self, options, config: RunConfig) -> bool:
        return bool(options.get('export_mm')) or config.output.export_mm

    def fail(self, exc: KKTSolverError):
        """Translate a solver exception into a CommandError with the documented exit code."""
        code = EXIT_CONFIG if isinstance(exc, CONFIG_ERRORS) else EXIT_NOT_CONVERGED
        logger.error(f"{type(exc).__name__}: {exc}")
        raise CommandError(f"{type(exc).__name__}: {exc}", returncode=code) from exc
