# apps/core/commands.py
"""
Base class for the compressive MBN management commands.
"""

import logging
import sys
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from .exceptions import ArgumentError, CompressiveMbnError
from .recovery import ErrorRecoveryManager

logger = logging.getLogger('compressive_mbn')

USAGE_EXIT_CODE = 1


class PipelineCommand(BaseCommand):
    """
    Adds the common flags (--config, --seed, --out-dir, --threads,
    --long-run) and turns library errors into exit codes:
    0 success, 1 usage error, 2 data/format error, 3 numeric divergence.

    Subclasses implement add_command_arguments() and run().
    """

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        default_error = parser.error

        def usage_error(message):
            # argparse exits with 2 on bad flags, which would read as a data error
            if parser.called_from_command_line:
                parser.print_usage(sys.stderr)
                parser.exit(USAGE_EXIT_CODE, f"{parser.prog}: error: {message}\n")
            default_error(message)

        parser.error = usage_error
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='JSON config file merged over the preset')
        parser.add_argument('--seed', type=int, help='Run seed (default: config file or 0)')
        parser.add_argument('--out-dir', type=str, default='.', help='Directory for models, CSV and reports')
        parser.add_argument(
            '--threads', type=int,
            help='Worker threads for MBN and k-means; also caps BLAS threads while timing',
        )
        parser.add_argument(
            '--long-run',
            action='store_true',
            help='Use the full-scale preset instead of the desk-scale one',
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except CompressiveMbnError as exc:
            lines = ErrorRecoveryManager.format_for_console(exc)
            for line in lines[1:]:
                self.stderr.write(line)
            logger.error(lines[0])
            raise CommandError(lines[0], returncode=ErrorRecoveryManager.exit_code_for(exc)) from exc

    def run(self, **options):
        raise NotImplementedError('subclasses of PipelineCommand must provide a run() method')

    def out_path(self, options, name):
        """Path of an output file inside --out-dir, creating the directory"""
        out_dir = Path(options['out_dir'])
        out_dir.mkdir(parents=True, exist_ok=True)
        return out_dir / name

    def require(self, options, *names):
        """Usage error unless every named option was given"""
        missing = [f"--{name.replace('_', '-')}" for name in names if not options.get(name)]
        if missing:
            raise ArgumentError(f"Missing required option(s): {', '.join(missing)}")

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
