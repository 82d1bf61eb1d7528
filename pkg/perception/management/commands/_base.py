"""
Shared plumbing for the pipeline management commands: config loading and
mapping of pipeline errors to process exit codes.
"""
import logging
import sys

from django.core.management.base import BaseCommand, CommandError

from perception.config import load_config
from perception.exceptions import ConfigError, GraspPipelineError

logger = logging.getLogger('perception.commands')

USAGE_EXIT_CODE = ConfigError.exit_code


def parse_overrides(pairs):
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition('=')
        if not sep or not key.strip():
            raise ConfigError(f'override must look like key=value, got {pair!r}')
        overrides[key.strip()] = value.strip()
    return overrides


def _usage_error(parser, message):
    """argparse exits with 2 on bad usage; usage errors share the config exit code"""
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        parser.exit(USAGE_EXIT_CODE, f'{parser.prog}: error: {message}\n')
    raise CommandError(f'Error: {message}', returncode=USAGE_EXIT_CODE)


class PipelineCommand(BaseCommand):
    """Subclasses implement `run(config, **options)` instead of `handle`"""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = lambda message: _usage_error(parser, message)
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', help='flat key = value config file')
        parser.add_argument(
            '--set', action='append', dest='overrides', metavar='KEY=VALUE',
            help='override one config key (repeatable)',
        )

    def config_overrides(self, options):
        """Extra overrides derived from command-specific options"""
        return {}

    def handle(self, *args, **options):
        config_path = options.pop('config', None)
        try:
            overrides = parse_overrides(options.get('overrides'))
            overrides.update(self.config_overrides(options))
            config = load_config(config_path, overrides)
            logger.debug('%s config: %s', self.__module__.rsplit('.', 1)[-1], config.as_dict())
            return self.run(config, **options)
        except GraspPipelineError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        except FloatingPointError as exc:
            raise CommandError(f'numeric failure: {exc}', returncode=3) from exc
        except OSError as exc:
            raise CommandError(f'I/O failure: {exc}', returncode=2) from exc

    def run(self, config, **options):
        raise NotImplementedError
