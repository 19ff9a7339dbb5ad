import os
import sys
import logging
import argparse

import config.settings as settings
from src.errors import ConfigError, SimulationError
from src.parallel import ExecutionOptions
from src.runner import decompose_cmd, noise_cmd, run_scenario
from src.scenario import load_noise_config, load_scenario
from src.scene import describe_objects
from src.writer import ResultWriter

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_IO = 4


def setup_logging(verbose=False, quiet=False, log_file=None):
    """
    Configure logging for the application.

    Args:
        verbose: If True, set console log level to DEBUG
        quiet: If True, only warnings and errors reach the console
        log_file: Custom log file path (default: from settings)
    """
    if verbose:
        log_level = logging.DEBUG
    elif quiet:
        log_level = logging.WARNING
    else:
        log_level = getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    log_path = log_file or settings.LOG_FILE
    os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)

    formatter = logging.Formatter(
        settings.LOG_FORMAT,
        datefmt=settings.LOG_DATE_FORMAT
    )

    # Console handler
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)

    # File handler
    file_handler = logging.FileHandler(log_path, encoding='utf-8')
    file_handler.setLevel(logging.DEBUG)  # Always log everything to file
    file_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    # repeated calls (tests, library use) must not stack handlers
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()
    root_logger.addHandler(console_handler)
    root_logger.addHandler(file_handler)

    return logging.getLogger(__name__)


def parse_arguments(argv=None):
    """Parse command-line arguments."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', type=str, default=None,
                        help=f'Output directory (env GHOSTSIM_OUT, default: {settings.OUTPUT_DIR})')
    common.add_argument('--seed', type=int, default=None,
                        help=f'Random seed (env GHOSTSIM_SEED, default: scenario seed or {settings.SEED})')
    common.add_argument('--threads', type=int, default=None,
                        help=f'Worker threads (env GHOSTSIM_THREADS, default: {settings.THREADS})')
    common.add_argument('--quiet', action='store_true', help='Only warnings and errors on the console (env GHOSTSIM_QUIET)')
    common.add_argument('--verbose', action='store_true', help='Enable verbose (DEBUG level) logging')
    common.add_argument('--log-file', type=str, default=None,
                        help=f'Custom log file path (default: {settings.LOG_FILE})')

    parser = argparse.ArgumentParser(
        description='Simulate odd-order aberration cancellation in correlated-photon ghost imaging.',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run every engine of the demo scenario
  python main.py run config/demo.yaml

  # Split an aberration into its even and odd parts
  python main.py decompose config/decompose.yaml --out ./decomposed

  # Dark-current cancellation report on 8 threads
  python main.py noise config/noise.yaml --threads 8

  # Show the built-in objects
  python main.py objects list
        """
    )
    commands = parser.add_subparsers(dest='command', required=True)
    for name, text in (('run', 'Render the configured engines and write images and metrics'),
                       ('decompose', 'Write the even and odd parts of the configured aberration'),
                       ('noise', 'Write the dark-current cancellation report')):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument('config', type=str, help='Scenario file (YAML)')
    objects = commands.add_parser('objects', parents=[common], help='Standard objects')
    objects.add_argument('action', choices=['list'])

    return parser.parse_args(argv)


def resolve(cli_value, env_name, scenario_value, default, kind=str):
    """CLI flag > environment > scenario file > settings default."""
    if cli_value is not None:
        return cli_value
    env_value = os.getenv(env_name)
    if env_value is not None and env_value != '':
        try:
            return kind(env_value)
        except ValueError:
            raise ConfigError(f"{env_name} must be {kind.__name__}, got '{env_value}'") from None
    if scenario_value is not None:
        return scenario_value
    return default


def main(argv=None):
    """Main application entry point."""
    args = parse_arguments(argv)

    if args.command == 'objects':
        for line in describe_objects():
            print(line)
        return EXIT_OK

    quiet = args.quiet or os.getenv('GHOSTSIM_QUIET', '0').lower() in ('1', 'true', 'yes')
    logger = setup_logging(verbose=args.verbose, quiet=quiet, log_file=args.log_file)
    logger.info("=" * 60)
    logger.info(f"Ghost imaging simulator - {args.command} {args.config}")
    logger.info("=" * 60)

    try:
        logger.debug("Validating configuration...")
        settings.validate_config()

        threads = resolve(args.threads, 'GHOSTSIM_THREADS', None, settings.THREADS, int)
        if threads < 1:
            raise ConfigError(f"threads must be at least 1, got {threads}")
        options = ExecutionOptions(threads=threads, progress=not quiet)

        if args.command == 'noise':
            config = load_noise_config(args.config)
        else:
            config = load_scenario(args.config)
        seed = resolve(args.seed, 'GHOSTSIM_SEED', config.seed, settings.SEED, int)
        output_dir = os.path.abspath(resolve(args.out, 'GHOSTSIM_OUT', config.output, settings.OUTPUT_DIR))
        logger.info(f"Output directory: {output_dir} (seed {seed}, {threads} thread(s))")
        writer = ResultWriter(output_dir)

        if args.command == 'run':
            summary = run_scenario(config, writer, options, seed)
            for warning in summary.warnings:
                logger.warning(warning)
        elif args.command == 'decompose':
            report = decompose_cmd(config, writer)
            logger.info(f"Reconstruction error: {report['reconstruction_error']:.3g}")
        else:
            noise_cmd(config, writer, options, seed)

        logger.info("=" * 60)
        logger.info("Completed Successfully")
        logger.info("=" * 60)
        return EXIT_OK

    except KeyboardInterrupt:
        logger.warning("\nProcess interrupted by user")
        return EXIT_FAILURE
    except SimulationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except ValueError as e:
        logger.error(f"Configuration error: {e}")
        return ConfigError.exit_code
    except Exception as e:
        logger.exception(f"Unexpected error occurred: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
