from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from eioregression.config import FLAG_TARGETS, parse_config
from eioregression.estimators import Estimator
from eioregression.exceptions import ConfigParseError
from eioregression.services import Command as Subcommand
from eioregression.services import run_command


def add_common_arguments(parser):
    parser.add_argument("--config", help="JSON run configuration or a previous run manifest.")
    parser.add_argument("--seed", type=int, help="Root seed of every random stream.")
    parser.add_argument("--out", help="Output directory (falls back to EIO_OUT_DIR).")
    parser.add_argument("--workers", type=int, help="Worker processes for replicate loops.")
    parser.add_argument("--full-scale", action="store_true", help="Use d = 200 unless --d is given; the grids default to full size either way.")
    parser.add_argument("--d", type=int, help="Ambient dimension.")
    parser.add_argument("--n", type=int, help="Sample size for fit and grid-search.")
    parser.add_argument("--mu", help='Operator penalty; "inf" selects the plug-in estimator.')
    parser.add_argument("--lambda", type=float, help="Penalty on theta.")
    parser.add_argument("--tau", type=float, help="Ridge penalty.")
    parser.add_argument("--replicates", type=int, help="Monte-Carlo repetitions.")


class Command(BaseCommand):
    help = "Run error-in-operator regression experiments and write CSV results with a manifest."

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", required=True)
        for subcommand in Subcommand:
            sub = subparsers.add_parser(subcommand.value)
            add_common_arguments(sub)
            if subcommand is Subcommand.GRID_SEARCH:
                sub.add_argument("--estimator", choices=[e.value for e in Estimator])

    def handle(self, *args, **options):
        subcommand = Subcommand(options["subcommand"])
        flags = {flag: options.get(flag) for flag in FLAG_TARGETS}
        flags["full_scale"] = options.get("full_scale", False)

        try:
            cfg = parse_config(options.get("config"), flags)
        except ConfigParseError as exc:
            raise CommandError(f"{subcommand.value}: cannot parse config: {exc}", returncode=1)
        except ValidationError as exc:
            raise CommandError(f"{subcommand.value}: invalid config: {exc.detail}", returncode=1)
        except ValueError as exc:
            raise CommandError(f"{subcommand.value}: invalid config: {exc}", returncode=1)
        except OSError as exc:
            raise CommandError(f"{subcommand.value}: cannot read config: {exc}", returncode=1)

        code = run_command(subcommand, cfg, on_success=self.report)
        if code:
            raise CommandError(f"{subcommand.value} failed; see the log for the cause", returncode=code)

    def report(self, result):
        for path in result.outputs:
            self.stdout.write(f"wrote {path}")
        self.stdout.write(self.style.SUCCESS(f"{result.command.value}: {result.rows} rows, manifest {result.manifest}"))
