import argparse
import logging
from dataclasses import replace

from django.core.management.base import BaseCommand, CommandError

from evaluation.dpcheck import empirical_dp_check
from evaluation.fixtures import TINY_FIXTURES, tiny_fixture
from evaluation.harness import MECHANISM_APTB, MECHANISMS
from runs.cli import (
    EXIT_DPCHECK,
    add_config_arguments,
    add_universe_arguments,
    config_error,
    config_from_options,
    load_dataset,
    universe_from_options,
)
from runs.manifest import AtomicOutputs
from trajectories.exceptions import PreconditionError

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = (
        "Run a mechanism many times on a tiny dataset and on the same dataset minus one "
        "trajectory, and compare the published-output frequencies against e^eps."
    )

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--fixture", choices=sorted(TINY_FIXTURES), help="bundled tiny dataset")
        source.add_argument("--in", dest="input", help="tiny dataset file")
        parser.add_argument("--remove", type=int, default=0, help="index of the trajectory left out of D' (with --in)")
        parser.add_argument("--trials", type=int, default=100_000, help="runs per input")
        parser.add_argument("--mechanism", choices=MECHANISMS, default=MECHANISM_APTB)
        parser.add_argument("--workers", type=int, default=1)
        parser.add_argument("--out", help="report file (default: stdout)")
        # unledgered boost of the count budget; the check must fail with it
        parser.add_argument("--inject-fault", type=float, dest="inject_fault", help=argparse.SUPPRESS)
        add_config_arguments(parser)
        add_universe_arguments(parser)

    def handle(self, *args, **options):
        if options.get("fixture"):
            d, removed = tiny_fixture(options["fixture"])
        else:
            d = load_dataset(options["input"], universe_from_options(options))
            removed = options["remove"]

        cfg = config_from_options(options, h_user=d.universe.time_slots)
        if options.get("inject_fault"):
            try:
                cfg = replace(cfg, unaccounted_eps_factor=options["inject_fault"])
            except PreconditionError as exc:
                raise config_error(str(exc))
            logger.warning("fault injection: count noise uses %gx the ledgered budget", options["inject_fault"])

        try:
            report = empirical_dp_check(d, removed, cfg, options["trials"],
                                        mechanism=options["mechanism"], workers=options["workers"])
        except PreconditionError as exc:
            raise config_error(str(exc))

        text = report.as_text()
        if options.get("out"):
            with AtomicOutputs() as outputs:
                outputs.stage(options["out"], text)
                outputs.commit()
        else:
            self.stdout.write(text, ending="")

        if not report.passed:
            raise CommandError(
                f"empirical DP check failed: max ratio {report.max_observed_ratio:.4g} "
                f"exceeds e^{cfg.total_eps:g} beyond the sampling slack",
                returncode=EXIT_DPCHECK,
            )
