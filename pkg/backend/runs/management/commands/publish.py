import logging

from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from evaluation.harness import MECHANISM_APTB, MECHANISMS, run_mechanism
from privacy.exceptions import LedgerMismatchError
from privacy.ledger import export_ledger
from runs.cli import (
    EXIT_AUDIT,
    add_config_arguments,
    add_universe_arguments,
    config_error,
    config_from_options,
    load_dataset,
    universe_from_options,
)
from runs.manifest import AtomicOutputs, render_manifest, sha256_file
from runs.models import PublishRun
from trajectories.exceptions import PreconditionError
from trajectories.fileformat import serialize_dataset
from trajectories.prefix_tree import dump_tree

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Publish a differentially private version of a trajectory dataset."

    def add_arguments(self, parser):
        parser.add_argument("--in", dest="input", required=True, help="discretized dataset file")
        parser.add_argument("--out", required=True, help="published dataset file")
        parser.add_argument("--ledger", help="ledger export (default: <out>.ledger)")
        parser.add_argument("--manifest", help="run manifest (default: <out>.manifest.json)")
        parser.add_argument("--tree", help="also write a dump of the noisy tree")
        parser.add_argument("--mechanism", choices=MECHANISMS, default=MECHANISM_APTB)
        add_config_arguments(parser)
        add_universe_arguments(parser)

    def handle(self, *args, **options):
        cfg = config_from_options(options)
        d = load_dataset(options["input"], universe_from_options(options))
        mechanism = options["mechanism"]
        out = options["out"]
        ledger_path = options.get("ledger") or f"{out}.ledger"
        manifest_path = options.get("manifest") or f"{out}.manifest.json"

        try:
            result = run_mechanism(mechanism, d, cfg)
        except LedgerMismatchError as exc:
            raise CommandError(f"ledger audit failed: {exc}", returncode=EXIT_AUDIT)
        except PreconditionError as exc:
            raise config_error(str(exc))

        if not result.audit.passed:
            raise CommandError(
                f"ledger audit failed: path {result.audit.worst_path} spends "
                f"{result.audit.max_path_sum!r} > {cfg.total_eps!r}; nothing was published",
                returncode=EXIT_AUDIT,
            )

        input_sha = sha256_file(options["input"])
        with AtomicOutputs() as outputs:
            written = [
                {"path": out, "sha256": outputs.stage(out, serialize_dataset(result.dataset))},
                {"path": ledger_path, "sha256": outputs.stage(ledger_path, export_ledger(result.ledger))},
            ]
            if options.get("tree"):
                written.append({"path": options["tree"], "sha256": outputs.stage(options["tree"], dump_tree(result.noisy_tree))})
            manifest = render_manifest({
                "command": "publish",
                "mechanism": mechanism,
                "seed": cfg.seed,
                "config": cfg.snapshot(),
                "inputs": [{"path": options["input"], "sha256": input_sha}],
                "outputs": written,
                "ledger": result.audit.summary(),
            })
            outputs.stage(manifest_path, manifest)
            outputs.commit()

        self._record(mechanism, cfg, result, input_sha, manifest_path)
        self.stdout.write(self.style.SUCCESS(
            f"published {len(result.dataset)} trajectories to {out} "
            f"(max path sum {result.audit.max_path_sum:.6g} of {cfg.total_eps:g})"
        ))

    def _record(self, mechanism, cfg, result, input_sha, manifest_path):
        # outputs are already committed; registry errors only warn
        try:
            PublishRun.objects.create(
                command="publish",
                mechanism=mechanism,
                seed=cfg.seed,
                total_epsilon=cfg.total_eps,
                max_path_sum=result.audit.max_path_sum,
                input_sha256=input_sha,
                manifest_path=str(manifest_path),
                published_count=len(result.dataset),
            )
        except DatabaseError as exc:
            logger.warning("run registry unavailable, run not recorded: %s", exc)
