import logging
import statistics

from django.conf import settings
from django.core.management.base import BaseCommand
from rest_framework import serializers

from evaluation.harness import (
    MECHANISM_APTB,
    MECHANISM_BASELINE,
    METRIC_ARE,
    METRIC_LENGTH_L1,
    SummaryRow,
    measure,
    parse_metrics,
    rows_for,
    run_sweep,
)
from evaluation.metrics import make_workload, sign_test
from evaluation.serializers import SweepSerializer
from privacy.mechanisms import RandomStream
from runs.cli import (
    add_config_arguments,
    add_universe_arguments,
    config_error,
    config_from_options,
    format_validation_error,
    load_dataset,
    universe_from_options,
)
from runs.manifest import AtomicOutputs
from trajectories.dataset import max_length
from trajectories.exceptions import PreconditionError

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = (
        "Score a published dataset against its original, or sweep mechanisms over "
        "epsilon values and seeds (--sweep eps=0.5,1.0)."
    )

    def add_arguments(self, parser):
        parser.add_argument("--in", dest="input", required=True, help="original dataset file")
        parser.add_argument("--published", help="published dataset file to score")
        parser.add_argument("--sweep", help="eps=<v1>,<v2>,... runs the mechanisms instead of reading --published")
        parser.add_argument("--mechanism", help="comma-separated mechanisms for a sweep (default aptb,baseline)")
        parser.add_argument("--seeds", type=int, help="number of seeds per sweep cell, counted up from --seed (default 20)")
        parser.add_argument("--metrics", help=f"comma-separated, from {METRIC_ARE},{METRIC_LENGTH_L1}")
        parser.add_argument("--out", required=True, help="evaluation report")
        parser.add_argument("--summary", help="summary rows: metric<TAB>mechanism<TAB>epsilon<TAB>seed<TAB>value")
        parser.add_argument("--workers", type=int, default=1, help="worker processes for a sweep")
        add_config_arguments(parser)
        add_universe_arguments(parser)

    def handle(self, *args, **options):
        universe = universe_from_options(options)
        original = load_dataset(options["input"], universe)
        h = options.get("h") or max(max_length(original), 1)
        workload = make_workload(original, h, RandomStream(options["seed"]),
                                 settings.TRAJPUB["SANITY_BOUND"])

        if options.get("sweep"):
            report, rows = self._sweep(original, workload, h, options)
        elif options.get("published"):
            report, rows = self._compare(original, workload, options)
        else:
            raise config_error("either --published or --sweep is required")

        with AtomicOutputs() as outputs:
            outputs.stage(options["out"], report)
            if options.get("summary"):
                outputs.stage(options["summary"], "".join(row.as_line() + "\n" for row in rows))
            outputs.commit()
        self.stdout.write(self.style.SUCCESS(f"wrote {options['out']} ({len(rows)} summary rows)"))

    # ────────────────────────────────
    #  PUBLISHED FILE VS ORIGINAL
    # ────────────────────────────────
    def _compare(self, original, workload, options):
        published = load_dataset(options["published"], original.universe, what="published")
        metrics = self._metrics(options.get("metrics") or f"{METRIC_ARE},{METRIC_LENGTH_L1}")
        label = options.get("mechanism") or "published"
        try:
            values = {m: measure(m, original, published, workload) for m in metrics}
        except PreconditionError as exc:
            raise config_error(str(exc))

        lines = [
            "[eval]",
            "mode = published",
            f"original = {options['input']}",
            f"published = {options['published']}",
            f"original_trajectories = {len(original)}",
            f"published_trajectories = {len(published)}",
            f"queries = {len(workload.prefixes)}",
            f"sanity_bound = {workload.sanity_bound!r}",
            "",
            "[metrics]",
            *(f"{m} = {v!r}" for m, v in values.items()),
        ]
        rows = [SummaryRow(m, label, options.get("eps"), options["seed"], v) for m, v in values.items()]
        return "\n".join(lines) + "\n", rows

    # ────────────────────────────────
    #  MECHANISM SWEEP
    # ────────────────────────────────
    def _sweep(self, original, workload, h, options):
        ser = SweepSerializer(data={
            k: v for k, v in {
                "sweep": options["sweep"],
                "mechanism": options.get("mechanism"),
                "seeds": options.get("seeds"),
                "metrics": options.get("metrics"),
            }.items() if v is not None
        })
        if not ser.is_valid():
            raise config_error(format_validation_error(serializers.ValidationError(ser.errors)))
        sweep = ser.validated_data
        eps_values = sweep["sweep"]
        base_cfg = config_from_options(options, total_eps=eps_values[0], h_user=h)
        seeds = range(base_cfg.seed, base_cfg.seed + sweep["seeds"])

        try:
            rows = run_sweep(original, sweep["mechanism"], eps_values, seeds, base_cfg,
                             metrics=sweep["metrics"], workers=options["workers"], workload=workload)
        except PreconditionError as exc:
            raise config_error(str(exc))

        lines = [
            "[eval]",
            "mode = sweep",
            f"original = {options['input']}",
            f"trajectories = {len(original)}",
            f"h = {h}",
            f"queries = {len(workload.prefixes)}",
            f"mechanisms = {','.join(sweep['mechanism'])}",
            f"epsilons = {','.join(repr(e) for e in eps_values)}",
            f"seeds = {seeds.start}..{seeds.stop - 1}",
            "",
            "[means]",
        ]
        for metric in sweep["metrics"]:
            for mechanism in sweep["mechanism"]:
                for eps in eps_values:
                    values = rows_for(rows, metric, mechanism, eps)
                    lines.append(f"{metric}.{mechanism}.{eps!r} = {statistics.fmean(values)!r}")

        if {MECHANISM_APTB, MECHANISM_BASELINE} <= set(sweep["mechanism"]):
            lines += ["", "[sign_test]"]
            for metric in sweep["metrics"]:
                for eps in eps_values:
                    p = sign_test(rows_for(rows, metric, MECHANISM_APTB, eps),
                                  rows_for(rows, metric, MECHANISM_BASELINE, eps))
                    lines.append(f"{metric}.{eps!r} = {p!r}")
        return "\n".join(lines) + "\n", rows

    def _metrics(self, value):
        try:
            return parse_metrics(value)
        except PreconditionError as exc:
            raise config_error(str(exc))
