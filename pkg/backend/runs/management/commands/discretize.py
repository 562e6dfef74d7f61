import logging

from django.core.management.base import BaseCommand
from rest_framework import serializers

from runs.cli import config_error, format_validation_error, parse_error, read_text
from runs.manifest import AtomicOutputs
from trajectories.dataset import Dataset
from trajectories.discretize import discretize
from trajectories.exceptions import EmptyTrajectoryError, TrajpubError
from trajectories.fileformat import parse_raw_traces, serialize_dataset
from trajectories.serializers import DiscretizeSerializer

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Map raw x,y,t traces onto a grid-and-slot universe and write a dataset file."

    def add_arguments(self, parser):
        parser.add_argument("--in", dest="input", required=True, help="raw traces, x,y,t lines, blank line between traces")
        parser.add_argument("--out", required=True)
        parser.add_argument("--rows", type=int, required=True)
        parser.add_argument("--cols", type=int, required=True)
        parser.add_argument("--slots", type=int, required=True)
        parser.add_argument("--bbox", required=True, help="min_x,min_y,max_x,max_y")
        parser.add_argument("--time-origin", dest="time_origin", required=True, help="seconds or ISO-8601")
        parser.add_argument("--slot-width", type=float, dest="slot_width", required=True, help="seconds")

    def handle(self, *args, **options):
        ser = DiscretizeSerializer(data={
            k: options.get(k) for k in ("rows", "cols", "slots", "bbox", "time_origin", "slot_width")
        })
        if not ser.is_valid():
            raise config_error(format_validation_error(serializers.ValidationError(ser.errors)))
        params = ser.save()

        try:
            traces = parse_raw_traces(read_text(options["input"], "raw trace"))
        except TrajpubError as exc:
            raise parse_error(f"{options['input']}: {exc}")

        trajectories, skipped = [], 0
        for trace in traces:
            try:
                trajectories.append(discretize(trace, **params))
            except EmptyTrajectoryError:
                skipped += 1
        if skipped:
            logger.warning("%d trace(s) had no sample inside the universe and were skipped", skipped)
        d = Dataset(params["universe"], tuple(trajectories))

        with AtomicOutputs() as outputs:
            outputs.stage(options["out"], serialize_dataset(d))
            outputs.commit()
        self.stdout.write(self.style.SUCCESS(f"wrote {len(d)} trajectories to {options['out']} ({skipped} skipped)"))
