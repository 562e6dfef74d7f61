from django.core.management.base import BaseCommand
from rest_framework import serializers

from evaluation.serializers import SynthSerializer
from evaluation.synth import synth_dataset
from runs.cli import config_error, format_validation_error
from runs.manifest import AtomicOutputs
from trajectories.dataset import Universe
from trajectories.fileformat import serialize_dataset


class Command(BaseCommand):
    help = "Write a synthetic trajectory dataset (popularity-weighted random walks)."

    def add_arguments(self, parser):
        parser.add_argument("--rows", type=int, required=True)
        parser.add_argument("--cols", type=int, required=True)
        parser.add_argument("--slots", type=int, required=True)
        parser.add_argument("--n", type=int, required=True, help="number of trajectories")
        parser.add_argument("--max-len", type=int, dest="max_len", help="longest trajectory (default: --slots)")
        parser.add_argument("--skew", type=float, default=1.0, help="power-law exponent of cell popularity")
        parser.add_argument("--seed", type=int, required=True)
        parser.add_argument("--out", required=True)

    def handle(self, *args, **options):
        ser = SynthSerializer(data={k: options.get(k) for k in ("rows", "cols", "slots", "n", "max_len", "skew", "seed")})
        if not ser.is_valid():
            raise config_error(format_validation_error(serializers.ValidationError(ser.errors)))
        v = ser.validated_data
        universe = Universe(v["rows"], v["cols"], v["slots"])
        d = synth_dataset(universe, v["n"], v["max_len"], v["skew"], v["seed"])

        with AtomicOutputs() as outputs:
            outputs.stage(options["out"], serialize_dataset(d))
            outputs.commit()
        self.stdout.write(self.style.SUCCESS(f"wrote {len(d)} trajectories to {options['out']}"))
