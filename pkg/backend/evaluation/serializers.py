from rest_framework import serializers

from trajectories.exceptions import PreconditionError
from trajectories.serializers import UniverseSerializer

from .harness import parse_mechanisms, parse_metrics


class SynthSerializer(UniverseSerializer):
    n       = serializers.IntegerField(min_value=0, help_text="number of trajectories")
    max_len = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    skew    = serializers.FloatField(min_value=0.0, default=1.0, help_text="power-law popularity exponent")
    seed    = serializers.IntegerField()

    def validate(self, attrs):
        if attrs.get("max_len") is None:
            attrs["max_len"] = attrs["slots"]
        return attrs


class SweepSerializer(serializers.Serializer):
    """`--sweep eps=0.5,1.0` plus the mechanism list, seed count and metrics of an eval sweep."""

    sweep     = serializers.CharField()
    mechanism = serializers.CharField(default="aptb,baseline")
    seeds     = serializers.IntegerField(min_value=1, default=20)
    metrics   = serializers.CharField(default="avg_relative_error")

    def validate_sweep(self, value: str) -> list[float]:
        name, sep, raw = value.partition("=")
        if not sep or name.strip() != "eps":
            raise serializers.ValidationError("expected 'eps=<v1>,<v2>,...'.")
        try:
            values = [float(v) for v in raw.split(",") if v.strip()]
        except ValueError:
            raise serializers.ValidationError("epsilon values must be numbers.")
        if not values or any(not v > 0 for v in values):
            raise serializers.ValidationError("every epsilon must be positive.")
        return values

    def validate_mechanism(self, value: str) -> tuple[str, ...]:
        try:
            return parse_mechanisms(value)
        except PreconditionError as exc:
            raise serializers.ValidationError(str(exc))

    def validate_metrics(self, value: str) -> tuple[str, ...]:
        try:
            return parse_metrics(value)
        except PreconditionError as exc:
            raise serializers.ValidationError(str(exc))
