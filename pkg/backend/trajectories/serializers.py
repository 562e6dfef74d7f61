"""
Validation of user-supplied universe and discretization parameters.

Commands hand raw flag values to these serializers; `save()` returns the
domain objects.
"""
from rest_framework import serializers

from .dataset import Universe
from .discretize import BBox
from .exceptions import TrajpubError
from .fileformat import parse_timestamp


# ────────────────────────────────
#  UNIVERSE FROM FLAGS
# ────────────────────────────────
class UniverseSerializer(serializers.Serializer):
    rows  = serializers.IntegerField(min_value=1)
    cols  = serializers.IntegerField(min_value=1)
    slots = serializers.IntegerField(min_value=1)

    def create(self, validated_data) -> Universe:
        return Universe(validated_data["rows"], validated_data["cols"], validated_data["slots"])


# ────────────────────────────────
#  RAW TRACE DISCRETIZATION
# ────────────────────────────────
class DiscretizeSerializer(UniverseSerializer):
    bbox        = serializers.CharField(help_text="min_x,min_y,max_x,max_y")
    time_origin = serializers.CharField(help_text="seconds or ISO-8601 timestamp")
    slot_width  = serializers.FloatField(help_text="slot width in seconds")

    def validate_bbox(self, value: str) -> BBox:
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 4:
            raise serializers.ValidationError("bbox needs four comma-separated numbers.")
        try:
            return BBox(*(float(p) for p in parts))
        except ValueError as exc:
            # TrajpubError is a ValueError, so a degenerate box lands here too
            raise serializers.ValidationError(str(exc))

    def validate_time_origin(self, value: str) -> float:
        try:
            return parse_timestamp(value)
        except TrajpubError as exc:
            raise serializers.ValidationError(str(exc))

    def validate_slot_width(self, value: float) -> float:
        if not value > 0:
            raise serializers.ValidationError("slot_width must be positive.")
        return value

    def create(self, validated_data) -> dict:
        return {
            "universe":    super().create(validated_data),
            "bbox":        validated_data["bbox"],
            "time_origin": validated_data["time_origin"],
            "slot_width":  validated_data["slot_width"],
        }
