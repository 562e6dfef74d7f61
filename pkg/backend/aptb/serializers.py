from django.conf import settings
from rest_framework import serializers

from trajectories.prefix_tree import SONSET_MODES

from .config import DELTA_AUTO, AptbConfig, config_errors


def _defaults() -> dict:
    conf = settings.TRAJPUB
    return {
        "pre_fraction": conf["PRE_FRACTION"],
        "theta_floor":  conf["THETA_FLOOR"],
        "split_rank":   conf["SPLIT_RANK"],
        "split_select": conf["SPLIT_SELECT"],
        "split_count":  conf["SPLIT_COUNT"],
    }


class DeltaField(serializers.Field):
    """Outlier distance: a non-negative number or the literal 'auto'."""

    def to_internal_value(self, data):
        if isinstance(data, str) and data.strip().lower() == DELTA_AUTO:
            return DELTA_AUTO
        try:
            value = float(data)
        except (TypeError, ValueError):
            raise serializers.ValidationError("delta must be a number or 'auto'.")
        if value < 0:
            raise serializers.ValidationError("delta must be >= 0.")
        return value

    def to_representation(self, value):
        return value


# ────────────────────────────────
#  CONFIG FILE + FLAGS  →  AptbConfig
# ────────────────────────────────
class AptbConfigSerializer(serializers.Serializer):
    total_eps      = serializers.FloatField(help_text="total privacy budget epsilon")
    h_user         = serializers.IntegerField(help_text="publisher height limit h")
    seed           = serializers.IntegerField(help_text="master seed (mandatory)")
    pre_fraction   = serializers.FloatField(required=False)
    delta          = DeltaField(required=False, default=DELTA_AUTO)
    theta_floor    = serializers.FloatField(required=False)
    theta_override = serializers.FloatField(required=False, allow_null=True, default=None)
    split_rank     = serializers.FloatField(required=False)
    split_select   = serializers.FloatField(required=False)
    split_count    = serializers.FloatField(required=False)
    sonset_mode    = serializers.ChoiceField(choices=SONSET_MODES, required=False, default="universe")

    def validate(self, attrs):
        """
        Fill tool defaults from settings.TRAJPUB, then enforce every
        AptbConfig invariant (budget positive, fractions summing to 1, ...).
        """
        merged = {**_defaults(), **attrs}
        errors = config_errors({**merged, "unaccounted_eps_factor": 1.0})
        if errors:
            raise serializers.ValidationError(errors)
        return merged

    def create(self, validated_data) -> AptbConfig:
        return AptbConfig(**validated_data)


def build_config(file_values: dict | None, flag_values: dict) -> AptbConfig:
    """File values first, flags (when not None) override. Raises serializers.ValidationError."""
    data = dict(file_values or {})
    data.update({k: v for k, v in flag_values.items() if v is not None})
    ser = AptbConfigSerializer(data=data)
    ser.is_valid(raise_exception=True)
    return ser.save()
