import math

from rest_framework import serializers

from .exceptions import DimensionMismatch
from .experiments import LAMBDA_GRID, LAMBDA_MULTIPLIERS, MU_GRID, N_GRID, TAU_GRID
from .estimators import Estimator
from .models import DesignKind, DesignSpec, power_decay_theta, validate_spec

DESK_DIM = 50
FULL_SCALE_DIM = 200
INFINITY_WORDS = ("inf", "+inf", "infinity", "+infinity")


class StrictFieldsMixin:
    """Reject input keys that are not declared fields."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["Unknown field."] for key in unknown})
        return super().to_internal_value(data)


class MuField(serializers.Field):
    """Positive operator penalty; "inf"/"infinity" selects μ = ∞."""

    default_error_messages = {
        "invalid": "A positive number or \"inf\" is required.",
        "positive": "mu must be positive.",
    }

    def to_internal_value(self, data):
        if isinstance(data, str) and data.strip().lower() in INFINITY_WORDS:
            return math.inf
        if isinstance(data, bool):
            self.fail("invalid")
        try:
            value = float(data)
        except (TypeError, ValueError):
            self.fail("invalid")
        if math.isnan(value):
            self.fail("invalid")
        if not value > 0.0:
            self.fail("positive")
        return value

    def to_representation(self, value):
        return "inf" if math.isinf(value) else float(value)


def _float_list(**kwargs):
    return serializers.ListField(child=serializers.FloatField(), **kwargs)


def _positive_grid(default):
    return serializers.ListField(
        child=serializers.FloatField(min_value=0.0),
        allow_empty=False,
        default=lambda: list(default),
    )


class DesignSerializer(StrictFieldsMixin, serializers.Serializer):
    kind = serializers.ChoiceField(choices=[kind.value for kind in DesignKind], default=DesignKind.SINE_FEATURE.value)
    d = serializers.IntegerField(default=DESK_DIM, min_value=1, error_messages={"min_value": "dim must be ≥ 1"})
    noise_std = serializers.FloatField(default=0.09, min_value=0.0)
    theta_decay = serializers.FloatField(default=3.0)
    theta_circ = _float_list(required=False)
    spectrum = _float_list(required=False)
    eigvecs = serializers.ListField(child=_float_list(), required=False)
    covariance = serializers.ListField(child=_float_list(), required=False)

    def validate(self, attrs):
        try:
            validate_spec(design_spec(attrs))
        except ValueError as exc:
            raise serializers.ValidationError(str(exc)) from exc
        return attrs


class HyperSerializer(StrictFieldsMixin, serializers.Serializer):
    mu = MuField(default=1e8)
    tau = serializers.FloatField(default=1.0, min_value=0.0)
    max_iter = serializers.IntegerField(default=200, min_value=1)
    tol = serializers.FloatField(default=1e-10)

    def get_fields(self):
        # "lambda" is a keyword, so the field is added here.
        fields = super().get_fields()
        fields["lambda"] = serializers.FloatField(default=1e-3, min_value=0.0, source="lam")
        return fields

    def validate_tol(self, value):
        if not value > 0.0:
            raise serializers.ValidationError("tol must be positive.")
        return value


class PlanSerializer(StrictFieldsMixin, serializers.Serializer):
    n_grid = serializers.ListField(
        child=serializers.IntegerField(min_value=1),
        allow_empty=False,
        default=lambda: list(N_GRID),
    )
    lambda_grid = _positive_grid(LAMBDA_GRID)
    mu_grid = serializers.ListField(child=MuField(), allow_empty=False, default=lambda: list(MU_GRID))
    tau_grid = _positive_grid(TAU_GRID)
    lambda_multipliers = _positive_grid(LAMBDA_MULTIPLIERS)
    replicates = serializers.IntegerField(default=40, min_value=1)
    tune_lambda = serializers.BooleanField(default=True)
    paired = serializers.BooleanField(default=True)


class BoundsSerializer(StrictFieldsMixin, serializers.Serializer):
    c_x = serializers.FloatField(default=1.0)
    sigma_psi1 = serializers.FloatField(default=None, allow_null=True, min_value=0.0)
    delta = serializers.FloatField(default=0.05)

    def validate_c_x(self, value):
        if not value > 0.0:
            raise serializers.ValidationError("c_x must be positive.")
        return value

    def validate_delta(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("delta must lie in (0, 1).")
        return value


SECTIONS = {
    "design": DesignSerializer,
    "hyper": HyperSerializer,
    "plan": PlanSerializer,
    "bounds": BoundsSerializer,
}


class RunConfigSerializer(StrictFieldsMixin, serializers.Serializer):
    """
    Validates a whole run configuration.

    Missing sections are validated as empty objects so their defaults
    apply. `serializer.data` on validated output gives the JSON echo
    written to manifests.
    """

    design = DesignSerializer()
    hyper = HyperSerializer()
    plan = PlanSerializer()
    bounds = BoundsSerializer()
    n = serializers.IntegerField(default=200, min_value=1)
    seed = serializers.IntegerField(default=0, min_value=0)
    workers = serializers.IntegerField(default=1, min_value=1)
    estimator = serializers.ChoiceField(choices=[e.value for e in Estimator], default=Estimator.EIO.value)
    output_dir = serializers.CharField(default=None, allow_null=True)

    def to_internal_value(self, data):
        if isinstance(data, dict):
            data = {**{name: {} for name in SECTIONS}, **data}
        return super().to_internal_value(data)


def design_spec(attrs: dict) -> DesignSpec:
    """Build the raw DesignSpec described by validated design attributes."""
    kind = DesignKind(attrs.get("kind", DesignKind.SINE_FEATURE.value))
    dim = attrs.get("d", DESK_DIM)
    noise_std = attrs.get("noise_std", 0.09)
    decay = attrs.get("theta_decay", 3.0)
    theta = attrs.get("theta_circ")
    if theta is None:
        theta = power_decay_theta(dim, decay)

    if kind is DesignKind.SINE_FEATURE:
        return DesignSpec(kind=kind, dim=dim, theta_circ=theta, noise_std=noise_std)
    if kind is DesignKind.EXPLICIT_COVARIANCE and attrs.get("covariance") is not None:
        spec = DesignSpec.from_covariance(attrs["covariance"], theta, noise_std)
        if spec.dim != dim:
            raise DimensionMismatch(f"covariance is {spec.dim}x{spec.dim}, expected d = {dim}")
        return spec
    return DesignSpec(
        kind=kind,
        dim=dim,
        theta_circ=theta,
        noise_std=noise_std,
        spectrum=attrs.get("spectrum"),
        eigvecs=attrs.get("eigvecs"),
    )
