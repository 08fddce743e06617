"""
Run configuration: JSON text + CLI overrides → validated RunConfig.

Precedence is flag > config file > settings (EIO_OUT_DIR, EIO_WORKERS) >
built-in default.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

from django.conf import settings

from .estimators import Estimator
from .exceptions import ConfigParseError
from .experiments import SweepPlan
from .models import Hyperparams, ValidatedSpec, validate_spec
from .serializers import FULL_SCALE_DIM, RunConfigSerializer, design_spec
from .theory import BoundConfig

logger = logging.getLogger(__name__)

MANIFEST_KIND = "eio-manifest"
DEFAULT_OUT_DIR = "results"

# flag name -> (section or None for top level, key)
FLAG_TARGETS = {
    "seed": (None, "seed"),
    "out": (None, "output_dir"),
    "workers": (None, "workers"),
    "n": (None, "n"),
    "estimator": (None, "estimator"),
    "d": ("design", "d"),
    "mu": ("hyper", "mu"),
    "lambda": ("hyper", "lambda"),
    "tau": ("hyper", "tau"),
    "replicates": ("plan", "replicates"),
}


@dataclass(frozen=True)
class RunConfig:
    """
    Everything one subcommand needs.

    `echo` is the validated configuration in its JSON form; parsing it
    again gives an equal RunConfig.
    """

    spec: ValidatedSpec
    hyper: Hyperparams
    plan: SweepPlan
    bounds: BoundConfig
    n: int
    seed: int
    workers: int
    estimator: Estimator
    output_dir: Path
    echo: Mapping[str, Any]
    tune_lambda: bool = True
    paired: bool = True


def load_config_text(text: str) -> dict:
    """
    Parse configuration text; a run manifest yields the config it echoes.

    Raises:
        ConfigParseError: On malformed JSON (with line and column) or a
            top-level value that is not an object.
    """
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(data, dict):
        raise ConfigParseError("configuration must be a JSON object", 1, 1)
    if data.get("kind") == MANIFEST_KIND:
        data = data.get("config")
        if not isinstance(data, dict):
            raise ConfigParseError("manifest carries no config object", 1, 1)
    return data


def apply_overrides(data: Mapping[str, Any], flags: Mapping[str, Any]) -> dict:
    """Overlay CLI flags (None means not given) onto parsed config data."""
    merged = {key: (dict(value) if isinstance(value, dict) else value) for key, value in data.items()}
    for flag, value in flags.items():
        if value is None or flag not in FLAG_TARGETS:
            continue
        section, key = FLAG_TARGETS[flag]
        if section is None:
            merged[key] = value
        else:
            merged.setdefault(section, {})[key] = value
    if flags.get("full_scale") and flags.get("d") is None:
        merged.setdefault("design", {})["d"] = FULL_SCALE_DIM
    return merged


def _with_settings_defaults(data: dict) -> dict:
    data = dict(data)
    if data.get("output_dir") in (None, ""):
        data["output_dir"] = getattr(settings, "EIO_OUT_DIR", "") or DEFAULT_OUT_DIR
    data.setdefault("workers", getattr(settings, "EIO_WORKERS", 1))
    return data


def build_run_config(validated: Mapping[str, Any]) -> RunConfig:
    design = validated["design"]
    spec = validate_spec(design_spec(design))
    hyper = Hyperparams(**validated["hyper"])
    plan_attrs = dict(validated["plan"])
    plan = SweepPlan(
        n_grid=plan_attrs["n_grid"],
        lambda_grid=plan_attrs["lambda_grid"],
        mu_grid=plan_attrs["mu_grid"],
        tau_grid=plan_attrs["tau_grid"],
        replicates=plan_attrs["replicates"],
        base_seed=validated["seed"],
        lambda_multipliers=plan_attrs["lambda_multipliers"],
    )
    bounds_attrs = validated["bounds"]
    sigma_psi1 = bounds_attrs["sigma_psi1"]
    bounds = BoundConfig(
        c_x=bounds_attrs["c_x"],
        sigma_psi1=spec.noise_std if sigma_psi1 is None else sigma_psi1,
        delta=bounds_attrs["delta"],
    )
    return RunConfig(
        spec=spec,
        hyper=hyper,
        plan=plan,
        bounds=bounds,
        n=validated["n"],
        seed=validated["seed"],
        workers=validated["workers"],
        estimator=Estimator(validated["estimator"]),
        output_dir=Path(validated["output_dir"]),
        echo=RunConfigSerializer(validated).data,
        tune_lambda=plan_attrs["tune_lambda"],
        paired=plan_attrs["paired"],
    )


def parse_config(
    path: Optional[Path] = None,
    flags: Optional[Mapping[str, Any]] = None,
    text: Optional[str] = None,
) -> RunConfig:
    """
    Validate a run configuration from a file (or text) plus CLI flags.

    Args:
        path (Path | None): JSON config or run manifest; absent means defaults.
        flags (Mapping | None): CLI overrides keyed by flag name
            (seed, out, workers, n, estimator, d, mu, lambda, tau,
            replicates, full_scale); None values are ignored.
        text (str | None): Config text, used when no path is given.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigParseError: If the text is not a JSON object.
        rest_framework.exceptions.ValidationError: Field errors keyed by
            section and field, e.g. {"design": {"d": ["dim must be ≥ 1"]}}.
        OSError: If the file cannot be read.
    """
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    data = load_config_text(text or "")
    data = _with_settings_defaults(apply_overrides(data, flags or {}))

    serializer = RunConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    cfg = build_run_config(serializer.validated_data)
    logger.debug("parsed run config: %s", dict(cfg.echo))
    return cfg
