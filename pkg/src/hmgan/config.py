"""Experiment configuration: dataclasses, JSON schema, validation and overrides."""
import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field

import jsonschema

from .errors import ConfigError
from .regularizers import PRESETS, REDUCTIONS, EREVector, RegularizerConfig, ere_preset


@dataclass
class DatasetConfig:
    conditions: int = 2
    modes: int = 8
    radius: float = 0.8
    sigma: float = 0.01
    n_samples: int = 4096
    seed: int = 0


@dataclass
class GeneratorConfig:
    z_dim: int = 2
    hidden: list = field(default_factory=lambda: [32, 32, 32])
    activation: str = "relu"


@dataclass
class DiscriminatorConfig:
    hidden: list = field(default_factory=lambda: [32, 32, 32])
    activation: str = "relu"


@dataclass
class OptimizerConfig:
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999


@dataclass
class MetricsConfig:
    k: int = 20
    alpha: float = 0.05
    embedder_seed: int = 0
    ndb_seed: int = 0
    eval_samples: int = 2048
    eval_seed: int = 2024
    coverage_rho: float = 3.0
    coverage_tau: int = 5
    bound_cap: int = 512


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    variant: str = "hmgan"
    ere_preset: str = None
    ere: list = None
    beta: float = 1.0
    epsilon: float = 1e-8
    msgan_numerator: str = "first_layer"
    reduction: str = "pairs"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    batch_size: int = 64
    steps: int = 3000
    log_every: int = 50
    seeds: list = field(default_factory=lambda: [0])
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    @property
    def n_layers(self):
        return len(self.generator.hidden) + 1

    def ere_vector(self):
        if self.variant != "hmgan":
            return None
        if self.ere is not None:
            return EREVector(tuple(self.ere))
        return ere_preset(self.ere_preset or "HMGAN1", self.n_layers)

    def regularizer(self):
        variant = {"baseline": "none", "msgan": "msgan", "hmgan": "hierarchical"}[self.variant]
        return RegularizerConfig(self.beta, self.epsilon, variant, self.msgan_numerator,
                                 self.reduction)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        sub = {"dataset": DatasetConfig, "generator": GeneratorConfig,
               "discriminator": DiscriminatorConfig, "optimizer": OptimizerConfig,
               "metrics": MetricsConfig}
        for key, typ in sub.items():
            if key in doc:
                doc[key] = typ(**doc[key])
        return cls(**doc)

    def replace(self, **changes):
        doc = self.to_dict()
        doc.update(changes)
        return ExperimentConfig.from_dict(doc)

    def hash(self):
        return config_hash(self.to_dict())


def config_hash(doc):
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


_pos_int = {"type": "integer", "minimum": 1}
_nonneg_int = {"type": "integer", "minimum": 0}
_num = {"type": "number"}
_widths = {"type": "array", "items": _pos_int, "minItems": 1}
_act = {"enum": ["relu", "tanh", "none"]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


SCHEMA = _obj({
    "dataset": _obj({
        "conditions": _pos_int, "modes": _pos_int,
        "radius": {"type": "number", "minimum": 0, "maximum": 1},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "n_samples": {"type": "integer", "minimum": 2}, "seed": _nonneg_int}),
    "generator": _obj({"z_dim": _pos_int, "hidden": _widths, "activation": _act}),
    "discriminator": _obj({"hidden": _widths, "activation": _act}),
    "variant": {"enum": ["baseline", "msgan", "hmgan"]},
    "ere_preset": {"enum": sorted(PRESETS) + [None]},
    "ere": {"type": ["array", "null"], "items": {"type": "number", "minimum": 0, "maximum": 1}},
    "beta": {"type": "number", "minimum": 0},
    "epsilon": {"type": "number", "exclusiveMinimum": 0},
    "msgan_numerator": {"enum": ["first_layer", "raw_input"]},
    "reduction": {"enum": list(REDUCTIONS)},
    "optimizer": _obj({"lr": {"type": "number", "exclusiveMinimum": 0},
                       "beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                       "beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}}),
    "batch_size": {"type": "integer", "minimum": 2},
    "steps": _pos_int,
    "log_every": _pos_int,
    "seeds": {"type": "array", "items": _nonneg_int, "minItems": 1},
    "metrics": _obj({
        "k": _pos_int, "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "embedder_seed": _nonneg_int, "ndb_seed": _nonneg_int,
        "eval_samples": {"type": "integer", "minimum": 2}, "eval_seed": _nonneg_int,
        "coverage_rho": {"type": "number", "exclusiveMinimum": 0}, "coverage_tau": _pos_int,
        "bound_cap": {"type": "integer", "minimum": 2}}),
})


def _pointer(path):
    return "".join(f"/{p}" for p in path)


def _merge_defaults(doc, defaults):
    out = copy.deepcopy(defaults)
    for key, val in doc.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge_defaults(val, out[key])
        else:
            out[key] = val
    return out


def normalize(doc):
    """Validate a config document and fill defaults; raises ConfigError with every problem."""
    if not isinstance(doc, dict):
        raise ConfigError([("", "root must be an object")])
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = [(_pointer(e.absolute_path), e.message)
              for e in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))]
    if doc.get("ere_preset") is not None and doc.get("ere") is not None:
        errors.append(("/ere", "ere and ere_preset are mutually exclusive"))
    variant = doc.get("variant", ExperimentConfig.variant)
    if variant != "hmgan":
        for key in ("ere", "ere_preset"):
            if doc.get(key) is not None:
                errors.append((f"/{key}", f"only valid with variant 'hmgan', not {variant!r}"))
    if errors:
        raise ConfigError(errors)

    full = _merge_defaults(doc, ExperimentConfig().to_dict())
    if full["variant"] == "hmgan" and full["ere"] is None and full["ere_preset"] is None:
        full["ere_preset"] = "HMGAN1"
    n_layers = len(full["generator"]["hidden"]) + 1
    if full["ere"] is not None and len(full["ere"]) != n_layers - 1:
        raise ConfigError([("/ere", f"needs {n_layers - 1} entries for a {n_layers}-layer generator, "
                                    f"got {len(full['ere'])}")])
    if full["metrics"]["k"] > full["dataset"]["n_samples"]:
        raise ConfigError([("/metrics/k", "more bins than real samples")])
    return ExperimentConfig.from_dict(full)


def load_document(path):
    """Read a config file; a run manifest is accepted and its embedded config returned."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from None
    if not text.strip():
        raise ConfigError([("", "root must be an object")])
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"invalid JSON: {exc}")]) from None
    if isinstance(doc, dict) and "config" in doc and "config_hash" in doc:
        doc = doc["config"]
    return doc


def apply_overrides(doc, overrides):
    """Apply ``key.sub=value`` strings left to right. Values parse as JSON, else as strings.

    Unknown top-level or nested keys are rejected.
    """
    if not isinstance(doc, dict):
        raise ConfigError([("", "root must be an object")])
    doc = copy.deepcopy(doc)
    errors = []
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            errors.append(("", f"override {item!r} is not key=value"))
            continue
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        schema, target = SCHEMA, doc
        for depth, part in enumerate(parts):
            props = schema.get("properties", {})
            if part not in props:
                errors.append(("/" + "/".join(parts[:depth + 1]), "unknown key"))
                break
            if depth == len(parts) - 1:
                target[part] = value
            else:
                schema = props[part]
                target = target.setdefault(part, {})
                if not isinstance(target, dict):
                    errors.append(("/" + "/".join(parts[:depth + 1]), "not an object"))
                    break
    if errors:
        raise ConfigError(errors)
    return doc


def validate_config(path, overrides=()):
    return normalize(apply_overrides(load_document(path), overrides))


def write_schema(path):
    """Dump the config JSON schema (the shipped copy lives in docs/)."""
    doc = dict(SCHEMA, title="ExperimentConfig", **{"$schema": "http://json-schema.org/draft-07/schema#"})
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
