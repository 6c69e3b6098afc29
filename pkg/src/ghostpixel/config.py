"""Experiment configuration: flat dotted keys, file + CLI-flag overrides.

A config is a flat mapping like ``basis.k = 6`` / ``noise.photon_scale =
1e6``.  Files hold one ``key = value`` pair per line (``#`` comments);
every key can be overridden by a command-line flag of the same dotted
name.  Validation failures carry the offending field path so the CLI can
report them precisely and exit with the config-inconsistency code.
"""

from dataclasses import dataclass, field

import numpy as np

from .hadamard import MAX_SYLVESTER_LOG2, ORDERINGS
from .optics import ImperfectionModel, NoiseModel, SourceModel
from .phantoms import PHANTOM_KINDS, PhantomSpec

RECON_METHODS = ("gi", "dgi", "tv", "wfista")
OPERATOR_MODES = ("auto", "ideal", "explicit")

# key -> (parser, default); phantom.param.* keys are accepted dynamically
SCHEMA = {
    "seed": (int, 0),
    "modulation": (str, "hadamard"),
    "differential": (int, 1),
    "basis.k": (int, 5),
    "basis.ordering": (str, "natural"),
    "basis.rate": (float, 1.0),
    "speckle.count": (int, 1024),
    "speckle.size_px": (int, 1),
    "phantom.kind": (str, "letters"),
    "phantom.side": (int, 32),
    "phantom.pixel_pitch": (float, 1.0),
    "imperfection.modulation_depth": (float, 1.0),
    "imperfection.edge_blur_sigma": (float, 0.0),
    "imperfection.jitter_sigma": (float, 0.0),
    "source.enabled": (int, 0),
    "source.fwhm0": (float, 30.0),
    "source.fwhm1": (float, 30.0),
    "source.source_to_mask": (float, 100.0),
    "source.mask_to_object": (float, 100.0),
    "noise.photon_scale": (float, 0.0),
    "noise.read_noise_sigma": (float, 0.0),
    "noise.dark_current": (float, 0.0),
    "recon.method": (str, "gi"),
    "recon.operator": (str, "auto"),
    "recon.mu": (float, 256.0),
    "recon.beta": (float, 32.0),
    "recon.lam": (float, 2.0),
    "recon.levels": (int, 3),
    "recon.max_iters": (int, 300),
    "recon.tol": (float, 1e-7),
    "sweep.exposures": (str, ""),
    "sweep.rates": (str, ""),
    "sweep.methods": (str, ""),
    "sweep.seeds": (str, ""),  # empty = fall back to the global seed
    "out.dir": (str, "."),
}

PHANTOM_PARAM_PREFIX = "phantom.param."


class ConfigError(ValueError):
    """Inconsistent or unparseable configuration; carries the field path."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


def _parse_param_value(raw: str):
    """Kind-specific phantom parameters: int if possible, else float, else str."""
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat `key = value` lines to a raw string mapping."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}", f"expected key = value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def load_config_file(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))


def _int_list(text: str, field_path: str):
    if not text.strip():
        return []
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(field_path, f"expected comma-separated integers: {exc}") from None


def _float_list(text: str, field_path: str):
    if not text.strip():
        return []
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(field_path, f"expected comma-separated floats: {exc}") from None


def parse_arm(token: str, default_modulation: str = "hadamard"):
    """Resolve a sweep arm token to (modulation, recon method).

    Accepted forms: a bare recon method ("gi", "tv", ...) using the config's
    modulation; a bare modulation ("hadamard", "speckle") reconstructed with
    correlation GI — the common-estimator comparison; or the explicit
    "modulation:method".
    """
    if ":" in token:
        modulation, _, method = token.partition(":")
    elif token in ("hadamard", "speckle"):
        modulation, method = token, "gi"
    else:
        modulation, method = default_modulation, token
    if modulation not in ("hadamard", "speckle"):
        raise ConfigError("sweep.methods", f"unknown modulation in arm {token!r}")
    if method not in RECON_METHODS:
        raise ConfigError("sweep.methods", f"unknown method in arm {token!r}")
    if modulation == "speckle" and method == "dgi":
        raise ConfigError("sweep.methods", "dgi needs a differential hadamard series")
    return modulation, method


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated snapshot of one experiment: acquisition + reconstruction."""

    values: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        values = {key: default for key, (_, default) in SCHEMA.items()}
        params = {}
        for key, raw_value in raw.items():
            if key in SCHEMA:
                parser = SCHEMA[key][0]
                try:
                    values[key] = parser(raw_value) if isinstance(raw_value, str) else parser(raw_value)
                except (TypeError, ValueError):
                    raise ConfigError(key, f"cannot parse {raw_value!r} as {parser.__name__}") from None
            elif key.startswith(PHANTOM_PARAM_PREFIX):
                name = key[len(PHANTOM_PARAM_PREFIX):]
                params[name] = _parse_param_value(raw_value) if isinstance(raw_value, str) else raw_value
            else:
                raise ConfigError(key, "unknown configuration key")
        values["phantom.parameters"] = params
        cfg = cls(values=values)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def validate(self) -> None:
        v = self.values
        if v["modulation"] not in ("hadamard", "speckle"):
            raise ConfigError("modulation", f"must be hadamard or speckle, got {v['modulation']!r}")
        k = v["basis.k"]
        if not 1 <= k or 2 * k > MAX_SYLVESTER_LOG2:
            raise ConfigError("basis.k", f"needs 1 <= k <= {MAX_SYLVESTER_LOG2 // 2}, got {k}")
        if v["basis.ordering"] not in ORDERINGS:
            raise ConfigError("basis.ordering", f"unknown ordering {v['basis.ordering']!r}")
        if not 0.0 < v["basis.rate"] <= 1.0:
            raise ConfigError("basis.rate", f"rate must be in (0, 1], got {v['basis.rate']}")
        if v["phantom.kind"] not in PHANTOM_KINDS:
            raise ConfigError("phantom.kind", f"unknown kind {v['phantom.kind']!r}")
        side = v["phantom.side"]
        if side < 2 or side & (side - 1):
            raise ConfigError("phantom.side", f"side must be a power of two, got {side}")
        if v["modulation"] == "hadamard" and side != 1 << k:
            raise ConfigError("phantom.side",
                              f"side {side} does not match basis grid {1 << k} (basis.k={k})")
        if v["modulation"] == "speckle":
            if v["speckle.count"] < 2:
                raise ConfigError("speckle.count", "need at least 2 speckle exposures")
            if not 1 <= v["speckle.size_px"] <= side:
                raise ConfigError("speckle.size_px",
                                  f"size {v['speckle.size_px']} outside [1, {side}]")
        if v["differential"] not in (0, 1):
            raise ConfigError("differential", "must be 0 or 1")
        if v["modulation"] == "speckle" and v["differential"]:
            raise ConfigError("differential", "speckle acquisition has no complementary pair")
        if v["recon.method"] not in RECON_METHODS:
            raise ConfigError("recon.method", f"must be one of {RECON_METHODS}")
        if v["recon.method"] == "dgi" and not (v["modulation"] == "hadamard" and v["differential"]):
            raise ConfigError("recon.method", "dgi needs a differential hadamard series")
        if v["recon.operator"] not in OPERATOR_MODES:
            raise ConfigError("recon.operator", f"must be one of {OPERATOR_MODES}")
        if v["recon.method"] == "wfista":
            levels = v["recon.levels"]
            if levels < 1 or side % (1 << levels):
                raise ConfigError("recon.levels",
                                  f"side {side} not divisible by 2^{levels}")
        if v["recon.max_iters"] < 1:
            raise ConfigError("recon.max_iters", "need at least one iteration")
        if v["recon.mu"] <= 0 or v["recon.beta"] <= 0:
            raise ConfigError("recon.mu", "mu and beta must be positive")
        if v["recon.lam"] < 0:
            raise ConfigError("recon.lam", "lam must be >= 0")
        for key in ("imperfection.modulation_depth",):
            if not 0.0 <= v[key] <= 1.0:
                raise ConfigError(key, f"must lie in [0, 1], got {v[key]}")
        for key in ("imperfection.edge_blur_sigma", "imperfection.jitter_sigma",
                    "noise.photon_scale", "noise.read_noise_sigma"):
            if v[key] < 0:
                raise ConfigError(key, f"must be >= 0, got {v[key]}")
        if v["source.enabled"]:
            for key in ("source.fwhm0", "source.fwhm1", "source.source_to_mask",
                        "source.mask_to_object"):
                if v[key] <= 0:
                    raise ConfigError(key, f"must be positive, got {v[key]}")
        if v["phantom.pixel_pitch"] <= 0:
            raise ConfigError("phantom.pixel_pitch", "pixel pitch must be positive")
        _int_list(v["sweep.exposures"], "sweep.exposures")
        _int_list(v["sweep.seeds"], "sweep.seeds")
        for rate in _float_list(v["sweep.rates"], "sweep.rates"):
            if not 0.0 < rate <= 1.0:
                raise ConfigError("sweep.rates", f"rate {rate} outside (0, 1]")
        for token in self._method_tokens():
            parse_arm(token, v["modulation"])

    # ------------------------------------------------------- model builders

    def phantom_spec(self) -> PhantomSpec:
        return PhantomSpec(
            kind=self.values["phantom.kind"],
            side=self.values["phantom.side"],
            pixel_pitch=self.values["phantom.pixel_pitch"],
            parameters=dict(self.values.get("phantom.parameters", {})),
        )

    def imperfection(self) -> ImperfectionModel:
        return ImperfectionModel(
            modulation_depth=self.values["imperfection.modulation_depth"],
            edge_blur_sigma=self.values["imperfection.edge_blur_sigma"],
            jitter_sigma=self.values["imperfection.jitter_sigma"],
        )

    def source(self) -> SourceModel | None:
        if not self.values["source.enabled"]:
            return None
        return SourceModel(
            source_fwhm=(self.values["source.fwhm0"], self.values["source.fwhm1"]),
            source_to_mask=self.values["source.source_to_mask"],
            mask_to_object=self.values["source.mask_to_object"],
        )

    def noise(self, seed: int | None = None) -> NoiseModel:
        return NoiseModel(
            photon_scale=self.values["noise.photon_scale"],
            read_noise_sigma=self.values["noise.read_noise_sigma"],
            dark_current=self.values["noise.dark_current"],
            seed=self.values["seed"] if seed is None else seed,
        )

    def sweep_exposures(self):
        return _int_list(self.values["sweep.exposures"], "sweep.exposures")

    def sweep_rates(self):
        return _float_list(self.values["sweep.rates"], "sweep.rates")

    def sweep_seeds(self):
        seeds = _int_list(self.values["sweep.seeds"], "sweep.seeds")
        return seeds if seeds else [self.values["seed"]]

    def _method_tokens(self):
        text = self.values["sweep.methods"]
        tokens = [tok.strip() for tok in text.split(",") if tok.strip()]
        return tokens if tokens else [self.values["recon.method"]]

    def sweep_methods(self):
        """Sweep arm tokens, validated; see parse_arm for the grammar."""
        tokens = self._method_tokens()
        for token in tokens:
            parse_arm(token, self.values["modulation"])
        return tokens
