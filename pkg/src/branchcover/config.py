"""Pipeline configuration: a flat ``key = value`` file plus command-line overrides."""

import json
import os
from dataclasses import dataclass, field, fields

from .monodromy import GluingInstructions, RamificationType, check_rh, rh_explanation, uniform_ramification

SCORES = ("area", "angle", "combined")


class ConfigError(ValueError):
    pass


def parse_rho(text, degree=None):
    """``"[[1,1,3],[1,1,3]]"`` -> ``RamificationType``; degree defaults to the first sum."""
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse ramification type {text!r}: {exc}") from None
    if not rows or not all(isinstance(r, list) and r for r in rows):
        raise ConfigError(f"ramification type {text!r} must be a non-empty list of lists")
    d = sum(rows[0]) if degree is None else int(degree)
    try:
        return RamificationType(tuple(tuple(r) for r in rows), d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class PipelineConfig:
    mesh: str = None
    k: int = None
    r: int = None
    d: int = None
    rho: str = None
    sigma_file: str = None
    seed_vertex: int = 0
    base_vertex: int = None
    res: int = 512
    channels: list = field(default_factory=lambda: ["xyz"])
    out: str = "out"
    score: str = "combined"
    tol: float = 1e-10
    time_budget: float = 300.0
    labels: str = None

    def validate(self):
        if self.mesh is None:
            raise ConfigError("no input mesh given")
        given = [self.k is not None or self.r is not None, self.rho is not None, self.sigma_file is not None]
        if sum(given) != 1:
            raise ConfigError("give exactly one of (k, r, d), rho, or sigma_file")
        if given[0]:
            if None in (self.k, self.r, self.d):
                raise ConfigError("k, r and d must all be given")
            if self.k * (self.r - 1) != 2 * self.d:
                raise ConfigError(f"k (r - 1) = {self.k * (self.r - 1)} but 2 d = {2 * self.d}")
        if self.res < 8:
            raise ConfigError(f"resolution {self.res} is below 8")
        if self.score not in SCORES:
            raise ConfigError(f"score must be one of {SCORES}")
        if not self.tol > 0:
            raise ConfigError("tolerance must be positive")
        return self

    def ramification(self):
        """The requested ``RamificationType``, or ``None`` when Sigma comes from a file."""
        if self.rho is not None:
            rho = parse_rho(self.rho, self.d)
        elif self.k is not None:
            rho, _ = uniform_ramification(self.k, self.r, self.d)
        else:
            return None
        if not check_rh(rho):
            raise ConfigError("RH violated: " + rh_explanation(rho))
        return rho

    def gluing(self):
        if self.sigma_file is None:
            return None
        if not os.path.exists(self.sigma_file):
            raise ConfigError(f"gluing file {self.sigma_file} does not exist")
        with open(self.sigma_file) as fh:
            return GluingInstructions.from_text(fh.read(), self.d)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key, value):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _TYPES[key]
    if value is None:
        return None
    if kind == "list" or kind is list:
        if isinstance(value, str):
            return [v.strip() for v in value.split(",") if v.strip()]
        return list(value)
    try:
        if kind in ("int", int):
            return int(value)
        if kind in ("float", float):
            return float(value)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from None
    return str(value)


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = _coerce(key.replace("-", "_"), value)
    return out


def load_config(path=None, **overrides):
    values = read_config_file(path) if path else {}
    for key, value in overrides.items():
        if value is not None:
            values[key] = _coerce(key, value)
    cfg = PipelineConfig(**values)
    if path and cfg.mesh and not os.path.isabs(cfg.mesh) and ":" not in cfg.mesh:
        cand = os.path.join(os.path.dirname(os.path.abspath(path)), cfg.mesh)
        if os.path.exists(cand) and not os.path.exists(cfg.mesh):
            cfg.mesh = cand
    return cfg
