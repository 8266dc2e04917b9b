"""Run configuration: flat ``key = value`` text files with documented defaults.

Lines starting with ``#`` and blank lines are ignored.  List values are
comma separated.  Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .core import ModelParams
from .ifep import DecoderConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]

DECODERS = ("ifep", "subjective", "qlearning")
CURIOSITY_MODES = ("sinusoid", "constant", "randomwalk")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # model
    alpha: float = 0.05
    beta: float = 2.0
    p0: float = 0.8
    sigma_w: float = 0.4
    epsilon_c: float = 1.0
    # decoder
    decoder: str = "ifep"
    n_particles: int = 5000
    resample_threshold: float = 0.5
    init_w_sd: float = 1.0
    init_c_sd: float = 2.0
    epsilon_alpha: float = 0.002
    epsilon_beta: float = 0.02
    # pipeline
    window_s: float = 8.0
    speed_threshold: float = 1.3
    msdv_threshold: float = 0.45
    # analysis
    max_lag: int = 40
    sample_rate_hz: float = 4.0
    # simulation / validation
    trials: int = 1000
    curiosity_mode: str = "sinusoid"
    curiosity_amplitude: float = 4.0
    curiosity_cycles: float = 4.0
    curiosity_constant: float = 0.0
    epsilons: tuple = (0.1, 1.0, 2.0, 3.0, 4.0, 5.0)
    n_seeds: int = 10
    # run
    seed: int = 0
    workers: int = 1
    check_invariants: bool = True
    sessions: tuple = ()
    ssq: str = ""
    input_dir: str = ""
    out: str = "out"

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {', '.join(DECODERS)}")
        if self.curiosity_mode not in CURIOSITY_MODES:
            raise ConfigError(f"curiosity_mode must be one of {', '.join(CURIOSITY_MODES)}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.trials < 1 or self.n_seeds < 1:
            raise ConfigError("trials and n_seeds must be >= 1")
        try:
            self.model_params()
            self.decoder_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def model_params(self) -> ModelParams:
        return ModelParams(self.alpha, self.beta, self.p0, self.sigma_w, self.epsilon_c)

    def decoder_config(self, epsilon_c: Optional[float] = None, seed: Optional[int] = None) -> DecoderConfig:
        return DecoderConfig(
            n_particles=self.n_particles,
            params=self.model_params(),
            epsilon_c=self.epsilon_c if epsilon_c is None else epsilon_c,
            resample_threshold=self.resample_threshold,
            seed=self.seed if seed is None else seed,
            init_w_sd=self.init_w_sd,
            init_c_sd=self.init_c_sd,
            epsilon_alpha=self.epsilon_alpha,
            epsilon_beta=self.epsilon_beta,
        )

    def resolved(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def override(self, **kwargs) -> "RunConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return dataclasses.replace(self, **kwargs)


def _coerce(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if name == "epsilons":
                return tuple(float(s) for s in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for {name}: {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    defaults = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, getattr(defaults, key))
    return RunConfig(**values)


def load_config(path=None) -> RunConfig:
    """Read a config file (or defaults) and apply ``CURIO_WORKERS``."""
    if path is None:
        cfg = RunConfig()
    else:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        cfg = parse_config(text, str(path))
    env = os.environ.get("CURIO_WORKERS")
    if env:
        cfg = cfg.override(workers=_coerce("workers", env, 1))
    return cfg
