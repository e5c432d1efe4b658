"""Run configuration for fks3d.

Configuration lives in a flat ``key=value`` text file (one pair per line,
``#`` starts a comment).  Config caches the raw strings in memory and
offers typed getters; RunConfig is the validated, immutable view the
solver consumes.
"""
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from errors import ConfigError
from logger import get_logger

logger = get_logger(__name__)

COLLISIONS = ('none', 'bgk', 'boltzmann')
INITIAL_STATES = ('sod', 'uniform', 'random')
SCHEDULERS = ('threads', 'round_robin')
BENCH_LAYOUTS = ('slab', 'min_ghost')
DEFAULT_T_FINAL = 0.07


def parse_dims(text: str) -> Tuple[int, int, int]:
    """Parse 'PxxPyxPz' (or comma separated) into three positive worker counts."""
    parts = str(text).lower().replace(',', 'x').replace('*', 'x').split('x')
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"dims must look like 2x2x1, got {text!r}") from None
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ConfigError(f"dims must be three positive integers, got {text!r}")
    return dims


def format_dims(dims: Tuple[int, int, int]) -> str:
    return 'x'.join(str(d) for d in dims)


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; exactly one of t_final / n_cycles is set."""
    spatial_n: int = 16
    x_min: float = 0.0
    x_max: float = 2.0
    velocity_n: int = 8
    v_min: float = -15.0
    v_max: float = 15.0
    collision: str = 'bgk'
    tau: float = 0.1
    a1: int = 4
    a2: int = 4
    alpha_const: float = 1.0
    cfl: float = 1.0
    t_final: Optional[float] = None
    n_cycles: Optional[int] = None
    dims: Optional[Tuple[int, int, int]] = None
    workers: int = 1
    out_dir: str = 'output'
    seed: int = 0
    initial: str = 'sod'
    scheduler: str = 'threads'
    collision_threads: int = 1
    bench_layout: str = 'slab'

    def __post_init__(self):
        if (self.t_final is None) == (self.n_cycles is None):
            raise ConfigError("exactly one of t_final and n_cycles must be set")
        if self.t_final is not None and not self.t_final > 0:
            raise ConfigError(f"t_final must be positive, got {self.t_final}")
        if self.n_cycles is not None and self.n_cycles < 1:
            raise ConfigError(f"n_cycles must be at least 1, got {self.n_cycles}")
        if self.spatial_n < 1:
            raise ConfigError(f"spatial_n must be positive, got {self.spatial_n}")
        if self.velocity_n < 2:
            raise ConfigError(f"velocity_n must be at least 2, got {self.velocity_n}")
        if not self.x_max > self.x_min:
            raise ConfigError(f"x_max must exceed x_min, got [{self.x_min}, {self.x_max}]")
        if not self.v_max > self.v_min:
            raise ConfigError(f"v_max must exceed v_min, got [{self.v_min}, {self.v_max}]")
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.collision not in COLLISIONS:
            raise ConfigError(f"collision must be one of {', '.join(COLLISIONS)}, got {self.collision!r}")
        if self.collision == 'bgk' and not self.tau > 0:
            raise ConfigError(f"bgk collision needs tau > 0, got {self.tau}")
        if self.collision == 'boltzmann':
            if self.velocity_n % 2:
                raise ConfigError(f"boltzmann collision needs an even velocity_n, got {self.velocity_n}")
            if self.a1 < 1 or self.a2 < 1:
                raise ConfigError(f"boltzmann collision needs a1, a2 >= 1, got {self.a1}, {self.a2}")
            if not self.alpha_const > 0:
                raise ConfigError(f"boltzmann collision needs alpha_const > 0, got {self.alpha_const}")
        if self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")
        if self.dims is not None:
            px, py, pz = self.dims
            if px * py * pz != self.workers:
                raise ConfigError(f"dims {format_dims(self.dims)} give {px * py * pz} workers, "
                                  f"workers is {self.workers}")
        if self.initial not in INITIAL_STATES:
            raise ConfigError(f"initial must be one of {', '.join(INITIAL_STATES)}, got {self.initial!r}")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"scheduler must be one of {', '.join(SCHEDULERS)}, got {self.scheduler!r}")
        if self.bench_layout not in BENCH_LAYOUTS:
            raise ConfigError(f"bench_layout must be one of {', '.join(BENCH_LAYOUTS)}, got {self.bench_layout!r}")
        if self.collision_threads < 1:
            raise ConfigError(f"collision_threads must be positive, got {self.collision_threads}")

    @property
    def resolved_dims(self) -> Tuple[int, int, int]:
        """Decomposition dims; slabs along x when none are given."""
        return self.dims if self.dims is not None else (self.workers, 1, 1)

    def with_workers(self, workers: int, dims: Optional[Tuple[int, int, int]] = None) -> 'RunConfig':
        return replace(self, workers=workers, dims=dims)

    def to_config(self) -> 'Config':
        config = Config()
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                config.set(f.name, value)
        return config


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
KEYS = tuple(_FIELD_TYPES)
_INT_KEYS = {'spatial_n', 'velocity_n', 'a1', 'a2', 'n_cycles', 'workers', 'seed', 'collision_threads'}
_FLOAT_KEYS = {'x_min', 'x_max', 'v_min', 'v_max', 'tau', 'alpha_const', 'cfl', 't_final'}


def normalize_key(key: str) -> str:
    return key.strip().replace('-', '_')


class Config:
    """Manages run configuration with in-memory caching of raw values."""

    def __init__(self, values: Optional[Mapping[str, Any]] = None):
        self._cache: Dict[str, str] = {}
        if values:
            self.update(values)

    @classmethod
    def from_text(cls, text: str, source: str = '<text>') -> 'Config':
        config = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split('=', 1)
            config.set(key, value.strip())
        return config

    @classmethod
    def load(cls, path) -> 'Config':
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        logger.info(f"Loaded configuration from {path}")
        return cls.from_text(text, source=str(path))

    def serialize(self) -> str:
        """Canonical key=value text, keys in RunConfig field order."""
        return ''.join(f"{key}={self._cache[key]}\n" for key in KEYS if key in self._cache)

    def save(self, path) -> Path:
        path = Path(path)
        try:
            path.write_text(self.serialize(), encoding='utf-8')
        except OSError as e:
            raise ConfigError(f"cannot write config file {path}: {e}") from e
        return path

    def get(self, key: str, default: Any = None) -> Any:
        """Get a raw configuration value from cache."""
        return self._cache.get(normalize_key(key), default)

    def set(self, key: str, value: Any) -> None:
        """Set a configuration value in cache; None removes the key."""
        key = normalize_key(key)
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        if value is None:
            self._cache.pop(key, None)
        elif key == 'dims' and not isinstance(value, str):
            self._cache[key] = format_dims(tuple(value))
        elif isinstance(value, float):
            self._cache[key] = repr(value)
        else:
            self._cache[key] = str(value).strip()

    def unset(self, key: str) -> None:
        self._cache.pop(normalize_key(key), None)

    def update(self, values: Mapping[str, Any]) -> None:
        for key, value in values.items():
            if value is not None:
                self.set(key, value)

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from None

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from None

    def get_str(self, key: str, default: Optional[str] = None) -> Optional[str]:
        raw = self.get(key)
        return default if raw is None else raw.lower() if key in ('collision', 'initial', 'scheduler',
                                                                  'bench_layout') else raw

    def get_dims(self, key: str = 'dims') -> Optional[Tuple[int, int, int]]:
        raw = self.get(key)
        return None if raw is None else parse_dims(raw)

    def to_run_config(self) -> RunConfig:
        """Typed, validated RunConfig; missing keys take the RunConfig defaults."""
        kwargs: Dict[str, Any] = {}
        for key in self._cache:
            if key in _INT_KEYS:
                kwargs[key] = self.get_int(key)
            elif key in _FLOAT_KEYS:
                kwargs[key] = self.get_float(key)
            elif key == 'dims':
                kwargs[key] = self.get_dims()
            else:
                kwargs[key] = self.get_str(key)
        if kwargs.get('dims') is not None and 'workers' not in kwargs:
            px, py, pz = kwargs['dims']
            kwargs['workers'] = px * py * pz
        return RunConfig(**kwargs)
