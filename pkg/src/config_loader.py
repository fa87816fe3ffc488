"""
Experiment configuration: YAML defaults plus flat ``key = value`` files.
"""

import copy
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

try:
    from .ctmc_core import Schedule, make_schedule
    from .datasets import ToyDataset, make_dataset
    from .errors import ConfigError, DomainError
    from .model import ModelVariant, TwoHeadModel
    from .objectives import ObjectiveKind
    from .samplers import MAX_SEED, SamplerConfig, SelfCorrectConfig
except ImportError:
    from ctmc_core import Schedule, make_schedule
    from datasets import ToyDataset, make_dataset
    from errors import ConfigError, DomainError
    from model import ModelVariant, TwoHeadModel
    from objectives import ObjectiveKind
    from samplers import MAX_SEED, SamplerConfig, SelfCorrectConfig


DEFAULTS_PATH = Path(__file__).parent.parent / 'config' / 'experiment_defaults.yaml'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def load_defaults(defaults_path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Load the nested defaults from the YAML file."""
    path = Path(defaults_path) if defaults_path is not None else DEFAULTS_PATH
    if not path.exists():
        logging.error(f"Defaults file not found: {path}")
        raise ConfigError(f"Defaults file not found: {path}")
    with open(path, 'r') as f:
        return yaml.safe_load(f) or {}


def parse_flat_config(text: str, source: str = '<config>') -> Dict[str, str]:
    """
    Parse ``key = value`` lines. Blank lines and ``#`` comments are skipped,
    surrounding quotes are removed from values.
    """
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()

        if not line or line.startswith('#'):
            continue

        if '=' not in line:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {line!r}")
        key, value = line.split('=', 1)
        key = key.strip()
        value = value.strip()

        if value.startswith('"') and value.endswith('"'):
            value = value[1:-1]
        elif value.startswith("'") and value.endswith("'"):
            value = value[1:-1]

        values[key] = value
    return values


def load_flat_config(config_path: Union[str, Path]) -> Dict[str, str]:
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    return parse_flat_config(path.read_text(encoding='utf-8'), str(path))


def parse_value(raw: Any) -> Any:
    """Typed value of a config string: numbers, booleans, null and [lists] as YAML reads them."""
    if not isinstance(raw, str):
        return raw
    if raw == '':
        return None
    try:
        return yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse config value {raw!r}: {e}") from e


def apply_overrides(defaults: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Set dotted keys (``optimizer.learning_rate``) in a copy of the nested defaults."""
    merged = copy.deepcopy(defaults)
    for key, raw in overrides.items():
        node = merged
        parts = key.split('.')
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"Unknown config key: {key}")
            node = node[part]
        if parts[-1] not in node or isinstance(node[parts[-1]], dict):
            raise ConfigError(f"Unknown config key: {key}")
        node[parts[-1]] = parse_value(raw)
    return merged


def _flatten(values: Dict[str, Any], prefix: str = '') -> Dict[str, Any]:
    flat = {}
    for key, value in values.items():
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{prefix}{key}."))
        else:
            flat[f"{prefix}{key}"] = value
    return flat


def _format_value(value: Any) -> str:
    if value is None:
        return 'null'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple)):
        return '[' + ', '.join(_format_value(v) for v in value) + ']'
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Validated experiment settings.

    ``values`` keeps the nested dictionary the object was built from; the
    typed fields are derived from it.
    """

    values: Dict[str, Any]
    seed: int
    objective: ObjectiveKind
    schedule: Schedule
    sampler: SamplerConfig
    self_correct: SelfCorrectConfig

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> 'ExperimentConfig':
        seed = values.get('seed')
        if seed is None:
            raise ConfigError("seed is required (config key 'seed' or --seed)")
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        try:
            objective = ObjectiveKind(values.get('objective'))
            s = values['schedule']
            schedule = make_schedule(s['kind'], s['num_states'], s['horizon'], s['family'], s['clamp_eps'])
            ModelVariant(values['model']['variant'])
            sp = values['sampler']
            sampler = SamplerConfig(steps=int(sp['steps']), scheme=sp['scheme'], seed=seed,
                                    clamp_eps=sp['clamp_eps'], n_samples=int(sp['n_samples']))
            sc = values['self_correct']
            self_correct = SelfCorrectConfig(float(sc['temperature']), int(sc['max_updates']),
                                             float(sc['noise_level']))
        except (ValueError, DomainError, KeyError, TypeError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        if values['optimizer']['lr_schedule'] not in ('constant', 'linear_decay'):
            raise ConfigError(f"Unknown lr_schedule: {values['optimizer']['lr_schedule']}")
        if str(values['logging']['level']).upper() not in LOG_LEVELS:
            raise ConfigError(f"Unknown logging level: {values['logging']['level']}")
        return cls(values, seed, objective, schedule, sampler, self_correct)

    # -- sections -----------------------------------------------------------

    @property
    def model(self) -> Dict[str, Any]:
        return self.values['model']

    @property
    def optimizer(self) -> Dict[str, Any]:
        return self.values['optimizer']

    @property
    def dataset(self) -> Dict[str, Any]:
        return self.values['dataset']

    @property
    def simulate(self) -> Dict[str, Any]:
        return self.values['simulate']

    @property
    def log_level(self) -> int:
        return getattr(logging, str(self.values['logging']['level']).upper())

    @property
    def wall_clock(self) -> bool:
        return bool(self.values['logging']['wall_clock'])

    # -- builders -----------------------------------------------------------

    def build_model(self) -> TwoHeadModel:
        m = self.model
        return TwoHeadModel(
            m['variant'], self.schedule.num_states, int(m['seq_len']), self.schedule.horizon,
            time_buckets=int(m['time_buckets']), hidden_width=int(m['hidden_width']),
            time_features=int(m['time_features']), seed=self.seed,
        )

    def build_dataset(self) -> ToyDataset:
        return make_dataset(self.dataset, self.schedule, int(self.model['seq_len']))

    def with_overrides(self, **overrides: Any) -> 'ExperimentConfig':
        """New config with dotted keys replaced; keyword ``a__b`` stands for ``a.b``."""
        dotted = {k.replace('__', '.'): v for k, v in overrides.items() if v is not None}
        return ExperimentConfig.from_dict(apply_overrides(self.values, dotted))

    def to_flat(self) -> str:
        return ''.join(f"{k} = {_format_value(v)}\n" for k, v in _flatten(self.values).items())


def load_experiment_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
    defaults_path: Optional[Union[str, Path]] = None,
) -> ExperimentConfig:
    """
    Defaults, then the flat config file, then explicit overrides (command-line flags).
    """
    values = load_defaults(defaults_path)
    if config_path is not None:
        values = apply_overrides(values, load_flat_config(config_path))
    if overrides:
        values = apply_overrides(values, {k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(values)
