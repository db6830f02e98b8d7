""" Run configuration: one YAML document covering assembly and the streaming pipeline.

    assembler:
      tcp_inactivity_timeout_s: 300
      udp_inactivity_timeout_s: 60
      icmp_inactivity_timeout_s: 60
      max_pending_sessions: 100000   # finished sessions held behind an older open flow
      local_prefixes: [10.0.0.0/8]
      service_mappings:
        - {port: 3306, protocol: tcp, service: mysql}
    pipeline:
      queue_capacity: 10000
      classifier_worker_count: 2
      sink_kind: jsonl
      replay_rate: unlimited     # or sessions per second
    bench:
      throughput_interval_s: 30
      latency_interval_s: 10
    seed: 0

Flags given on the command line win over the file.
"""
import logging
from typing import Any, Dict, List, Optional, Union

import attr
import cattrs
import yaml

from nids.errors import ConfigError
from nids.services import DEFAULT_LOCAL_PREFIXES, LocalPrefixes, ServiceMap
from utils.enum_utils import StrEnum
from utils.file_utils import ensure_path
from utils.serialization import to_native_types

logger = logging.getLogger(__name__)

UNLIMITED = 'unlimited'


class SinkKind(StrEnum):
    JSONL = 'jsonl'
    EMBEDDED = 'embedded'
    NULL = 'null'


def _positive(_, attribute, value):
    if value <= 0:
        raise ConfigError(f"{attribute.name} must be > 0, got {value}")


def _at_least_one(_, attribute, value):
    if value < 1:
        raise ConfigError(f"{attribute.name} must be >= 1, got {value}")


@attr.define
class AssemblerConfig:
    tcp_inactivity_timeout_s: float = attr.ib(default=300.0, validator=_positive)
    udp_inactivity_timeout_s: float = attr.ib(default=60.0, validator=_positive)
    icmp_inactivity_timeout_s: float = attr.ib(default=60.0, validator=_positive)
    reorder_tolerance_s: float = attr.ib(default=1.0, validator=_positive)
    # finished sessions held back behind an older open flow; past this the oldest go out anyway
    max_pending_sessions: int = attr.ib(default=100_000, validator=_at_least_one)
    local_prefixes: List[str] = attr.ib(factory=lambda: list(DEFAULT_LOCAL_PREFIXES))
    service_mappings: List[Dict[str, Any]] = attr.Factory(list)

    def __attrs_post_init__(self):
        # fail at load time, never per record
        self.get_local_prefixes()
        self.get_service_map()

    def get_local_prefixes(self) -> LocalPrefixes:
        return LocalPrefixes.from_strings(self.local_prefixes)

    def get_service_map(self) -> ServiceMap:
        return ServiceMap.from_config_rows(self.service_mappings)


@attr.define
class PipelineConfig:
    queue_capacity: int = attr.ib(default=10_000, validator=_at_least_one)
    classifier_worker_count: int = attr.ib(default=2, validator=_at_least_one)   # two classifier pods originally
    codec_worker_count: int = attr.ib(default=1, validator=_at_least_one)
    sink_kind: SinkKind = attr.ib(default=SinkKind.JSONL, converter=SinkKind)
    sink_path: Optional[str] = None
    replay_rate: Union[float, str] = UNLIMITED
    model_path: Optional[str] = None
    spec_path: Optional[str] = None
    fail_open: bool = True
    sink_retries: int = attr.ib(default=3, validator=_at_least_one)

    def __attrs_post_init__(self):
        if self.replay_rate != UNLIMITED:
            try:
                self.replay_rate = float(self.replay_rate)
            except (TypeError, ValueError):
                raise ConfigError(f"replay_rate must be a positive number or {UNLIMITED!r}, got {self.replay_rate!r}")
            if self.replay_rate <= 0:
                raise ConfigError(f"replay_rate must be > 0, got {self.replay_rate}")

    def get_rate_or_none(self) -> Optional[float]:
        """ None means unlimited """
        return None if self.replay_rate == UNLIMITED else float(self.replay_rate)


@attr.define
class BenchConfig:
    """ Measurement windows. A bench run has to last at least half a throughput interval. """
    throughput_interval_s: float = attr.ib(default=30.0, validator=_positive)
    latency_interval_s: float = attr.ib(default=10.0, validator=_positive)


@attr.define
class CommandRecord:
    """ The subcommand and its arguments, as recorded next to the config of a run. """
    name: str
    args: Dict[str, Any] = attr.Factory(dict)


@attr.define
class RunConfig:
    assembler: AssemblerConfig = attr.Factory(AssemblerConfig)
    pipeline: PipelineConfig = attr.Factory(PipelineConfig)
    bench: BenchConfig = attr.Factory(BenchConfig)
    seed: int = 0
    include_current_session: bool = False    # host features count the session itself
    command: Optional[CommandRecord] = None   # filled in by the command line, replayed by `nids rerun`

    @classmethod
    def from_defaults(cls) -> 'RunConfig':
        return cls()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        known = {f.name for f in attr.fields(cls)}
        if unknown := set(data) - known:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        try:
            return _config_converter().structure(data, cls)
        except ConfigError:
            raise
        except Exception as e:   # cattrs wraps validator errors into exception groups
            raise ConfigError(f"invalid config: {e}") from e

    @classmethod
    def from_yaml_path(cls, path: str) -> 'RunConfig':
        try:
            with open(path) as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config {path} is not valid YAML: {e}") from e

        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping at the top level")

        logger.info(f"loaded config from {path}")
        return cls.from_dict(data)

    def with_overrides(self, **overrides: Any) -> 'RunConfig':
        """ Dotted keys: with_overrides(**{'pipeline.queue_capacity': 1, 'seed': 3}). None values are ignored. """
        data = self.to_dict()
        for dotted_key, value in overrides.items():
            if value is None:
                continue
            node = data
            *parents, leaf = dotted_key.split('.')
            for parent in parents:
                node = node[parent]
            if leaf not in node:
                raise ConfigError(f"unknown config key {dotted_key!r}")
            node[leaf] = value
        return RunConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return to_native_types(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def write_resolved(self, path: str) -> str:
        path = ensure_path(path)
        with open(path, 'w') as f:
            f.write(self.to_yaml())
        return path


def _config_converter() -> cattrs.GenConverter:
    converter = cattrs.GenConverter(forbid_extra_keys=True)
    converter.register_structure_hook_func(
        lambda t: t == Union[float, str],
        lambda v, _: v if isinstance(v, str) else float(v)
    )
    return converter
