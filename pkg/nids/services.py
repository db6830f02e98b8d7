""" Direction and service classification of a session's endpoints. """
import ipaddress
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import attr

from nids.errors import ConfigError
from nids.types import Direction, Protocol, ServiceType
from utils.enum_utils import parse_enum

IPNetwork = Union[ipaddress.IPv4Network, ipaddress.IPv6Network]

DEFAULT_LOCAL_PREFIXES = ('10.0.0.0/8', '172.16.0.0/12', '192.168.0.0/16')

# IANA well-known subset
DEFAULT_SERVICE_PORTS: Dict[Tuple[int, Protocol], str] = {
    (20, Protocol.TCP): ServiceType.FTP,
    (21, Protocol.TCP): ServiceType.FTP,
    (22, Protocol.TCP): ServiceType.SSH,
    (25, Protocol.TCP): ServiceType.SMTP,
    (53, Protocol.TCP): ServiceType.DNS,
    (53, Protocol.UDP): ServiceType.DNS,
    (80, Protocol.TCP): ServiceType.HTTP,
    (443, Protocol.TCP): ServiceType.HTTPS,
    (465, Protocol.TCP): ServiceType.SMTP,
    (587, Protocol.TCP): ServiceType.SMTP,
    (8080, Protocol.TCP): ServiceType.HTTP,
}


@attr.frozen
class LocalPrefixes:
    networks: Tuple[IPNetwork, ...]

    @classmethod
    def from_strings(cls, prefixes: Iterable[str]) -> 'LocalPrefixes':
        networks = []
        for prefix in prefixes:
            try:
                networks.append(ipaddress.ip_network(prefix, strict=False))
            except ValueError as e:
                raise ConfigError(f"malformed local prefix {prefix!r}: {e}") from e

        if not networks:
            raise ConfigError("at least one local prefix is required")

        return cls(networks=tuple(networks))

    @classmethod
    def from_defaults(cls) -> 'LocalPrefixes':
        return cls.from_strings(DEFAULT_LOCAL_PREFIXES)

    def is_local(self, addr: str) -> bool:
        ip = ipaddress.ip_address(addr)
        return any(ip.version == net.version and ip in net for net in self.networks)

    def as_strings(self) -> List[str]:
        return [str(net) for net in self.networks]


def direction_of(src: str, dst: str, local_prefixes: Union[LocalPrefixes, Sequence[str]]) -> Direction:
    if not isinstance(local_prefixes, LocalPrefixes):
        local_prefixes = LocalPrefixes.from_strings(local_prefixes)

    match local_prefixes.is_local(src), local_prefixes.is_local(dst):
        case True, True:
            return Direction.L2L
        case True, False:
            return Direction.L2R
        case False, True:
            return Direction.R2L
        case _:
            return Direction.R2R


@attr.frozen
class ServiceMap:
    """ (destination port, protocol) -> service name. Unknown ports are OTHER. """
    entries: Mapping[Tuple[int, Protocol], str] = attr.ib(factory=lambda: dict(DEFAULT_SERVICE_PORTS))

    @classmethod
    def from_defaults(cls) -> 'ServiceMap':
        return cls()

    @classmethod
    def from_config_rows(cls, rows: Iterable[Mapping], include_defaults: bool = True) -> 'ServiceMap':
        """ rows look like {port: 3306, protocol: tcp, service: mysql} """
        entries = dict(DEFAULT_SERVICE_PORTS) if include_defaults else {}
        for row in rows:
            try:
                port = int(row['port'])
                protocol = parse_enum(Protocol, str(row['protocol']))
                service = str(row['service']).strip().lower()
            except (KeyError, ValueError) as e:
                raise ConfigError(f"bad service mapping row {dict(row)!r}: {e}") from e
            if not 0 <= port <= 65535 or not service:
                raise ConfigError(f"bad service mapping row {dict(row)!r}")
            entries[(port, protocol)] = service
        return cls(entries=entries)

    def to_config_rows(self) -> List[Dict]:
        return [
            {'port': port, 'protocol': str(protocol), 'service': str(service)}
            for (port, protocol), service in sorted(self.entries.items(), key=lambda kv: (kv[0][0], kv[0][1].value))
        ]


def service_of(dst_port: int, protocol: Protocol, mapping: ServiceMap) -> str:
    if protocol is Protocol.ICMP:
        return ServiceType.OTHER
    return mapping.entries.get((dst_port, protocol), ServiceType.OTHER)
