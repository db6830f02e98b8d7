from enum import Enum
from typing import Optional, Type, TypeVar


class StrEnum(str, Enum):
    def __str__(self) -> str:
        return self.value


E = TypeVar('E', bound=StrEnum)


def parse_enum(enum_type: Type[E], raw: str, default_or_none: Optional[E] = None) -> E:
    """ Case-insensitive lookup by value, then by name. Falls back to default if given. """
    lowered = raw.strip().lower()
    for member in enum_type:
        if member.value.lower() == lowered or member.name.lower() == lowered:
            return member

    if default_or_none is not None:
        return default_or_none

    raise ValueError(f"{raw!r} is not a valid {enum_type.__name__}")
