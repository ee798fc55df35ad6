import re
from datetime import datetime, timezone
from enum import IntEnum
from typing import Any


class TimeUnit(IntEnum):
    """ Time units, valued in milliseconds. Session logs never need anything finer. """
    MS = 1
    S = 1_000
    MIN = 60_000
    H = 3_600_000

    @staticmethod
    def value_of(s: Any) -> "TimeUnit":
        if isinstance(s, TimeUnit):
            return s
        else:
            match f"{s}".lower():
                case "ms":
                    return TimeUnit.MS
                case "s":
                    return TimeUnit.S
                case "min":
                    return TimeUnit.MIN
                case "h":
                    return TimeUnit.H
                case _:
                    raise RuntimeError(f"Unknown time unit: {s}")

    def to_str(self) -> str:
        return self.name.lower()


class Duration:
    """
    Non-negative or negative span of time with millisecond resolution. Parsed from strings like
    "2000 ms", "2 s", "8 min" or "1.5 h".
    """
    __matcher = re.compile(r"""^\s*(?P<value>-?\d+(?:\.\d+)?)\s*(?P<unit>ms|s|min|h|MS|S|MIN|H)\s*$""")

    def __init__(self, millis: int):
        self.__millis = int(millis)

    def __str__(self):
        unit = self.natural_unit()
        value = self.__millis / unit.value
        return f"{int(value) if value == int(value) else value} {unit.to_str()}"

    def __repr__(self):
        return f"Duration({self.__millis} ms)"

    def __hash__(self):
        return hash(self.__millis)

    def __add__(self, other):
        if isinstance(other, Duration):
            return Duration(self.__millis + other.__millis)
        else:
            raise RuntimeError("Only another duration can be added to a duration")

    def __sub__(self, other):
        if isinstance(other, Duration):
            return Duration(self.__millis - other.__millis)
        else:
            raise RuntimeError("Only another duration can be subtracted from a duration")

    def __mul__(self, scale):
        return Duration(round(self.__millis * scale))

    def __rmul__(self, scale):
        return Duration(round(self.__millis * scale))

    def __eq__(self, other):
        if isinstance(other, Duration):
            return self.__millis == other.__millis
        else:
            raise RuntimeError("Duration can only be compared to another duration")

    def __lt__(self, other):
        if isinstance(other, Duration):
            return self.__millis < other.__millis
        else:
            raise RuntimeError("Duration can only be compared to another duration")

    def __le__(self, other):
        return self < other or self == other

    def __gt__(self, other):
        if isinstance(other, Duration):
            return self.__millis > other.__millis
        else:
            raise RuntimeError("Duration can only be compared to another duration")

    def __ge__(self, other):
        return self > other or self == other

    @property
    def millis(self) -> int:
        return self.__millis

    def to_float(self, time_unit: str | TimeUnit) -> float:
        return self.__millis / TimeUnit.value_of(time_unit).value

    def natural_unit(self) -> TimeUnit:
        """ Largest unit in which this duration is still at least 1. """
        for time_unit in [TimeUnit.H, TimeUnit.MIN, TimeUnit.S]:
            if abs(self.__millis) >= time_unit.value:
                return time_unit
        return TimeUnit.MS

    @staticmethod
    def value_of(s: Any) -> "Duration":
        if isinstance(s, Duration):
            return s
        match_result = Duration.__matcher.match(f"{s}")
        if match_result:
            unit = TimeUnit.value_of(match_result.group("unit"))
            return Duration(round(float(match_result.group("value")) * unit.value))
        else:
            raise RuntimeError(f"Unable to parse \"{s}\" as duration")

    @staticmethod
    def between(start: datetime, end: datetime) -> "Duration":
        """ Signed duration from `start` to `end`, truncated to whole milliseconds. """
        delta = end - start
        return Duration((delta.days * 86_400_000) + (delta.seconds * 1_000) + delta.microseconds // 1_000)


def parse_timestamp(s: str) -> datetime:
    """
    Parse ISO-8601 timestamp into an aware UTC datetime truncated to milliseconds.
    Naive timestamps are taken to be UTC. Raises ValueError on anything unparsable.
    """
    value = datetime.fromisoformat(s.strip())
    if value.tzinfo is None:
        value = value.replace(tzinfo = timezone.utc)
    else:
        value = value.astimezone(timezone.utc)
    return value.replace(microsecond = (value.microsecond // 1_000) * 1_000)


def format_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.") + f"{value.microsecond // 1_000:03d}Z"
