import math
from fractions import Fraction
from typing import Any, Mapping, Optional

import orjson
from humanfriendly import format_timespan


def format_value(value) -> str:
    """Render an extended rational: ``3/4``, ``2`` or ``infinity``."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "infinity"
        return repr(value)
    if isinstance(value, Fraction) and value.denominator == 1:
        return str(value.numerator)
    return str(value)


def parse_value(text: str):
    """Inverse of :func:`format_value` for values given on the command line."""
    text = text.strip()
    if text in ("infinity", "inf"):
        return math.inf
    return Fraction(text)


def parse_assignment(text: Optional[str]) -> Mapping[str, Fraction]:
    """Parse ``"c=0,x=5"`` into a variable assignment."""
    if not text:
        return {}
    result = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, _, value = part.partition("=")
        if not _:
            raise ValueError(f"expected name=value, got {part!r}")
        result[name.strip()] = Fraction(value.strip())
    return result


def json_serial(obj: Any):
    """orjson ``default`` hook for values orjson cannot serialize itself."""
    if isinstance(obj, Fraction):
        return format_value(obj)
    if isinstance(obj, Mapping):
        return {str(k): v for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"Type {type(obj)} not serializable")


def _finite_floats(data: Any) -> Any:
    # orjson writes non-finite floats as null
    if isinstance(data, float) and math.isinf(data):
        return "infinity"
    if isinstance(data, dict):
        return {k: _finite_floats(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_finite_floats(v) for v in data]
    return data


def to_json(data: Any, pretty: bool = False) -> str:
    option = orjson.OPT_INDENT_2 if pretty else 0
    return orjson.dumps(_finite_floats(data), default=json_serial, option=option).decode()


def from_json(json_str: Optional[str]):
    return orjson.loads(json_str) if json_str else None


def humanize_duration(seconds: float) -> str:
    return format_timespan(seconds, detailed=False, max_units=2)
