"""RFC 3339 timestamp helpers.

All timestamps in ctro are timezone-aware UTC datetimes.  The canonical
text form is ``YYYY-MM-DDTHH:MM:SSZ``, with a fractional part appended
only when the value has sub-second precision, so re-serializing a parsed
value is deterministic.
"""

from datetime import datetime, timezone


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def parse(text: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime.

    Accepts 'Z' or numeric offsets; naive inputs are taken as UTC.
    Raises ValueError on malformed input.
    """
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format(dt: datetime) -> str:
    """Canonical RFC 3339 form (UTC, 'Z' suffix, fraction only if nonzero)."""
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%f").rstrip("0") + "Z"
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def to_epoch_us(dt: datetime) -> int:
    """Microseconds since the Unix epoch (UTC), exact integer arithmetic."""
    delta = dt.astimezone(timezone.utc) - _EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1_000_000 + delta.microseconds


def from_epoch_us(us: int) -> datetime:
    from datetime import timedelta

    return _EPOCH + timedelta(microseconds=us)
