"""Streaming AIVDM decoder for AIS position reports (message types 1, 2, 3, 18, 19).

Only the fields needed for trajectory mining are extracted: MMSI, navigational
status, position, speed and course over ground.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Iterator, Sequence

from .errors import (
    ChecksumError,
    DecodeError,
    DuplicateFragmentError,
    FramingError,
    IncompleteMessageError,
    TruncationError,
)

log = logging.getLogger(__name__)

POSITION_TYPES = frozenset({1, 2, 3, 18, 19})

LAT_UNAVAILABLE = 91 * 600_000
LON_UNAVAILABLE = 181 * 600_000
SOG_UNAVAILABLE = 1023
COG_UNAVAILABLE = 3600


def checksum(body: str) -> int:
    return reduce(lambda acc, ch: acc ^ ord(ch), body, 0)


def _split_frame(sentence: str) -> tuple[str, str]:
    """Return (body, stated checksum hex) for '!body*hh'."""
    s = sentence.strip()
    if s.count("!") != 1 or not s.startswith("!"):
        raise FramingError(f"sentence must start with a single '!': {sentence!r}")
    if s.count("*") != 1:
        raise FramingError(f"sentence must contain exactly one '*': {sentence!r}")
    body, stated = s[1:].split("*")
    if len(stated) != 2 or any(c not in "0123456789abcdefABCDEF" for c in stated):
        raise FramingError(f"checksum suffix is not two hex digits: {stated!r}")
    return body, stated


def validate_checksum(sentence: str) -> bool:
    """True iff the XOR of all characters between '!' and '*' equals the stated value.

    Raises FramingError when the sentence is not framed as ``!body*hh``.
    """
    body, stated = _split_frame(sentence)
    return checksum(body) == int(stated, 16)


def dearmor(ch: str, position: int | None = None) -> int:
    code = ord(ch)
    if not (48 <= code <= 87 or 96 <= code <= 119):
        where = "" if position is None else f" at position {position}"
        raise DecodeError(f"character {ch!r}{where} is outside the 6-bit armoring alphabet")
    v = code - 48
    if v > 40:
        v -= 8
    return v


def armor(value: int) -> str:
    if not 0 <= value <= 63:
        raise ValueError(f"6-bit value out of range: {value}")
    return chr(value + 48 if value < 40 else value + 56)


@dataclass(frozen=True, slots=True)
class RawSentence:
    text: str
    fragment_count: int
    fragment_index: int
    message_id: int | None
    channel: str
    payload: str
    fill_bits: int
    checksum: str

    @classmethod
    def parse(cls, text: str) -> RawSentence:
        body, stated = _split_frame(text)
        fields = body.split(",")
        if len(fields) != 7 or not fields[0].endswith("VDM") and not fields[0].endswith("VDO"):
            raise FramingError(f"not an AIVDM/AIVDO sentence: {text!r}")
        try:
            count = int(fields[1])
            index = int(fields[2])
            fill = int(fields[6])
        except ValueError as exc:
            raise FramingError(f"non-numeric fragment fields in {text!r}") from exc
        msg_id = int(fields[3]) if fields[3] else None
        if count < 1 or not 1 <= index <= count:
            raise FramingError(f"bad fragment numbering {index}/{count} in {text!r}")
        if not 0 <= fill <= 5:
            raise FramingError(f"fill bits out of range: {fill}")
        return cls(text.strip(), count, index, msg_id, fields[4], fields[5], fill, stated)


class BitBuffer:
    """Immutable bit string backed by a Python int (bit 0 is the most significant)."""

    __slots__ = ("_value", "length")

    def __init__(self, value: int, length: int) -> None:
        self._value = value
        self.length = length

    @classmethod
    def from_payload(cls, payload: str, fill_bits: int = 0) -> BitBuffer:
        value = 0
        for i, ch in enumerate(payload):
            value = (value << 6) | dearmor(ch, i)
        length = 6 * len(payload) - fill_bits
        if length < 0:
            raise DecodeError("fill bits exceed payload length")
        return cls(value >> fill_bits, length)

    def __len__(self) -> int:
        return self.length

    def uint(self, start: int, width: int) -> int:
        if start + width > self.length:
            raise TruncationError(f"need bits {start}..{start + width - 1}, buffer has {self.length}")
        shift = self.length - start - width
        return (self._value >> shift) & ((1 << width) - 1)

    def int(self, start: int, width: int) -> int:
        v = self.uint(start, width)
        if v & (1 << (width - 1)):
            v -= 1 << width
        return v

    def bits(self) -> str:
        return format(self._value, f"0{self.length}b") if self.length else ""


def assemble(fragments: Sequence[RawSentence]) -> BitBuffer:
    """Concatenate the de-armored payloads of one multipart message, in fragment order."""
    if not fragments:
        raise IncompleteMessageError("no fragments")
    first = fragments[0]
    count = first.fragment_count
    by_index: dict[int, RawSentence] = {}
    for frag in fragments:
        if (frag.message_id, frag.channel, frag.fragment_count) != (first.message_id, first.channel, count):
            raise DecodeError("fragments belong to different messages")
        if frag.fragment_index in by_index:
            raise DuplicateFragmentError(f"fragment {frag.fragment_index} seen twice")
        by_index[frag.fragment_index] = frag
    missing = [i for i in range(1, count + 1) if i not in by_index]
    if missing:
        raise IncompleteMessageError(f"missing fragment(s) {missing} of {count}")
    payload = "".join(by_index[i].payload for i in range(1, count + 1))
    return BitBuffer.from_payload(payload, by_index[count].fill_bits)


@dataclass(frozen=True, slots=True)
class PositionReport:
    msg_type: int
    mmsi: int
    lat: float
    lon: float
    sog: float | None
    cog: float | None
    nav_status: int | None


@dataclass(frozen=True, slots=True)
class Skip:
    """Outcome for a well-formed message that yields no position record."""

    msg_type: int
    reason: str


# (mmsi, nav_status | None, sog, lon, lat, cog) bit offsets; widths are fixed
_LAYOUT_CLASS_A = dict(nav=38, sog=50, lon=61, lat=89, cog=116, end=128)
_LAYOUT_CLASS_B = dict(nav=None, sog=46, lon=57, lat=85, cog=112, end=124)


def decode_position_report(bits: BitBuffer) -> PositionReport | Skip:
    msg_type = bits.uint(0, 6)
    if msg_type not in POSITION_TYPES:
        return Skip(msg_type, "not a position report")
    layout = _LAYOUT_CLASS_A if msg_type <= 3 else _LAYOUT_CLASS_B
    if len(bits) < layout["end"]:
        raise TruncationError(f"type {msg_type} needs {layout['end']} bits, got {len(bits)}")
    mmsi = bits.uint(8, 30)
    nav = bits.uint(layout["nav"], 4) if layout["nav"] is not None else None
    raw_sog = bits.uint(layout["sog"], 10)
    raw_lon = bits.int(layout["lon"], 28)
    raw_lat = bits.int(layout["lat"], 27)
    raw_cog = bits.uint(layout["cog"], 12)
    if raw_lat == LAT_UNAVAILABLE or raw_lon == LON_UNAVAILABLE:
        return Skip(msg_type, "position unavailable")
    lat = raw_lat / 600_000.0
    lon = raw_lon / 600_000.0
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return Skip(msg_type, "position out of range")
    sog = None if raw_sog == SOG_UNAVAILABLE else raw_sog / 10.0
    cog = None if raw_cog >= COG_UNAVAILABLE else raw_cog / 10.0
    return PositionReport(msg_type, mmsi, lat, lon, sog, cog, nav)


@dataclass
class DecodeStats:
    lines: int = 0
    sentences: int = 0
    framing_errors: int = 0
    checksum_failures: int = 0
    decode_errors: int = 0
    incomplete: int = 0
    messages: int = 0
    by_type: Counter = field(default_factory=Counter)
    positions: int = 0
    position_unavailable: int = 0
    no_timestamp: int = 0

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "by_type"}
        d["by_type"] = {str(k): v for k, v in sorted(self.by_type.items())}
        return d


@dataclass(frozen=True, slots=True)
class TimedReport:
    timestamp: float | None  # epoch seconds from the receiver/broker, if known
    report: PositionReport


def split_timestamp(line: str) -> tuple[float | None, str]:
    """Strip an 'epoch<TAB>' prefix or an NMEA 4.0 tag block carrying 'c:epoch'."""
    ts: float | None = None
    line = line.strip()
    if "\t" in line:
        head, line = line.split("\t", 1)
        ts = float(head)
    if line.startswith("\\"):
        end = line.index("\\", 1)
        tag, line = line[1:end], line[end + 1 :]
        for part in tag.split("*")[0].split(","):
            if part.startswith("c:"):
                ts = float(part[2:])
                if ts > 1e11:  # milliseconds
                    ts /= 1000.0
    return ts, line


class AivdmDecoder:
    """Stateful line decoder.

    Multipart fragments are buffered per (channel, message id) and dropped if
    the message is not complete after ``expire_after`` further sentences.
    """

    def __init__(self, strict: bool = False, expire_after: int = 32) -> None:
        self.strict = strict
        self.expire_after = expire_after
        self.stats = DecodeStats()
        self._pending: dict[tuple[str, int | None], tuple[int, float | None, list[RawSentence]]] = {}

    def feed(self, line: str) -> Iterator[TimedReport]:
        if not line.strip():
            return
        self.stats.lines += 1
        try:
            ts, text = split_timestamp(line)
            sentence = RawSentence.parse(text)
        except (FramingError, ValueError) as exc:
            self.stats.framing_errors += 1
            if self.strict:
                raise FramingError(str(exc)) from exc
            return
        self.stats.sentences += 1
        if not validate_checksum(sentence.text):
            self.stats.checksum_failures += 1
            if self.strict:
                raise ChecksumError(f"checksum mismatch: {sentence.text!r}")
            return
        self._expire()
        if sentence.fragment_count == 1:
            yield from self._decode([sentence], ts)
            return
        key = (sentence.channel, sentence.message_id)
        if sentence.fragment_index == 1 and key in self._pending:
            self.stats.incomplete += 1
            del self._pending[key]
        born, first_ts, frags = self._pending.setdefault(key, (self.stats.sentences, ts, []))
        frags.append(sentence)
        if len(frags) == sentence.fragment_count:
            del self._pending[key]
            yield from self._decode(frags, first_ts)

    def _expire(self) -> None:
        now = self.stats.sentences
        for key in [k for k, (born, _, _) in self._pending.items() if now - born > self.expire_after]:
            del self._pending[key]
            self.stats.incomplete += 1

    def _decode(self, frags: list[RawSentence], ts: float | None) -> Iterator[TimedReport]:
        try:
            bits = assemble(frags)
            if len(bits) < 6:
                raise TruncationError("payload shorter than the message type field")
            self.stats.messages += 1
            self.stats.by_type[bits.uint(0, 6)] += 1
            out = decode_position_report(bits)
        except (DecodeError, TruncationError, IncompleteMessageError, DuplicateFragmentError) as exc:
            self.stats.decode_errors += 1
            if self.strict:
                raise
            log.debug("dropping message: %s", exc)
            return
        if isinstance(out, Skip):
            if out.reason != "not a position report":
                self.stats.position_unavailable += 1
            return
        self.stats.positions += 1
        if ts is None:
            self.stats.no_timestamp += 1
        yield TimedReport(ts, out)

    def finish(self) -> None:
        """Count whatever multipart messages are still incomplete at end of input."""
        self.stats.incomplete += len(self._pending)
        self._pending.clear()


def decode_lines(lines: Iterable[str], strict: bool = False) -> tuple[list[TimedReport], DecodeStats]:
    dec = AivdmDecoder(strict=strict)
    out: list[TimedReport] = []
    for line in lines:
        out.extend(dec.feed(line))
    dec.finish()
    return out, dec.stats
