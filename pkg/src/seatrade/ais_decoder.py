"""NMEA 0183 AIS sentence decoding (AIVDM/AIVDO).

Handles the six-bit payload armoring, fragment reassembly and the bit
layouts of position reports (types 1, 2, 3, 18, 19) and static/voyage
reports (types 5, 24).  Corrupt or unsupported input never aborts a
stream: every line ends up as either a decoded report or a counted skip.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union


class AisError(Exception):
    pass


class MalformedSentence(AisError):
    pass


class ChecksumMismatch(AisError):
    pass


class NonAisTalker(AisError):
    pass


class InvalidArmorCharacter(AisError):
    pass


class MissingFragment(AisError):
    pass


class DuplicateFragment(AisError):
    pass


class MixedGroup(AisError):
    pass


class UnsupportedMessageType(AisError):
    pass


class TruncatedPayload(AisError):
    pass


POSITION_TYPES = frozenset({1, 2, 3, 18, 19})
STATIC_TYPES = frozenset({5, 24})

# AIS sentinel raw values
_LON_NA = 181 * 600000
_LAT_NA = 91 * 600000
_SOG_NA = 1023
_COG_NA = 3600


@dataclass(frozen=True)
class NmeaSentence:
    """One parsed !xxVDM/!xxVDO line (checksum already verified)."""

    talker: str
    fragment_count: int
    fragment_index: int
    message_id: Optional[int]
    channel: str
    payload: str
    fill_bits: int
    checksum: int
    epoch: Optional[float] = None  # from a prepended "epoch_seconds\t" tag


@dataclass(frozen=True)
class PositionReport:
    mmsi: int
    timestamp: Optional[float]  # epoch seconds, from the line tag
    latitude: Optional[float]
    longitude: Optional[float]
    speed_over_ground: Optional[float]  # knots
    course: Optional[float]  # degrees [0, 360)
    msg_type: int
    second: int  # UTC second-of-minute field


@dataclass(frozen=True)
class StaticVoyageReport:
    mmsi: int
    imo: Optional[int]
    ship_type_code: Optional[int]
    dim_to_bow: int
    dim_to_stern: int
    dim_to_port: int
    dim_to_starboard: int
    draught: Optional[float]  # meters (raw field is tenths of a meter)
    destination: str
    name: str
    msg_type: int
    timestamp: Optional[float] = None

    @property
    def length(self) -> int:
        return self.dim_to_bow + self.dim_to_stern

    @property
    def beam(self) -> int:
        return self.dim_to_port + self.dim_to_starboard


class Bits:
    """Bit sequence decoded from an armored payload.

    Stored as one big integer plus a length; extraction is shift/mask.
    Bit 0 is the first (most significant) bit of the first character.
    """

    __slots__ = ("_value", "_length")

    def __init__(self, value: int, length: int):
        self._value = value
        self._length = length

    def __len__(self) -> int:
        return self._length

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Bits)
            and self._length == other._length
            and self._value == other._value
        )

    def __hash__(self) -> int:
        return hash((self._value, self._length))

    def to01(self) -> str:
        return format(self._value, f"0{self._length}b") if self._length else ""

    def uint(self, offset: int, width: int) -> int:
        if offset + width > self._length:
            raise TruncatedPayload(
                f"need bits [{offset}:{offset + width}], have {self._length}"
            )
        return (self._value >> (self._length - offset - width)) & ((1 << width) - 1)

    def sint(self, offset: int, width: int) -> int:
        v = self.uint(offset, width)
        if v & (1 << (width - 1)):
            v -= 1 << width
        return v

    def text(self, offset: int, width: int) -> str:
        """Six-bit ASCII: 0-31 -> '@'..'_', 32-63 -> ' '..'?'."""
        chars = []
        for k in range(0, width, 6):
            v = self.uint(offset + k, 6)
            chars.append(chr(v + 64) if v < 32 else chr(v))
        return "".join(chars).rstrip("@ ").rstrip()


def nmea_checksum(body: str) -> int:
    """XOR fold of every character strictly between '!' and '*'."""
    acc = 0
    for ch in body:
        acc ^= ord(ch)
    return acc


def parse_sentence(line: str) -> NmeaSentence:
    """Parse one text line into an NmeaSentence, verifying the checksum.

    An optional "epoch_seconds\\t" prefix (archived feeds) is accepted and
    carried through as the receive time.
    """
    line = line.rstrip("\r\n")
    epoch: Optional[float] = None
    if "\t" in line:
        tag, _, rest = line.partition("\t")
        try:
            epoch = float(tag)
        except ValueError:
            raise MalformedSentence(f"bad epoch tag {tag!r}")
        line = rest
    if not line.startswith("!"):
        raise MalformedSentence("sentence must start with '!'")
    star = line.rfind("*")
    if star < 0 or len(line) < star + 3:
        raise MalformedSentence("missing checksum")
    body = line[1:star]
    try:
        stated = int(line[star + 1 : star + 3], 16)
    except ValueError:
        raise MalformedSentence(f"bad checksum field {line[star + 1:star + 3]!r}")
    computed = nmea_checksum(body)
    if computed != stated:
        raise ChecksumMismatch(f"stated {stated:02X}, computed {computed:02X}")
    fields = body.split(",")
    if len(fields) != 7:
        raise MalformedSentence(f"expected 7 fields, got {len(fields)}")
    tag = fields[0]
    if len(tag) != 5 or tag[2:] not in ("VDM", "VDO"):
        raise NonAisTalker(tag)
    try:
        count = int(fields[1])
        index = int(fields[2])
    except ValueError:
        raise MalformedSentence("non-numeric fragment fields")
    message_id = int(fields[3]) if fields[3] else None
    channel = fields[4]
    payload = fields[5]
    try:
        fill = int(fields[6])
    except ValueError:
        raise MalformedSentence(f"bad fill bits {fields[6]!r}")
    if not (1 <= index <= count):
        raise MalformedSentence(f"fragment {index}/{count} out of range")
    if not (0 <= fill <= 5):
        raise MalformedSentence(f"fill bits {fill} out of range")
    return NmeaSentence(
        talker=tag,
        fragment_count=count,
        fragment_index=index,
        message_id=message_id,
        channel=channel,
        payload=payload,
        fill_bits=fill,
        checksum=stated,
        epoch=epoch,
    )


def assemble_payload(fragments: list[NmeaSentence]) -> tuple[str, int]:
    """Concatenate a fragment group into one payload.

    Fragments must agree on channel and message id, and indices 1..count
    must each be present exactly once.  Fill bits come from the final
    fragment (earlier fragments carry none).
    """
    if not fragments:
        raise MissingFragment("empty group")
    first = fragments[0]
    count = first.fragment_count
    key = (first.channel, first.message_id)
    slots: list[Optional[NmeaSentence]] = [None] * count
    for frag in fragments:
        if (frag.channel, frag.message_id) != key or frag.fragment_count != count:
            raise MixedGroup(f"{key} vs {(frag.channel, frag.message_id)}")
        i = frag.fragment_index - 1
        if slots[i] is not None:
            raise DuplicateFragment(f"index {frag.fragment_index}")
        slots[i] = frag
    missing = [i + 1 for i, s in enumerate(slots) if s is None]
    if missing:
        raise MissingFragment(f"indices {missing}")
    payload = "".join(s.payload for s in slots)  # type: ignore[union-attr]
    return payload, slots[-1].fill_bits  # type: ignore[union-attr]


def decode_sixbit(payload: str, fill_bits: int) -> Bits:
    """Dearmor a payload: each char yields 6 bits, MSB first.

    v = code - 48, then v -= 8 when v > 40.  Valid armor characters are
    ASCII 48..87 and 96..119.
    """
    acc = 0
    for ch in payload:
        code = ord(ch)
        if not (48 <= code <= 87 or 96 <= code <= 119):
            raise InvalidArmorCharacter(repr(ch))
        v = code - 48
        if v > 40:
            v -= 8
        acc = (acc << 6) | v
    nbits = 6 * len(payload) - fill_bits
    if fill_bits:
        acc >>= fill_bits
    return Bits(acc, nbits)


def _sog(raw: int) -> Optional[float]:
    return None if raw == _SOG_NA else raw / 10.0


def _lon(raw: int) -> Optional[float]:
    return None if raw == _LON_NA else raw / 600000.0


def _lat(raw: int) -> Optional[float]:
    return None if raw == _LAT_NA else raw / 600000.0


def _cog(raw: int) -> Optional[float]:
    return None if raw == _COG_NA else raw / 10.0


def decode_position(bits: Bits, timestamp: Optional[float] = None) -> PositionReport:
    """Decode a type 1/2/3/18/19 payload into a PositionReport."""
    msg_type = bits.uint(0, 6)
    if msg_type not in POSITION_TYPES:
        raise UnsupportedMessageType(str(msg_type))
    mmsi = bits.uint(8, 30)
    if msg_type in (1, 2, 3):
        sog = _sog(bits.uint(50, 60 - 50))
        lon = _lon(bits.sint(61, 28))
        lat = _lat(bits.sint(89, 27))
        cog = _cog(bits.uint(116, 12))
        second = bits.uint(137, 6)
    else:  # 18, 19 share the class-B layout for these fields
        sog = _sog(bits.uint(46, 10))
        lon = _lon(bits.sint(57, 28))
        lat = _lat(bits.sint(85, 27))
        cog = _cog(bits.uint(112, 12))
        second = bits.uint(133, 6)
    return PositionReport(
        mmsi=mmsi,
        timestamp=timestamp,
        latitude=lat,
        longitude=lon,
        speed_over_ground=sog,
        course=cog,
        msg_type=msg_type,
        second=second,
    )


def decode_static(bits: Bits, timestamp: Optional[float] = None) -> StaticVoyageReport:
    """Decode a type 5 or 24 payload into a StaticVoyageReport."""
    msg_type = bits.uint(0, 6)
    if msg_type not in STATIC_TYPES:
        raise UnsupportedMessageType(str(msg_type))
    mmsi = bits.uint(8, 30)
    if msg_type == 5:
        imo_raw = bits.uint(40, 30)
        draught_raw = bits.uint(294, 8)
        return StaticVoyageReport(
            mmsi=mmsi,
            imo=imo_raw or None,
            ship_type_code=bits.uint(232, 8),
            dim_to_bow=bits.uint(240, 9),
            dim_to_stern=bits.uint(249, 9),
            dim_to_port=bits.uint(258, 6),
            dim_to_starboard=bits.uint(264, 6),
            draught=None if draught_raw == 0 else draught_raw / 10.0,
            destination=bits.text(302, 120),
            name=bits.text(112, 120),
            msg_type=5,
            timestamp=timestamp,
        )
    part = bits.uint(38, 2)
    if part == 0:
        return StaticVoyageReport(
            mmsi=mmsi,
            imo=None,
            ship_type_code=None,
            dim_to_bow=0,
            dim_to_stern=0,
            dim_to_port=0,
            dim_to_starboard=0,
            draught=None,
            destination="",
            name=bits.text(40, 120),
            msg_type=24,
            timestamp=timestamp,
        )
    return StaticVoyageReport(
        mmsi=mmsi,
        imo=None,
        ship_type_code=bits.uint(40, 8),
        dim_to_bow=bits.uint(132, 9),
        dim_to_stern=bits.uint(141, 9),
        dim_to_port=bits.uint(150, 6),
        dim_to_starboard=bits.uint(156, 6),
        draught=None,
        destination="",
        name="",
        msg_type=24,
        timestamp=timestamp,
    )


Report = Union[PositionReport, StaticVoyageReport]

# Fragment groups older than this (stream time) are abandoned.
FRAGMENT_TIMEOUT_S = 5.0


class StreamDecoder:
    """Stateful line-at-a-time decoder with per-category skip counters.

    Fragment groups are keyed by (channel, message id) and expire after
    FRAGMENT_TIMEOUT_S of stream time so memory stays bounded on
    unbounded input.  Stream time is the latest epoch tag (or supplied
    receive time) seen so far.
    """

    COUNTER_NAMES = (
        "lines",
        "reports",
        "checksum_mismatch",
        "malformed",
        "non_ais_talker",
        "invalid_armor",
        "missing_fragment",
        "duplicate_fragment",
        "mixed_group",
        "unsupported_type",
        "truncated",
    )

    def __init__(self) -> None:
        self.counters = {name: 0 for name in self.COUNTER_NAMES}
        self._groups: dict[tuple[str, Optional[int]], dict] = {}
        self._clock: Optional[float] = None

    def feed_line(
        self, line: str, receive_time: Optional[float] = None
    ) -> Iterator[Report]:
        self.counters["lines"] += 1
        if not line.strip():
            return
        try:
            sentence = parse_sentence(line)
        except ChecksumMismatch:
            self.counters["checksum_mismatch"] += 1
            return
        except NonAisTalker:
            self.counters["non_ais_talker"] += 1
            return
        except MalformedSentence:
            self.counters["malformed"] += 1
            return
        when = sentence.epoch if sentence.epoch is not None else receive_time
        if when is not None:
            self._clock = when
        self._expire_groups()
        if sentence.fragment_count == 1:
            yield from self._decode_payload(sentence.payload, sentence.fill_bits, when)
            return
        key = (sentence.channel, sentence.message_id)
        group = self._groups.get(key)
        if group is None:
            group = {"frags": [], "born": self._clock}
            self._groups[key] = group
        if any(
            f.fragment_index == sentence.fragment_index
            or f.fragment_count != sentence.fragment_count
            for f in group["frags"]
        ):
            # corrupt group: count and restart from the newcomer
            if any(f.fragment_count != sentence.fragment_count for f in group["frags"]):
                self.counters["mixed_group"] += 1
            else:
                self.counters["duplicate_fragment"] += 1
            group["frags"] = [sentence]
            group["born"] = self._clock
            return
        group["frags"].append(sentence)
        if len(group["frags"]) == sentence.fragment_count:
            del self._groups[key]
            try:
                payload, fill = assemble_payload(group["frags"])
            except AisError:
                self.counters["mixed_group"] += 1
                return
            yield from self._decode_payload(payload, fill, when)

    def finish(self) -> None:
        """Flush incomplete fragment groups, counting them as missing."""
        self.counters["missing_fragment"] += len(self._groups)
        self._groups.clear()

    def _expire_groups(self) -> None:
        if self._clock is None:
            return
        dead = [
            key
            for key, group in self._groups.items()
            if group["born"] is not None
            and self._clock - group["born"] > FRAGMENT_TIMEOUT_S
        ]
        for key in dead:
            del self._groups[key]
            self.counters["missing_fragment"] += 1

    def _decode_payload(
        self, payload: str, fill: int, when: Optional[float]
    ) -> Iterator[Report]:
        try:
            bits = decode_sixbit(payload, fill)
        except InvalidArmorCharacter:
            self.counters["invalid_armor"] += 1
            return
        try:
            msg_type = bits.uint(0, 6)
            if msg_type in POSITION_TYPES:
                report: Report = decode_position(bits, timestamp=when)
            elif msg_type in STATIC_TYPES:
                report = decode_static(bits, timestamp=when)
            else:
                self.counters["unsupported_type"] += 1
                return
        except TruncatedPayload:
            self.counters["truncated"] += 1
            return
        self.counters["reports"] += 1
        yield report


def iter_file_reports(path, decoder: Optional[StreamDecoder] = None) -> Iterator[Report]:
    """Decode a line-delimited NMEA file (gzip accepted via .gz suffix)."""
    decoder = decoder if decoder is not None else StreamDecoder()
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="ascii", errors="replace") as handle:
        for line in handle:
            yield from decoder.feed_line(line)
    decoder.finish()


def decode_lines(
    lines: Iterable[str], decoder: Optional[StreamDecoder] = None
) -> list[Report]:
    decoder = decoder if decoder is not None else StreamDecoder()
    out: list[Report] = []
    for line in lines:
        out.extend(decoder.feed_line(line))
    decoder.finish()
    return out
