import json
from functools import reduce
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from jackup_ais.errors import ChecksumError, DecodeError, FramingError, TruncationError
from jackup_ais.nmea import (
    AivdmDecoder,
    BitBuffer,
    PositionReport,
    RawSentence,
    Skip,
    armor,
    checksum,
    decode_lines,
    decode_position_report,
    dearmor,
    split_timestamp,
    validate_checksum,
)

DATA = Path(__file__).parent / "data"
CORPUS = (DATA / "aivdm_positions.txt").read_text().split()
REFERENCE = json.loads((DATA / "aivdm_positions_reference.json").read_text())

# armoring alphabet as tabulated in the AIS payload documentation
ALPHABET = "0123456789:;<=>?@ABCDEFGHIJKLMNOPQRSTUVW`abcdefghijklmnopqrstuvw"


def frame(body: str) -> str:
    return f"!{body}*{reduce(lambda a, c: a ^ ord(c), body, 0):02X}"


def payload_from_bits(bits: str) -> tuple[str, int]:
    fill = (-len(bits)) % 6
    bits += "0" * fill
    return "".join(ALPHABET[int(bits[i : i + 6], 2)] for i in range(0, len(bits), 6)), fill


def class_a_bits(mmsi, nav, sog10, lon600k, lat600k, cog10, msg_type=1) -> str:
    def u(v, w):
        return format(v & ((1 << w) - 1), f"0{w}b")

    return (
        u(msg_type, 6) + u(0, 2) + u(mmsi, 30) + u(nav, 4) + u(0, 8) + u(sog10, 10) + u(0, 1)
        + u(lon600k, 28) + u(lat600k, 27) + u(cog10, 12) + u(511, 9) + u(0, 6) + u(0, 4) + u(0, 19)
    )


# --- checksum ---------------------------------------------------------------


@pytest.mark.parametrize(
    "body, expected",
    [("", 0x00), ("A", 0x41), ("AB", 0x41 ^ 0x42), ("AA", 0x00), ("AIVDM", 0x41 ^ 0x49 ^ 0x56 ^ 0x44 ^ 0x4D)],
)
def test_checksum_truth_table(body, expected):
    assert checksum(body) == expected


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126, blacklist_characters="!*"), max_size=80))
def test_checksum_matches_bytewise_xor(body):
    x = 0
    for b in body.encode("ascii"):
        x ^= b
    assert checksum(body) == x
    assert validate_checksum(f"!{body}*{x:02X}")
    assert validate_checksum(f"!{body}*{x:02x}")
    assert not validate_checksum(f"!{body}*{x ^ 1:02X}")


def test_corpus_checksums_valid():
    assert all(validate_checksum(s) for s in CORPUS)


@pytest.mark.parametrize("bad", ["AIVDM,1,1,,A,0,0*00", "!AIVDM,1,1,,A,0,0", "!AIVDM,1,1,,A,0,0*0G", "!!A*00", "!A*B*00"])
def test_framing_errors(bad):
    with pytest.raises(FramingError):
        validate_checksum(bad)


# --- armoring ---------------------------------------------------------------


def test_all_64_armor_values_round_trip():
    for v in range(64):
        ch = armor(v)
        assert ch == ALPHABET[v]
        assert dearmor(ch) == v
    assert [dearmor(c) for c in ALPHABET] == list(range(64))


@pytest.mark.parametrize("ch", ["X", "_", "x", " ", "/"])
def test_dearmor_rejects_outside_alphabet(ch):
    with pytest.raises(DecodeError):
        dearmor(ch, 3)


def test_armor_range():
    with pytest.raises(ValueError):
        armor(64)


# --- bit buffer ---------------------------------------------------------------


@given(st.text(alphabet=ALPHABET, min_size=1, max_size=40), st.integers(0, 5))
def test_bitbuffer_matches_string_oracle(payload, fill):
    if 6 * len(payload) < fill:
        return
    ref = "".join(format(ALPHABET.index(c), "06b") for c in payload)
    ref = ref[: len(ref) - fill]
    buf = BitBuffer.from_payload(payload, fill)
    assert buf.bits() == ref
    for start in range(0, len(ref), 7):
        width = min(9, len(ref) - start)
        if width == 0:
            continue
        assert buf.uint(start, width) == int(ref[start : start + width], 2)
        signed = int(ref[start : start + width], 2)
        if ref[start] == "1":
            signed -= 1 << width
        assert buf.int(start, width) == signed


def test_bitbuffer_truncation():
    buf = BitBuffer.from_payload("00", 0)
    with pytest.raises(TruncationError):
        buf.uint(8, 8)


# --- conformance against an independent decoder ----------------------------------


def _expected(ref):
    """Map the reference decoder's conventions onto ours.

    The reference reports sentinel and out-of-range coordinates verbatim and
    leaves fields of short payloads empty; we skip the former and reject the latter.
    """
    if ref["lat"] is None:
        return "truncated"
    if not (-90 <= ref["lat"] <= 90 and -180 <= ref["lon"] <= 180):
        return None
    return (
        ref["msg_type"],
        ref["mmsi"],
        ref["lat"],
        ref["lon"],
        None if ref["sog"] == 102.3 else ref["sog"],
        None if ref["cog"] == 360.0 else ref["cog"],
        ref["nav_status"],
    )


def _ours(sentence):
    try:
        out = decode_position_report(BitBuffer.from_payload(*_payload(sentence)))
    except TruncationError:
        return "truncated"
    if isinstance(out, Skip):
        return None
    return (
        out.msg_type,
        out.mmsi,
        round(out.lat, 6),
        round(out.lon, 6),
        None if out.sog is None else round(out.sog, 1),
        None if out.cog is None else round(out.cog, 1),
        out.nav_status,
    )


def _payload(sentence):
    s = RawSentence.parse(sentence)
    return s.payload, s.fill_bits


def test_reference_corpus_size():
    assert [r["sentence"] for r in REFERENCE] == CORPUS
    positions = [r for r in REFERENCE if isinstance(_expected(r), tuple)]
    assert len(positions) >= 100


@pytest.mark.parametrize("ref", REFERENCE, ids=lambda r: r["sentence"][14:24])
def test_field_identical_to_reference(ref):
    assert _ours(ref["sentence"]) == _expected(ref)


def test_live_reference_decoder_agrees():
    pyais = pytest.importorskip("pyais")
    n = 0
    for s in CORPUS:
        msg = pyais.decode(s)
        live = {
            "msg_type": msg.msg_type,
            "mmsi": int(msg.mmsi),
            "lat": msg.lat,
            "lon": msg.lon,
            "sog": msg.speed,
            "cog": msg.course,
            "nav_status": int(msg.status) if hasattr(msg, "status") else None,
        }
        assert _ours(s) == _expected(live), s
        n += 1
    assert n >= 100


def test_stream_record_count_matches_reference():
    reports, stats = decode_lines(CORPUS)
    assert len(reports) == sum(isinstance(_expected(r), tuple) for r in REFERENCE)
    assert stats.checksum_failures == 0
    assert stats.decode_errors == 1
    assert [(r.report.mmsi, r.report.lat) for r in reports] == [
        (e[1], pytest.approx(e[2], abs=5e-7)) for e in map(_expected, REFERENCE) if isinstance(e, tuple)
    ]


# --- synthetic messages ------------------------------------------------------------


@pytest.mark.parametrize(
    "lat, lon",
    [(55.69, 7.67), (-33.8568, 151.2153), (0.0, 0.0), (-90.0, -180.0), (89.999, 179.999)],
)
def test_signed_coordinates(lat, lon):
    bits = class_a_bits(219000001, 5, 123, round(lon * 600_000), round(lat * 600_000), 2345)
    payload, fill = payload_from_bits(bits)
    out = decode_position_report(BitBuffer.from_payload(payload, fill))
    assert isinstance(out, PositionReport)
    assert out.lat == pytest.approx(lat, abs=1e-9)
    assert out.lon == pytest.approx(lon, abs=1e-9)
    assert (out.mmsi, out.nav_status, out.sog, out.cog) == (219000001, 5, 12.3, 234.5)


def test_unavailable_fields():
    bits = class_a_bits(1, 15, 1023, 181 * 600_000, 10 * 600_000, 3600)
    payload, fill = payload_from_bits(bits)
    out = decode_position_report(BitBuffer.from_payload(payload, fill))
    assert isinstance(out, Skip)
    bits = class_a_bits(1, 15, 1023, 5 * 600_000, 10 * 600_000, 3600)
    out = decode_position_report(BitBuffer.from_payload(*payload_from_bits(bits)))
    assert out.sog is None and out.cog is None


def test_non_position_message_skipped():
    payload, fill = payload_from_bits(format(5, "06b") + "0" * 420)
    out = decode_position_report(BitBuffer.from_payload(payload, fill))
    assert isinstance(out, Skip) and out.reason == "not a position report"


def test_truncated_position_report():
    bits = class_a_bits(1, 0, 0, 0, 0, 0)[:100]
    payload, fill = payload_from_bits(bits)
    with pytest.raises(TruncationError):
        decode_position_report(BitBuffer.from_payload(payload, fill))


def _two_part(msg_id="3", channel="A"):
    bits = class_a_bits(219000001, 0, 100, 7 * 600_000, 55 * 600_000, 900)
    payload, fill = payload_from_bits(bits)
    return (
        frame(f"AIVDM,2,1,{msg_id},{channel},{payload[:10]},0"),
        frame(f"AIVDM,2,2,{msg_id},{channel},{payload[10:]},{fill}"),
    )


def test_multipart_reassembly_and_timestamp():
    a, b = _two_part()
    dec = AivdmDecoder()
    out = list(dec.feed(f"1530403200\t{a}")) + list(dec.feed(b))
    dec.finish()
    assert len(out) == 1
    assert out[0].timestamp == 1530403200
    assert (out[0].report.lat, out[0].report.lon) == (55.0, 7.0)
    assert dec.stats.incomplete == 0


def test_multipart_interleaved_channels():
    a1, a2 = _two_part("1", "A")
    b1, b2 = _two_part("1", "B")
    reports, stats = decode_lines([a1, b1, b2, a2])
    assert len(reports) == 2 and stats.incomplete == 0


def test_multipart_expiry():
    a, b = _two_part()
    filler = CORPUS[:40]
    reports, stats = decode_lines([a, *filler, b])
    assert stats.incomplete >= 1
    assert len(reports) == sum(isinstance(_expected(r), tuple) for r in REFERENCE[:40])


def test_missing_last_fragment_counted_at_finish():
    a, _ = _two_part()
    reports, stats = decode_lines([a])
    assert reports == [] and stats.incomplete == 1


def test_tag_block_timestamp():
    ts, text = split_timestamp("\\c:1530403200*55\\" + CORPUS[0])
    assert ts == 1530403200 and text == CORPUS[0]
    assert split_timestamp(CORPUS[0]) == (None, CORPUS[0])


def test_bad_checksum_counted_and_strict_raises():
    bad = CORPUS[0][:-2] + ("00" if CORPUS[0][-2:] != "00" else "01")
    reports, stats = decode_lines(["", bad])
    assert reports == [] and stats.checksum_failures == 1 and stats.lines == 1
    with pytest.raises(ChecksumError):
        decode_lines([bad], strict=True)


def test_garbage_line_is_framing_error():
    reports, stats = decode_lines(["hello world", "$GPGGA,1*00"])
    assert reports == [] and stats.framing_errors == 2
    with pytest.raises(FramingError):
        decode_lines(["hello"], strict=True)


def test_vdo_accepted():
    body = CORPUS[0][1:].split("*")[0].replace("AIVDM", "AIVDO")
    reports, _ = decode_lines([frame(body)])
    assert len(reports) == 1
