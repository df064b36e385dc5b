"""
Decoding raw AIVDM sentences
============================

Walk through the NMEA layer by hand: checksum, armoring, bit fields,
then the streaming decoder that handles multipart messages.
"""

# %%
# A single sentence from the test corpus. The checksum is the XOR of every
# character between '!' and '*'.
from pathlib import Path

from jackup_ais.nmea import AivdmDecoder, BitBuffer, RawSentence, checksum, decode_position_report

line = "!AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0*5C"
raw = RawSentence.parse(line)
print(raw)
print("checksum", hex(checksum(line[1 : line.index("*")])))

# %%
# The payload is 6-bit armored; each character carries six bits.
bits = BitBuffer.from_payload(raw.payload, raw.fill_bits)
print(len(bits), "bits, message type", bits.uint(0, 6))
print(decode_position_report(bits))

# %%
# For files, the streaming decoder keeps statistics and reassembles
# fragments. Lines without a receive timestamp still decode, but cannot
# become position records.
corpus = Path(__file__).resolve().parents[2] / "tests" / "data" / "aivdm_positions.txt"
dec = AivdmDecoder()
reports = []
for s in corpus.read_text().split():
    reports.extend(dec.feed(s))
dec.finish()
print(dec.stats.as_dict())

# %%
# Prefix a line with a unix timestamp and a tab, or carry it in an NMEA
# tag block, and it becomes a timed report.
dec = AivdmDecoder()
print(list(dec.feed("1530403200.0\t" + line)))
print(list(dec.feed("\\c:1530403210*00\\" + line)))
