#!/usr/bin/env python3
"""Regenerates src/unicode_tables.inc from the Python unicodedata database.

Emits three frozen tables for the BMP:
  * simple 1:1 case pairs (upper, lower) -- multi-char mappings are skipped,
  * code point ranges classified as punctuation (category P*) or format (Cf),
  * whitespace code points (category Z* plus the ASCII controls).

Run from the repository root:  python3 scripts/gen_unicode_tables.py
"""

import sys
import unicodedata

OUT = "src/unicode_tables.inc"


def case_pairs():
    pairs = []
    for cp in range(0x10000):
        ch = chr(cp)
        lo = ch.lower()
        up = ch.upper()
        if up == ch and len(lo) == 1 and lo != ch and lo.upper() == ch:
            pairs.append((cp, ord(lo)))
    return pairs


def merged_ranges(predicate):
    ranges = []
    start = None
    prev = None
    for cp in range(0x10000):
        if predicate(cp):
            if start is None:
                start = cp
            prev = cp
        elif start is not None:
            ranges.append((start, prev))
            start = None
    if start is not None:
        ranges.append((start, prev))
    return ranges


def is_removed(cp):
    cat = unicodedata.category(chr(cp))
    return cat.startswith("P") or cat == "Cf"


def is_space(cp):
    if cp in (0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x85):
        return True
    return unicodedata.category(chr(cp)).startswith("Z")


def main():
    pairs = case_pairs()
    punct = merged_ranges(is_removed)
    spaces = [cp for cp in range(0x10000) if is_space(cp)]

    with open(OUT, "w", encoding="utf-8") as f:
        w = f.write
        w("// Generated by scripts/gen_unicode_tables.py -- do not edit by hand.\n")
        w("// Unicode database version: %s\n\n" % unicodedata.unidata_version)
        w("static const CasePair kCasePairs[] = {\n")
        for i in range(0, len(pairs), 6):
            row = ", ".join("{0x%04X, 0x%04X}" % p for p in pairs[i : i + 6])
            w("    %s,\n" % row)
        w("};\n\n")
        w("static const CpRange kPunctRanges[] = {\n")
        for i in range(0, len(punct), 6):
            row = ", ".join("{0x%04X, 0x%04X}" % r for r in punct[i : i + 6])
            w("    %s,\n" % row)
        w("};\n\n")
        w("static const char32_t kSpaceCps[] = {\n")
        for i in range(0, len(spaces), 10):
            row = ", ".join("0x%04X" % cp for cp in spaces[i : i + 10])
            w("    %s,\n" % row)
        w("};\n")
    print("wrote %s: %d case pairs, %d punct ranges, %d space cps" % (OUT, len(pairs), len(punct), len(spaces)))


if __name__ == "__main__":
    sys.exit(main())
