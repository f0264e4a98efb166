#!/usr/bin/env python3
# Copyright 2026 The rolefed Authors
# SPDX-License-Identifier: Apache-2.0
"""Generates src/html/unicode_tables.inc from Python's unicodedata.

Word characters are general categories L*, M* and Nd. The lowercase table
holds simple one-to-one mappings only.
"""
import sys
import unicodedata


def ranges(pred):
    out, start = [], None
    for cp in range(0x110000):
        if pred(cp):
            if start is None:
                start = cp
        elif start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def is_word(cp):
    cat = unicodedata.category(chr(cp))
    return cat[0] in "LM" or cat == "Nd"


def lower_pairs():
    pairs = []
    for cp in range(0x110000):
        ch = chr(cp)
        lo = ch.lower()
        if len(lo) == 1 and lo != ch:
            pairs.append((cp, ord(lo)))
    return pairs


def main(path):
    word = ranges(is_word)
    lower = lower_pairs()
    with open(path, "w", encoding="utf-8") as f:
        f.write("// Generated by tools/gen_unicode_tables.py (Unicode %s). Do not edit.\n"
                % unicodedata.unidata_version)
        f.write("// clang-format off\n")
        f.write("inline constexpr CodeRange kWordRanges[] = {\n")
        for a, b in word:
            f.write("  {0x%X, 0x%X},\n" % (a, b))
        f.write("};\n\n")
        f.write("inline constexpr CaseMapping kLowercase[] = {\n")
        for a, b in lower:
            f.write("  {0x%X, 0x%X},\n" % (a, b))
        f.write("};\n")
        f.write("// clang-format on\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/html/unicode_tables.inc")
