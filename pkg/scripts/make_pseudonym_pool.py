#!/usr/bin/env python3
"""Regenerate the bundled pseudonym pool CSV.

The original pool came from an offline pipeline (a fake-name generator for a
first batch, then an LLM prompted to produce more in the same style, with a
manual pass removing inappropriate outputs).  That pipeline is not part of
this repo; this stub regenerates an equivalent fixed pool from syllable
products so the file can be rebuilt deterministically.

Usage: python scripts/make_pseudonym_pool.py > src/kgtextbench/data/pseudonyms.csv
"""

STEMS = [
    "Vel", "Zarn", "Kras", "Thel", "Marv", "Bex", "Drov", "Felz", "Gron",
    "Hurn", "Ilv", "Jesk", "Klim", "Lorv", "Mund", "Nask", "Orv", "Prenn",
    "Quom", "Rild", "Sorv", "Tum", "Ulr", "Virn", "Wend", "Yarv", "Zhul",
]

SUFFIXES = [
    "doria", "mora", "landia", "gard", "onia", "essa", "berg", "ovia",
    "antis", "elle", "inska", "aron", "ett", "ium", "anda", "orra", "yne",
    "eska", "avor", "untria", "els", "akar", "inthe", "osk", "arna", "iquet",
]


def main() -> None:
    print("label")
    seen = set()
    for stem in STEMS:
        for suffix in SUFFIXES:
            name = stem + suffix
            if name not in seen:
                seen.add(name)
                print(name)


if __name__ == "__main__":
    main()
