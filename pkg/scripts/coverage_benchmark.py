"""Measure how much clicking the pre-tagger saves on synthetic tweet sets
with varying special-token density, and how a growing gazetteer moves the
needle.

Run: python scripts/coverage_benchmark.py
"""

import random

from csanno.domain import Genre, Token, Unit
from csanno.metrics import auto_tag_coverage
from csanno.preprocess import TaggerConfig, pretag_unit

SPECIALS = ["http://t.co/x", ":-)", "!!!", "2018", "hahaha", "hello", "١٢٣", "www.ex.io"]
PLAIN = ["عايز", "اروح", "بكرة", "يعني", "خلاص", "كده", "ليه", "دلوقتي", "شوية", "كتير"]
NAMES = ["مصر", "القاهرة", "بيروت", "تونس", "بغداد", "دمشق", "عمان", "الرياض"]


def build_units(rng, n_units, specials_per_unit, names_per_unit, tokens_per_unit=10):
    units = []
    for i in range(n_units):
        n_plain = tokens_per_unit - specials_per_unit - names_per_unit
        surfaces = (
            [rng.choice(SPECIALS) for _ in range(specials_per_unit)]
            + [rng.choice(NAMES) for _ in range(names_per_unit)]
            + [rng.choice(PLAIN) for _ in range(n_plain)]
        )
        rng.shuffle(surfaces)
        tokens, cursor = [], 0
        for index, surface in enumerate(surfaces):
            tokens.append(Token(index, surface, cursor, cursor + len(surface)))
            cursor += len(surface) + 1
        units.append(Unit(f"u{i}", Genre.PLAIN, {"line_no": str(i)}, tuple(tokens)))
    return units


def main() -> None:
    rng = random.Random(11)
    print("special density sweep (no gazetteer):")
    for n_special in range(0, 6):
        units = build_units(rng, 200, n_special, 0)
        config = TaggerConfig()
        tagged = [pretag_unit(u, config) for u in units]
        coverage = auto_tag_coverage(tagged)
        total = sum(len(u.tokens) for u in tagged)
        clicks = sum(t.auto_tag is None for u in tagged for t in u.tokens)
        print(
            f"  {n_special}/10 special: coverage {coverage:.2f}, "
            f"manual clicks {clicks}/{total}"
        )

    print("gazetteer growth sweep (2 specials + 2 names per unit):")
    units = build_units(rng, 200, 2, 2)
    for size in range(0, len(NAMES) + 1, 2):
        config = TaggerConfig(gazetteer=frozenset(NAMES[:size]))
        tagged = [pretag_unit(u, config) for u in units]
        coverage = auto_tag_coverage(tagged)
        print(f"  gazetteer {size:2d} entries: coverage {coverage:.3f}")


if __name__ == "__main__":
    main()
