"""Deterministic cleaning, tokenization, and automatic pre-tagging.

The pre-tagger assigns the mechanical special-token categories (URL,
emoticon, punctuation, digits, stray diacritics, sound effects, gazetteer
named entities, Latin-script words) so annotators only click what actually
needs a human decision. Everything here is a pure function over immutable
inputs and safe for parallel per-unit use.
"""

from __future__ import annotations

import codecs
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

from .domain import AUTO_CATEGORIES, Token, Unit
from .errors import DecodeError, PreconditionError, ValidationError

_NORMALIZATION_FORMS = ("NFC", "NFD", "NFKC", "NFKD")

#: Arabic combining marks (fathatan .. sukun).
DEFAULT_DIACRITIC_RANGES = ((0x064B, 0x0652),)

_URL_RE = re.compile(r"(?:[A-Za-z][A-Za-z0-9+.\-]*://|www\.)\S*")
# Letters, digits, and combining marks glue into word tokens; everything else
# (punctuation, symbols) forms separate runs.
_WORDISH = "LNM"


@dataclass(frozen=True)
class CleanConfig:
    source_encoding: str = "utf-8"
    normalize_form: str = "NFC"
    strip_controls: bool = True

    def __post_init__(self) -> None:
        try:
            codecs.lookup(self.source_encoding)
        except LookupError:
            raise ValidationError(f"unrecognized codec: {self.source_encoding!r}") from None
        if self.normalize_form not in _NORMALIZATION_FORMS:
            raise ValidationError(f"normalize_form must be one of {_NORMALIZATION_FORMS}")


def _default_emoticons() -> frozenset[str]:
    text = resources.files("csanno.data").joinpath("emoticons.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def load_inventory_file(path: str) -> frozenset[str]:
    """Read a one-entry-per-line UTF-8 inventory file (emoticons, gazetteer)."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


@dataclass(frozen=True)
class TaggerConfig:
    emoticon_inventory: frozenset[str] = field(default_factory=_default_emoticons)
    sound_effect_min_repeat: int = 3
    diacritic_ranges: tuple[tuple[int, int], ...] = DEFAULT_DIACRITIC_RANGES
    gazetteer: frozenset[str] = frozenset()
    precedence: tuple[str, ...] = AUTO_CATEGORIES

    def __post_init__(self) -> None:
        if self.sound_effect_min_repeat < 3:
            raise ValidationError("sound_effect_min_repeat must be >= 3")
        if sorted(self.precedence) != sorted(AUTO_CATEGORIES):
            raise ValidationError(f"precedence must be a permutation of {AUTO_CATEGORIES}")
        for lo, hi in self.diacritic_ranges:
            if lo > hi:
                raise ValidationError(f"empty diacritic range: {hex(lo)}..{hex(hi)}")
        object.__setattr__(
            self, "_gazetteer_folded", frozenset(entry.casefold() for entry in self.gazetteer)
        )

    @classmethod
    def from_files(
        cls,
        emoticon_file: Optional[str] = None,
        gazetteer_file: Optional[str] = None,
        **overrides,
    ) -> "TaggerConfig":
        if emoticon_file is not None:
            overrides["emoticon_inventory"] = load_inventory_file(emoticon_file)
        if gazetteer_file is not None:
            overrides["gazetteer"] = load_inventory_file(gazetteer_file)
        return cls(**overrides)


def clean_text(raw: bytes | str, config: CleanConfig = CleanConfig()) -> str:
    """Decode, normalize line endings and Unicode form, drop stray controls.

    Idempotent on its own output: cleaning already-clean text is a no-op.
    """
    if isinstance(raw, bytes):
        try:
            text = raw.decode(config.source_encoding)
        except UnicodeDecodeError as exc:
            raise DecodeError(config.source_encoding, exc.start) from None
    else:
        text = raw
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if config.strip_controls:
        text = "".join(ch for ch in text if ord(ch) >= 0x20 or ch in "\n\t")
    return unicodedata.normalize(config.normalize_form, text)


def _is_wordish(ch: str) -> bool:
    return unicodedata.category(ch)[0] in _WORDISH


def _emoticon_at(segment: str, pos: int, inventory_by_length: list[str]) -> Optional[str]:
    """Longest inventory member starting at pos, honoring alnum boundaries."""
    for emo in inventory_by_length:
        end = pos + len(emo)
        if segment[pos:end] != emo:
            continue
        left_ok = pos == 0 or not segment[pos - 1].isalnum() or not emo[0].isalnum()
        right_ok = end == len(segment) or not segment[end].isalnum() or not emo[-1].isalnum()
        if left_ok and right_ok:
            return emo
    return None


def _split_runs(segment: str, offset: int) -> Iterable[tuple[str, int, int]]:
    """Maximal same-class runs: wordish (letters/digits/marks) vs other."""
    i = 0
    while i < len(segment):
        j = i + 1
        wordish = _is_wordish(segment[i])
        while j < len(segment) and _is_wordish(segment[j]) == wordish:
            j += 1
        yield segment[i:j], offset + i, offset + j
        i = j


def _tokenize_segment(segment: str, offset: int, inventory: list[str]) -> Iterable[tuple[str, int, int]]:
    """Tokenize a whitespace-free segment, keeping emoticons whole."""
    plain_start = 0
    i = 0
    while i < len(segment):
        emo = _emoticon_at(segment, i, inventory)
        if emo is not None:
            if plain_start < i:
                yield from _split_runs(segment[plain_start:i], offset + plain_start)
            yield emo, offset + i, offset + i + len(emo)
            i += len(emo)
            plain_start = i
        else:
            i += 1
    if plain_start < len(segment):
        yield from _split_runs(segment[plain_start:], offset + plain_start)


def tokenize(text: str, config: TaggerConfig = TaggerConfig()) -> list[tuple[str, int, int]]:
    """Split cleaned text into (surface, char_start, char_end) triples.

    Tokens cover exactly the non-whitespace spans. URL and emoticon literals
    stay single tokens; otherwise maximal runs of letters/digits/marks are
    separated from punctuation/symbol runs.
    """
    inventory = sorted(config.emoticon_inventory, key=len, reverse=True)
    tokens: list[tuple[str, int, int]] = []
    for chunk_match in re.finditer(r"\S+", text):
        chunk, base = chunk_match.group(), chunk_match.start()
        pos = 0
        for url_match in _URL_RE.finditer(chunk):
            if url_match.start() > pos:
                tokens.extend(_tokenize_segment(chunk[pos : url_match.start()], base + pos, inventory))
            tokens.append((url_match.group(), base + url_match.start(), base + url_match.end()))
            pos = url_match.end()
        if pos < len(chunk):
            tokens.extend(_tokenize_segment(chunk[pos:], base + pos, inventory))
    return tokens


def _is_url(surface: str, config: TaggerConfig) -> bool:
    return _URL_RE.fullmatch(surface) is not None


def _is_emoticon(surface: str, config: TaggerConfig) -> bool:
    return surface in config.emoticon_inventory


def _is_punct(surface: str, config: TaggerConfig) -> bool:
    return all(unicodedata.category(ch)[0] in "PS" for ch in surface)


def _is_digit(surface: str, config: TaggerConfig) -> bool:
    return all(unicodedata.category(ch) == "Nd" for ch in surface)


def _is_diacritic(surface: str, config: TaggerConfig) -> bool:
    return all(
        any(lo <= ord(ch) <= hi for lo, hi in config.diacritic_ranges) for ch in surface
    )


def _is_sound_effect(surface: str, config: TaggerConfig) -> bool:
    # A base of one or two characters repeated enough times to cover the
    # whole token: "xxxx", "hahaha", Arabic laughter, etc.
    k = config.sound_effect_min_repeat
    for unit_len in (1, 2):
        if len(surface) % unit_len:
            continue
        reps = len(surface) // unit_len
        if reps >= k and surface == surface[:unit_len] * reps:
            return True
    return False


def _is_ne(surface: str, config: TaggerConfig) -> bool:
    folded: frozenset[str] = config._gazetteer_folded  # type: ignore[attr-defined]
    return surface in config.gazetteer or surface.casefold() in folded


def _is_latin(surface: str, config: TaggerConfig) -> bool:
    alphabetic = [ch for ch in surface if ch.isalpha()]
    if not alphabetic:
        return False
    return all("LATIN" in unicodedata.name(ch, "") for ch in alphabetic)


_CLASSIFIERS = {
    "url": _is_url,
    "emoticon": _is_emoticon,
    "punct": _is_punct,
    "digit": _is_digit,
    "diacritic": _is_diacritic,
    "sound_effect": _is_sound_effect,
    "ne": _is_ne,
    "latin": _is_latin,
}


def classify_token(surface: str, config: TaggerConfig = TaggerConfig()) -> Optional[str]:
    """First special category in precedence order that matches, else None."""
    if not surface:
        raise ValidationError("cannot classify an empty surface")
    for category in config.precedence:
        if _CLASSIFIERS[category](surface, config):
            return category
    return None


def pretag_unit(unit: Unit, config: TaggerConfig = TaggerConfig()) -> Unit:
    """Auto-tag every token whose surface matches a special category.

    Never touches units carrying manual tags: pre-tagging must not overwrite
    human work. Token order, surfaces, and count are unchanged.
    """
    for token in unit.tokens:
        if token.manual_tag is not None:
            raise PreconditionError(
                f"unit {unit.unit_id}: token {token.index} is manually tagged"
            )
    retagged = tuple(
        Token(t.index, t.surface, t.char_start, t.char_end, classify_token(t.surface, config))
        for t in unit.tokens
    )
    return Unit(unit.unit_id, unit.genre, unit.source_meta, retagged, unit.text)
