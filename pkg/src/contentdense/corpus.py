"""Data model and corpus ingestion.

A corpus is a UTF-8 JSON-lines file, one annotated lead per line. Each lead
carries its raw text, per-sentence tokens/POS/optional lemmas, an optional
bracketed constituency parse per sentence, an optional reference-summary
tuple list, and the word count of the full article. The exact field layout
is documented in FORMAT.md at the repository root.

Words are case-folded at ingestion: the folded form of a token is its lemma
(lower-cased) when a lemma is supplied, otherwise the lower-cased surface
form. POS tags are kept verbatim.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import (
    CorpusFormatError,
    DuplicateIdError,
    ParseError,
    ValidationError,
)

DOMAINS = ("business", "science", "sports", "politics", "general")


class WordPosTuple(NamedTuple):
    """A (word, POS) pair; the unit of summary/lead overlap counting."""

    word: str
    pos: str


@dataclass(frozen=True)
class ParseTree:
    """Node of a constituency tree.

    A node has either children (internal node) or a leaf word (preterminal),
    never both and never neither.
    """

    label: str
    children: tuple["ParseTree", ...] = ()
    leaf_word: str | None = None

    def __post_init__(self):
        if not self.label:
            raise ValidationError("parse tree node has an empty label")
        has_children = len(self.children) > 0
        has_word = self.leaf_word is not None
        if has_children == has_word:
            raise ValidationError(
                f"node {self.label!r} must have children or a leaf word, not "
                f"{'both' if has_children else 'neither'}"
            )

    @property
    def is_leaf(self) -> bool:
        return self.leaf_word is not None

    def leaves(self) -> list[str]:
        """Leaf words in source order."""
        if self.is_leaf:
            return [self.leaf_word]
        out: list[str] = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def leaf_count(self) -> int:
        if self.is_leaf:
            return 1
        return sum(child.leaf_count() for child in self.children)

    def to_bracketed(self) -> str:
        """Serialize back to the bracketed source form."""
        if self.is_leaf:
            return f"({self.label} {self.leaf_word})"
        inner = " ".join(child.to_bracketed() for child in self.children)
        return f"({self.label} {inner})"


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


def _tokenize_brackets(text: str) -> list[tuple[str, int]]:
    """Split a bracketed string into '(' / ')' / atom tokens with char offsets."""
    out: list[tuple[str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            out.append((ch, i))
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            out.append((text[i:j], i))
            i = j
    return out


def parse_ptb_tree(bracketed: str) -> ParseTree:
    """Parse one bracketed constituency tree, e.g. ``(S (NP (DT the) (NN cat)) (VP (VBD sat)))``.

    Labels are whitespace-delimited; a node is either ``(LABEL word)`` or
    ``(LABEL subtree...)``. Raises ParseError (with the byte offset of the
    problem) on empty input, unbalanced parentheses, or trailing content.
    """
    tokens = _tokenize_brackets(bracketed)
    if not tokens:
        raise ParseError("empty parse string", offset=0)

    def parse_node(pos: int) -> tuple[ParseTree, int]:
        tok, at = tokens[pos]
        if tok != "(":
            raise ParseError(
                f"expected '(' but found {tok!r}", offset=_byte_offset(bracketed, at)
            )
        pos += 1
        if pos >= len(tokens):
            raise ParseError(
                "unbalanced parentheses: input ends inside a node",
                offset=_byte_offset(bracketed, len(bracketed)),
            )
        label, label_at = tokens[pos]
        if label in "()":
            raise ParseError(
                "missing node label", offset=_byte_offset(bracketed, label_at)
            )
        pos += 1
        if pos >= len(tokens):
            raise ParseError(
                "unbalanced parentheses: input ends inside a node",
                offset=_byte_offset(bracketed, len(bracketed)),
            )
        tok, at = tokens[pos]
        if tok == "(":
            children: list[ParseTree] = []
            while True:
                if pos >= len(tokens):
                    raise ParseError(
                        "unbalanced parentheses: input ends inside a node",
                        offset=_byte_offset(bracketed, len(bracketed)),
                    )
                tok, at = tokens[pos]
                if tok == ")":
                    pos += 1
                    return ParseTree(label, children=tuple(children)), pos
                if tok != "(":
                    raise ParseError(
                        f"expected '(' or ')' but found {tok!r}",
                        offset=_byte_offset(bracketed, at),
                    )
                child, pos = parse_node(pos)
                children.append(child)
        elif tok == ")":
            raise ParseError(
                f"node {label!r} has no children and no word",
                offset=_byte_offset(bracketed, at),
            )
        else:
            word = tok
            pos += 1
            if pos >= len(tokens):
                raise ParseError(
                    "unbalanced parentheses: input ends inside a node",
                    offset=_byte_offset(bracketed, len(bracketed)),
                )
            closer, at = tokens[pos]
            if closer != ")":
                raise ParseError(
                    f"expected ')' after leaf word but found {closer!r}",
                    offset=_byte_offset(bracketed, at),
                )
            pos += 1
            return ParseTree(label, leaf_word=word), pos

    tree, pos = parse_node(0)
    if pos != len(tokens):
        _, at = tokens[pos]
        raise ParseError(
            "trailing content after tree", offset=_byte_offset(bracketed, at)
        )
    return tree


def _fold_word(surface: str, lemma: str | None) -> str:
    return lemma.lower() if lemma is not None else surface.lower()


@dataclass(frozen=True)
class Sentence:
    """One sentence: parallel token/POS arrays, optional lemmas, optional parse."""

    tokens: tuple[str, ...]
    pos: tuple[str, ...]
    lemmas: tuple[str, ...] | None = None
    parse: ParseTree | None = None

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise ValidationError("sentence has no tokens")
        if len(self.pos) != len(self.tokens):
            raise ValidationError(
                f"{len(self.pos)} POS tags for {len(self.tokens)} tokens"
            )
        if self.lemmas is not None and len(self.lemmas) != len(self.tokens):
            raise ValidationError(
                f"{len(self.lemmas)} lemmas for {len(self.tokens)} tokens"
            )
        if self.parse is not None and self.parse.leaf_count() != len(self.tokens):
            raise ValidationError(
                f"parse has {self.parse.leaf_count()} leaves for "
                f"{len(self.tokens)} tokens"
            )

    def folded_words(self) -> list[str]:
        """Case-folded word forms (lemma when present, else lower-cased surface)."""
        if self.lemmas is None:
            return [t.lower() for t in self.tokens]
        return [_fold_word(t, l) for t, l in zip(self.tokens, self.lemmas)]

    def word_pos_tuples(self) -> list[WordPosTuple]:
        return [WordPosTuple(w, p) for w, p in zip(self.folded_words(), self.pos)]


@dataclass(frozen=True)
class AnnotatedLead:
    """One lead: the universal input record.

    ``summary`` holds the (word, POS) tuples of the article's reference
    summary when one exists; ``article_word_count`` is the length of the
    full article, used by the article-length baseline.
    """

    id: str
    domain: str
    lead_text: str
    sentences: tuple[Sentence, ...]
    summary: tuple[WordPosTuple, ...] | None = None
    article_word_count: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValidationError("lead id is empty")
        if self.domain not in DOMAINS:
            raise ValidationError(
                f"unknown domain {self.domain!r}; expected one of {', '.join(DOMAINS)}"
            )
        if self.lead_text and not self.sentences:
            raise ValidationError(f"lead {self.id}: non-empty text but no sentences")
        if self.summary is not None:
            for t in self.summary:
                if not t.word:
                    raise ValidationError(f"lead {self.id}: summary tuple with empty word")
        if self.article_word_count < 0:
            raise ValidationError(f"lead {self.id}: negative article_word_count")
        if self.article_word_count < self.n_tokens:
            raise ValidationError(
                f"lead {self.id}: article_word_count {self.article_word_count} "
                f"smaller than lead token count {self.n_tokens}"
            )

    @cached_property
    def n_tokens(self) -> int:
        return sum(len(s.tokens) for s in self.sentences)

    @cached_property
    def words(self) -> tuple[str, ...]:
        out: list[str] = []
        for s in self.sentences:
            out.extend(s.folded_words())
        return tuple(out)

    @cached_property
    def word_counts(self) -> Counter:
        return Counter(self.words)

    @cached_property
    def word_set(self) -> frozenset[str]:
        return frozenset(self.words)

    @cached_property
    def tuples(self) -> tuple[WordPosTuple, ...]:
        out: list[WordPosTuple] = []
        for s in self.sentences:
            out.extend(s.word_pos_tuples())
        return tuple(out)

    @cached_property
    def tuple_set(self) -> frozenset[WordPosTuple]:
        return frozenset(self.tuples)


def _sentence_to_record(s: Sentence) -> dict:
    rec: dict = {"tokens": list(s.tokens), "pos": list(s.pos)}
    if s.lemmas is not None:
        rec["lemmas"] = list(s.lemmas)
    if s.parse is not None:
        rec["parse"] = s.parse.to_bracketed()
    return rec


def _sentence_from_record(rec: dict) -> Sentence:
    if not isinstance(rec, dict):
        raise CorpusFormatError("sentence entry is not an object")
    for key in ("tokens", "pos"):
        if key not in rec:
            raise CorpusFormatError(f"sentence missing field {key!r}")
    parse = None
    if rec.get("parse") is not None:
        parse = parse_ptb_tree(rec["parse"])
    lemmas = rec.get("lemmas")
    return Sentence(
        tokens=tuple(rec["tokens"]),
        pos=tuple(rec["pos"]),
        lemmas=tuple(lemmas) if lemmas is not None else None,
        parse=parse,
    )


def lead_to_record(lead: AnnotatedLead) -> dict:
    """Map a lead to its JSON object form (fixed key order)."""
    rec: dict = {
        "id": lead.id,
        "domain": lead.domain,
        "lead_text": lead.lead_text,
        "sentences": [_sentence_to_record(s) for s in lead.sentences],
    }
    if lead.summary is not None:
        rec["summary"] = [[t.word, t.pos] for t in lead.summary]
    rec["article_word_count"] = lead.article_word_count
    return rec


def lead_from_record(rec: dict) -> AnnotatedLead:
    if not isinstance(rec, dict):
        raise CorpusFormatError("record is not a JSON object")
    for key in ("id", "domain", "lead_text", "sentences", "article_word_count"):
        if key not in rec:
            raise CorpusFormatError(f"record missing field {key!r}")
    summary = None
    if rec.get("summary") is not None:
        summary = tuple(
            WordPosTuple(str(w).lower(), str(p)) for w, p in rec["summary"]
        )
    return AnnotatedLead(
        id=rec["id"],
        domain=rec["domain"],
        lead_text=rec["lead_text"],
        sentences=tuple(_sentence_from_record(s) for s in rec["sentences"]),
        summary=summary,
        article_word_count=int(rec["article_word_count"]),
    )


def load_corpus(path: str | Path) -> list[AnnotatedLead]:
    """Load a JSON-lines corpus. Deterministic and order-preserving.

    Raises CorpusFormatError / ValidationError / ParseError naming the
    offending line number; DuplicateIdError when two records share an id.
    """
    path = Path(path)
    leads: list[AnnotatedLead] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"line {lineno}: invalid JSON: {e}") from e
            try:
                lead = lead_from_record(rec)
            except (CorpusFormatError, ValidationError, ParseError) as e:
                raise type(e)(f"line {lineno}: {e}") from e
            if lead.id in seen:
                raise DuplicateIdError(f"line {lineno}: duplicate lead id {lead.id!r}")
            seen.add(lead.id)
            leads.append(lead)
    return leads


def save_corpus(leads: Iterable[AnnotatedLead], path: str | Path) -> None:
    """Write a corpus in canonical form: one compact JSON object per line.

    Canonical output round-trips byte-identically through load_corpus.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for lead in leads:
            fh.write(json.dumps(lead_to_record(lead), ensure_ascii=False,
                                separators=(",", ":")))
            fh.write("\n")


def load_lexicon(path: str | Path) -> frozenset[str]:
    """Load a word-list file: one word per line, lower-cased; blank lines and
    lines starting with '#' are skipped."""
    words: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if not word or word.startswith("#"):
                continue
            words.add(word.lower())
    return frozenset(words)


def default_lexicon_path() -> Path:
    """Path of the concrete-word list shipped with the package."""
    return Path(__file__).parent / "data" / "mrc_wordlist.txt"
