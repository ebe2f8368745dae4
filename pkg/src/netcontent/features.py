"""Tweet records to a sparse features-by-tweets matrix.

Feature kinds:

* word n-grams (unigrams, optionally bigrams), optionally POS colored
* hashtag presence and count
* morphological counts: numbers, question marks, exclamation marks and
  quantifier-lexicon hits
* per-kind named-entity counts (NAME, LOCATION, ORG, TIME)
* tweet length in tokens

Part-of-speech and entity labels are inputs.  Records carry them as
``annotations`` produced by any external tagger; ``LexiconAnnotator`` is a
word-list fallback.
"""
from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .errors import ValidationError

ENTITY_KINDS = ("NAME", "LOCATION", "ORG", "TIME")
MORPH_KINDS = ("number", "question", "exclamation", "quantifier")
QUESTION_MARKS = frozenset("?？")
EXCLAMATION_MARKS = frozenset("!！")

# A handful of English and Chinese measure words; replace via a lexicon file.
DEFAULT_QUANTIFIERS = frozenset(
    """
    yrs yr years year old months days hours cm kg m ft feet inches lbs
    个 名 位 岁 天 年 月 日 号 点 米 公分 斤 公斤 次 人
    """.split()
)

_TOKEN_RE = re.compile(
    r"""\d+(?:['"’”]\d+)+['"’”]?   # height marks bind to numbers: 5'6"
      | \d+['"’”]
      | \w+
      | [^\w\s]""",
    re.VERBOSE,
)
_TAG_RE = re.compile(r"#([^#\s]+)#|#(\w+)")


def tokenize(text: str) -> list[str]:
    """Split on whitespace and punctuation; punctuation marks are tokens.

    Quote and apostrophe marks that follow digits stay attached to the
    number (``5'6"`` is one token).  Word characters follow Unicode, so
    runs of CJK characters come out as single tokens.
    """
    return _TOKEN_RE.findall(unicodedata.normalize("NFC", text))


def parse_tags(text: str) -> list[str]:
    """Hashtags in either ``#topic#`` or ``#word`` form."""
    return [a or b for a, b in _TAG_RE.findall(text)]


def is_number(token: str) -> bool:
    return bool(token) and token[0].isdigit()


class TokenAnnotation(NamedTuple):
    pos: str
    entity: str | None = None


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    text: str = ""
    tags: tuple = ()
    annotations: tuple | None = None
    label: int | None = None

    def __post_init__(self):
        if not self.tweet_id:
            raise ValidationError("empty tweet id")

    @classmethod
    def from_text(cls, tweet_id, text, label=None, annotations=None):
        return cls(tweet_id, text, tuple(parse_tags(text)), annotations, label)

    @property
    def tokens(self) -> list[str]:
        return tokenize(self.text)


class LexiconAnnotator:
    """Word-list tagger: POS from a lexicon, entities from gazetteers."""

    def __init__(self, pos_lexicon: Mapping[str, str] | None = None,
                 gazetteer: Mapping[str, str] | None = None, default_pos: str = "x"):
        self.pos_lexicon = {k.lower(): v for k, v in (pos_lexicon or {}).items()}
        self.gazetteer = {k.lower(): v for k, v in (gazetteer or {}).items()}
        self.default_pos = default_pos

    def _pos(self, token):
        if token.lower() in self.pos_lexicon:
            return self.pos_lexicon[token.lower()]
        if is_number(token):
            return "m"
        if all(unicodedata.category(ch).startswith("P") for ch in token):
            return "w"
        return self.default_pos

    def annotate(self, tokens: Sequence[str]) -> tuple:
        return tuple(TokenAnnotation(self._pos(t), self.gazetteer.get(t.lower())) for t in tokens)

    def __call__(self, record: TweetRecord) -> TweetRecord:
        return TweetRecord(record.tweet_id, record.text, record.tags,
                           self.annotate(record.tokens), record.label)


def _check_annotations(record, tokens):
    if record.annotations is not None and len(record.annotations) != len(tokens):
        raise ValidationError(
            f"tweet {record.tweet_id!r}: {len(record.annotations)} annotations for {len(tokens)} tokens"
        )


def word_descriptor(tokens: Sequence[str], pos: Sequence[str] | None = None) -> str:
    if pos is None:
        body = " ".join(tokens)
    else:
        body = " ".join(f"{t}/{p}" for t, p in zip(tokens, pos))
    return f"w{len(tokens)}:{body}"


def extract_word_features(record: TweetRecord, order: int = 2, pos_colored: bool = False) -> Counter:
    if order not in (1, 2):
        raise ValidationError(f"n-gram order must be 1 or 2, got {order}")
    tokens = record.tokens
    pos = None
    if pos_colored:
        if record.annotations is None:
            raise ValidationError(f"tweet {record.tweet_id!r}: POS coloring needs annotations")
        _check_annotations(record, tokens)
        pos = [a.pos for a in record.annotations]
    out = Counter()
    for i, tok in enumerate(tokens):
        out[word_descriptor([tok], None if pos is None else [pos[i]])] += 1
    if order == 2:
        for i in range(len(tokens) - 1):
            out[word_descriptor(tokens[i:i + 2], None if pos is None else pos[i:i + 2])] += 1
    return out


def extract_morphological(record: TweetRecord, quantifier_lexicon: Iterable[str] = DEFAULT_QUANTIFIERS) -> dict:
    lex = {q.lower() for q in quantifier_lexicon}
    tokens = record.tokens
    return {
        "number": sum(is_number(t) for t in tokens),
        "question": sum(ch in QUESTION_MARKS for ch in record.text),
        "exclamation": sum(ch in EXCLAMATION_MARKS for ch in record.text),
        "quantifier": sum(t.lower() in lex for t in tokens),
    }


def extract_tag_ner_length(record: TweetRecord) -> dict:
    tokens = record.tokens
    out = {"tag_present": int(len(record.tags) > 0), "tag_count": len(record.tags)}
    counts = Counter()
    if record.annotations is not None:
        _check_annotations(record, tokens)
        counts = Counter(a.entity for a in record.annotations if a.entity)
    for kind in ENTITY_KINDS:
        out[f"ner_{kind.lower()}"] = counts.get(kind, 0)
    out["length"] = len(tokens)
    return out


# descriptor strings for the fixed (non-word) features
_FIXED = {
    "tag_present": "tag:present",
    "tag_count": "tag:count",
    **{f"morph_{k}": f"morph:{k}" for k in MORPH_KINDS},
    **{f"ner_{k.lower()}": f"ner:{k}" for k in ENTITY_KINDS},
    "length": "len:tokens",
}


@dataclass(frozen=True)
class FeatureConfig:
    order: int = 2
    pos_colored: bool = False
    min_count: int = 2
    binary: bool = False
    word: bool = True
    tags: bool = True
    morphology: bool = True
    ner: bool = True
    length: bool = True
    quantifiers: frozenset = DEFAULT_QUANTIFIERS

    def fixed_descriptors(self) -> list[str]:
        keys = []
        if self.tags:
            keys += ["tag_present", "tag_count"]
        if self.morphology:
            keys += [f"morph_{k}" for k in MORPH_KINDS]
        if self.ner:
            keys += [f"ner_{k.lower()}" for k in ENTITY_KINDS]
        if self.length:
            keys.append("length")
        return [_FIXED[k] for k in keys]


def extract_all(record: TweetRecord, config: FeatureConfig) -> Counter:
    """Every feature of one record as descriptor -> value."""
    out = Counter()
    if config.word:
        out.update(extract_word_features(record, config.order, config.pos_colored))
    fixed = {}
    if config.morphology:
        fixed.update({f"morph_{k}": v for k, v in extract_morphological(record, config.quantifiers).items()})
    if config.tags or config.ner or config.length:
        fixed.update(extract_tag_ner_length(record))
    wanted = set(config.fixed_descriptors())
    for key, value in fixed.items():
        desc = _FIXED[key]
        if desc in wanted and value:
            out[desc] = value
    return out


@dataclass(frozen=True)
class Vocabulary:
    entries: tuple
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if list(self.entries) != sorted(set(self.entries)):
            raise ValidationError("vocabulary entries must be unique and sorted")
        object.__setattr__(self, "index", {d: i for i, d in enumerate(self.entries)})

    def __len__(self):
        return len(self.entries)

    def __contains__(self, desc):
        return desc in self.index


@dataclass(frozen=True)
class FeatureGroups:
    group_of: np.ndarray
    groups: tuple
    names: tuple = ()

    def __post_init__(self):
        m = len(self.group_of)
        covered = np.zeros(m, dtype=int)
        for g in self.groups:
            if len(g) == 0:
                raise ValidationError("empty feature group")
            covered[np.asarray(g)] += 1
        if m and not np.all(covered == 1):
            raise ValidationError("feature groups must partition the rows")

    @classmethod
    def from_labels(cls, group_of, names=()) -> "FeatureGroups":
        group_of = np.asarray(group_of, dtype=np.int64)
        ids = np.unique(group_of)
        if len(ids) and not np.array_equal(ids, np.arange(len(ids))):
            remap = {g: i for i, g in enumerate(ids)}
            group_of = np.array([remap[g] for g in group_of], dtype=np.int64)
        groups = tuple(np.flatnonzero(group_of == g) for g in range(len(ids)))
        return cls(group_of, groups, tuple(names))

    @classmethod
    def singletons(cls, m: int) -> "FeatureGroups":
        return cls.from_labels(np.arange(m))

    @property
    def m(self) -> int:
        return len(self.group_of)

    def __len__(self):
        return len(self.groups)


@dataclass(frozen=True)
class FeatureMatrix:
    X: sparse.csr_matrix
    tweet_ids: tuple
    column_norm: str = "unit-l2"

    @property
    def shape(self):
        return self.X.shape


def build_vocabulary(records: Sequence[TweetRecord], config: FeatureConfig = FeatureConfig()) -> Vocabulary:
    totals = Counter()
    for r in records:
        totals.update(extract_all(r, config))
    words = {d for d, c in totals.items() if d.startswith("w") and c >= config.min_count}
    return Vocabulary(tuple(sorted(words | set(config.fixed_descriptors()))))


def build_matrix(records: Sequence[TweetRecord], vocab: Vocabulary | None = None,
                 norm: str = "unit-l2", config: FeatureConfig = FeatureConfig(),
                 tweet_order: Sequence[str] | None = None) -> tuple[FeatureMatrix, Vocabulary]:
    """Features-by-tweets matrix; column ``j`` describes ``records[j]``.

    Without ``vocab`` the vocabulary is built from ``records``; with one,
    features outside it are dropped.  ``tweet_order`` is checked against
    the record order when given.
    """
    if norm not in ("none", "unit-l2"):
        raise ValidationError(f"unknown column normalization {norm!r}")
    if tweet_order is not None:
        if len(tweet_order) != len(records):
            raise ValidationError(f"{len(records)} records for {len(tweet_order)} tweets")
        for r, t in zip(records, tweet_order):
            if r.tweet_id != t:
                raise ValidationError(f"record {r.tweet_id!r} out of order; expected {t!r}")
    if vocab is None:
        vocab = build_vocabulary(records, config)

    rows, cols, vals = [], [], []
    for j, r in enumerate(records):
        for desc, value in extract_all(r, config).items():
            i = vocab.index.get(desc)
            if i is not None:
                rows.append(i)
                cols.append(j)
                vals.append(1.0 if config.binary else float(value))
    X = sparse.coo_matrix((vals, (rows, cols)), shape=(len(vocab), len(records)), dtype=float).tocsc()
    X.sum_duplicates()
    X.sort_indices()
    if norm == "unit-l2":
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=0))).ravel()
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        X = X @ sparse.diags(scale)
    X = sparse.csr_matrix(X)
    X.sort_indices()
    return FeatureMatrix(X, tuple(r.tweet_id for r in records), norm), vocab


def _group_key(desc: str, pos_colored: bool) -> str:
    if not desc.startswith("w"):
        return desc
    order, body = desc.split(":", 1)
    if pos_colored:
        first = body.split(" ", 1)[0]
        if "/" in first[1:]:
            return "pos:" + first.rsplit("/", 1)[1]
    return "ngram:" + order


def assign_groups(vocab: Vocabulary, pos_colored: bool = False) -> FeatureGroups:
    """Group word features by first-token POS (colored) or n-gram order.

    Every non-word feature is its own group.  Group ids follow the sorted
    group keys.
    """
    keys = [_group_key(d, pos_colored) for d in vocab.entries]
    names = sorted(set(keys))
    gid = {k: i for i, k in enumerate(names)}
    return FeatureGroups.from_labels([gid[k] for k in keys], names)
