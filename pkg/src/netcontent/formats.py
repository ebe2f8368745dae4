"""Plain-text file formats shared by the command line tools.

All files are UTF-8, tab separated, ``#`` starts a comment line.

* edge list: ``src<TAB>dst<TAB>tweet_id[<TAB>weight]``
* coordinate matrix: header ``n_rows n_cols nnz`` then ``i j value``
  (0-based, ``%.17g``); the row/column tweet ids go to ``<path>.ids``
* tweet records: ``tweet_id<TAB>label-or-?<TAB>text``
* annotations: ``tweet_id<TAB>token_index<TAB>pos<TAB>entity``
* labels: ``tweet_id<TAB>label``
* vocabulary: ``row<TAB>descriptor<TAB>group_id``
* predictions: ``tweet_id<TAB>class<TAB>score0<TAB>score1``
"""
from __future__ import annotations

import hashlib
import io
import json
import os
from collections import defaultdict
from dataclasses import asdict
from pathlib import Path

import numpy as np
from scipy import sparse

from . import __version__
from .errors import DataIOError, DuplicateTweetError, ValidationError
from .features import FeatureConfig, FeatureGroups, TokenAnnotation, TweetRecord, Vocabulary
from .graph import Interaction, TweetGraph, UserGraph
from .solver import CLASSES, Hyperparams, WeightMatrix

MODEL_MAGIC = "netcontent-model"
MODEL_VERSION = 1
UNLABELED = "?"


def _read_lines(path):
    """Yield ``(line_number, fields)`` for non-comment, non-blank lines."""
    text = _read_text(path)
    for no, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        yield no, line.split("\t")


def _write_text(path, text: str):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataIOError(f"{path}: {exc.strerror}") from None


def _float(s, path, no, what="value"):
    try:
        v = float(s)
    except ValueError:
        raise ValidationError(f"{path}:{no}: bad {what} {s!r}") from None
    if not np.isfinite(v):
        raise ValidationError(f"{path}:{no}: non-finite {what}")
    return v


def _int(s, path, no, what="index"):
    try:
        return int(s)
    except ValueError:
        raise ValidationError(f"{path}:{no}: bad {what} {s!r}") from None


# -- edge lists ------------------------------------------------------------

def read_edge_list(path) -> UserGraph:
    edges, seen = [], {}
    for no, f in _read_lines(path):
        if len(f) not in (3, 4) or not all(x.strip() for x in f[:3]):
            raise ValidationError(f"{path}:{no}: expected src, dst, tweet_id[, weight]")
        w = _float(f[3], path, no, "weight") if len(f) == 4 else 1.0
        if w < 0:
            raise ValidationError(f"{path}:{no}: negative weight")
        tweet = f[2].strip()
        if tweet in seen:
            raise DuplicateTweetError(tweet, no)
        seen[tweet] = no
        edges.append(Interaction(f[0].strip(), f[1].strip(), tweet, w))
    if not edges:
        raise DataIOError(f"{path}: no edges")
    return UserGraph.from_edges(edges)


def write_edge_list(path, g: UserGraph):
    lines = [f"{e.src}\t{e.dst}\t{e.tweet}" + ("" if e.weight == 1.0 else f"\t{e.weight:.17g}")
             for e in g.edges]
    _write_text(path, "".join(l + "\n" for l in lines))


# -- coordinate matrices ---------------------------------------------------

def ids_path(path) -> str:
    return str(path) + ".ids"


def write_coo(path, M, ids=None):
    """Write a matrix (dense or sparse) in coordinate form, row-major order."""
    M = sparse.coo_matrix(M)
    M.sum_duplicates()
    order = np.lexsort((M.col, M.row))
    rows, cols, vals = M.row[order], M.col[order], M.data[order]
    out = [f"{M.shape[0]} {M.shape[1]} {len(vals)}\n"]
    out += [f"{i} {j} {v:.17g}\n" for i, j, v in zip(rows, cols, vals)]
    _write_text(path, "".join(out))
    if ids is not None:
        _write_text(ids_path(path), "".join(f"{t}\n" for t in ids))


def _parse_coo_body(lines, path, nr, nc):
    # slow path, only used to report the first bad line
    for no, f in lines:
        parts = f[0].split() if len(f) == 1 else f
        if len(parts) != 3:
            raise ValidationError(f"{path}:{no}: expected 'i j value'")
        i, j = _int(parts[0], path, no), _int(parts[1], path, no)
        if not (0 <= i < nr and 0 <= j < nc):
            raise ValidationError(f"{path}:{no}: index out of range")
        _float(parts[2], path, no)


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError:
        raise DataIOError(f"{path}: no such file") from None
    except UnicodeDecodeError as exc:
        raise DataIOError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    except OSError as exc:
        raise DataIOError(f"{path}: {exc.strerror}") from None


def read_coo(path) -> tuple[sparse.csr_matrix, tuple | None]:
    text = _read_text(path)
    lines = text.splitlines()
    start = next((k for k, l in enumerate(lines) if l.strip() and not l.startswith("#")), None)
    if start is None:
        raise DataIOError(f"{path}: empty matrix file")
    head = lines[start].split()
    if len(head) != 3:
        raise ValidationError(f"{path}:{start + 1}: header must be 'rows cols nnz'")
    nr, nc, nnz = (_int(h, path, start + 1, "header field") for h in head)
    try:
        tab = np.loadtxt(io.StringIO(text), comments="#", skiprows=start + 1, ndmin=2)
        if nnz == 0:
            tab = tab.reshape(0, 3)
        ok = tab.shape == (nnz, 3)
        if ok:
            rows, cols, vals = tab[:, 0].astype(np.int64), tab[:, 1].astype(np.int64), tab[:, 2]
            ok = (np.all(tab[:, :2] == np.floor(tab[:, :2])) and np.all(np.isfinite(vals))
                  and np.all((rows >= 0) & (rows < nr) & (cols >= 0) & (cols < nc)))
    except ValueError:
        ok = False
    if not ok:
        body = [(no, f) for no, f in _read_lines(path) if no > start + 1]
        if len(body) != nnz:
            raise ValidationError(f"{path}: header announces {nnz} entries, found {len(body)}")
        _parse_coo_body(body, path, nr, nc)
        raise ValidationError(f"{path}: malformed entries")
    M = sparse.coo_matrix((vals, (rows, cols)), shape=(nr, nc)).tocsr()
    ids = None
    if os.path.exists(ids_path(path)):
        ids = tuple(f[0] for _, f in _read_lines(ids_path(path)))
        if len(ids) != nr:
            raise ValidationError(f"{ids_path(path)}: {len(ids)} ids for {nr} rows")
    return M, ids


def write_tweet_graph(path, g: TweetGraph):
    write_coo(path, g.adjacency, g.nodes)


def read_tweet_graph(path) -> TweetGraph:
    A, ids = read_coo(path)
    if ids is None:
        raise DataIOError(f"{ids_path(path)}: tweet id file missing")
    if A.shape[0] != A.shape[1]:
        raise ValidationError(f"{path}: tweet graph must be square")
    return TweetGraph(ids, A)


# -- tweet records, labels, annotations -----------------------------------

def _parse_label(s, path, no):
    s = s.strip()
    if s == UNLABELED:
        return None
    if s not in ("0", "1"):
        raise ValidationError(f"{path}:{no}: label must be 0, 1 or '?', got {s!r}")
    return int(s)


def read_records(path, annotations=None) -> list[TweetRecord]:
    records, seen = [], set()
    ann = read_annotations(annotations) if annotations else {}
    for no, f in _read_lines(path):
        if len(f) < 3:
            raise ValidationError(f"{path}:{no}: expected tweet_id, label, text")
        tid = f[0].strip()
        if tid in seen:
            raise DuplicateTweetError(tid, no)
        seen.add(tid)
        label = _parse_label(f[1], path, no)
        text = "\t".join(f[2:])
        rec = TweetRecord.from_text(tid, text, label)
        if tid in ann:
            tokens = rec.tokens
            got = ann.pop(tid)
            if sorted(got) != list(range(len(tokens))):
                raise ValidationError(f"{annotations}: tweet {tid!r} needs one annotation per token "
                                      f"({len(tokens)} tokens)")
            rec = TweetRecord(tid, rec.text, rec.tags, tuple(got[i] for i in range(len(tokens))), label)
        records.append(rec)
    if not records:
        raise DataIOError(f"{path}: no tweet records")
    if ann:
        raise ValidationError(f"{annotations}: annotations for unknown tweet {next(iter(ann))!r}")
    return records


def write_records(path, records, labels=None):
    out = []
    for r in records:
        lab = labels.get(r.tweet_id) if labels is not None else r.label
        out.append(f"{r.tweet_id}\t{UNLABELED if lab is None else int(lab)}\t{r.text}\n")
    _write_text(path, "".join(out))


def read_annotations(path) -> dict:
    """``{tweet_id: {token_index: TokenAnnotation}}``; an empty entity field means none."""
    out = defaultdict(dict)
    for no, f in _read_lines(path):
        if len(f) not in (3, 4):
            raise ValidationError(f"{path}:{no}: expected tweet_id, token_index, pos[, entity]")
        k = _int(f[1], path, no, "token index")
        ent = f[3].strip() if len(f) == 4 and f[3].strip() else None
        if k in out[f[0]]:
            raise ValidationError(f"{path}:{no}: token {k} of {f[0]!r} annotated twice")
        out[f[0]][k] = TokenAnnotation(f[2].strip(), ent)
    return dict(out)


def read_labels(path) -> dict:
    labels = {}
    for no, f in _read_lines(path):
        if len(f) != 2:
            raise ValidationError(f"{path}:{no}: expected tweet_id, label")
        if f[0] in labels:
            raise DuplicateTweetError(f[0], no)
        lab = _parse_label(f[1], path, no)
        if lab is None:
            raise ValidationError(f"{path}:{no}: label file entries must be 0 or 1")
        labels[f[0]] = lab
    if not labels:
        raise DataIOError(f"{path}: no labels")
    return labels


def write_labels(path, labels: dict):
    _write_text(path, "".join(f"{t}\t{int(labels[t])}\n" for t in sorted(labels)))


# -- vocabulary and model --------------------------------------------------

def vocabulary_lines(vocab: Vocabulary, groups: FeatureGroups) -> list[str]:
    return [f"{i}\t{d}\t{int(groups.group_of[i])}" for i, d in enumerate(vocab.entries)]


def write_vocabulary(path, vocab: Vocabulary, groups: FeatureGroups):
    _write_text(path, "".join(l + "\n" for l in vocabulary_lines(vocab, groups)))


def _config_json(cfg: FeatureConfig) -> str:
    d = asdict(cfg)
    d["quantifiers"] = sorted(cfg.quantifiers)
    return json.dumps(d, sort_keys=True, ensure_ascii=False)


def _config_from_json(s: str) -> FeatureConfig:
    d = json.loads(s)
    d["quantifiers"] = frozenset(d["quantifiers"])
    return FeatureConfig(**d)


def write_model(path, w: WeightMatrix, vocab: Vocabulary, h: Hyperparams, config: FeatureConfig,
                n: int, norm: str = "unit-l2"):
    W = w.W
    m, c = W.shape
    head = [f"# {MODEL_MAGIC} {MODEL_VERSION}"]
    for k, v in asdict(h).items():
        head.append(f"{k}\t{v!r}")
    head += [f"m\t{m}", f"n\t{n}", f"c\t{c}", "classes\t" + "\t".join(CLASSES[:c]),
             f"norm\t{norm}", f"features\t{_config_json(config)}", "[vocabulary]"]
    head += vocabulary_lines(vocab, w.groups)
    head.append("[weights]")
    head += [f"{i}\t{j}\t{W[i, j]:.17g}" for i in range(m) for j in range(c)]
    _write_text(path, "".join(l + "\n" for l in head))


def read_model(path) -> dict:
    """Returns a dict with ``weights``, ``vocabulary``, ``hyperparams``, ``features``, ``norm``, ``n``."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataIOError(f"{path}: {exc.strerror}") from None
    if not lines or not lines[0].startswith(f"# {MODEL_MAGIC} "):
        raise ValidationError(f"{path}: not a model file")
    version = lines[0].split()[-1]
    if version != str(MODEL_VERSION):
        raise ValidationError(f"{path}: unsupported model version {version}")
    header, section, vocab_rows, weights = {}, None, [], []
    for no, line in enumerate(lines[1:], 2):
        if line in ("[vocabulary]", "[weights]"):
            section = line
            continue
        f = line.split("\t")
        if section is None:
            header[f[0]] = f[1:]
        elif section == "[vocabulary]":
            if len(f) != 3:
                raise ValidationError(f"{path}:{no}: bad vocabulary row")
            vocab_rows.append((int(f[0]), f[1], int(f[2])))
        else:
            if len(f) != 3:
                raise ValidationError(f"{path}:{no}: bad weight row")
            weights.append((int(f[0]), int(f[1]), _float(f[2], path, no, "weight")))
    try:
        m, c, n = int(header["m"][0]), int(header["c"][0]), int(header["n"][0])
        hp = Hyperparams(**{k: (int if k == "max_iter" else float)(header[k][0])
                            for k in Hyperparams.__dataclass_fields__})
        config = _config_from_json(header["features"][0])
        norm = header["norm"][0]
    except (KeyError, IndexError, ValueError) as exc:
        raise ValidationError(f"{path}: incomplete model header ({exc})") from None
    if [r[0] for r in vocab_rows] != list(range(m)):
        raise ValidationError(f"{path}: vocabulary rows do not cover 0..{m - 1}")
    W = np.zeros((m, c))
    if len(weights) != m * c:
        raise ValidationError(f"{path}: expected {m * c} weights, found {len(weights)}")
    for i, j, v in weights:
        W[i, j] = v
    vocab = Vocabulary(tuple(r[1] for r in vocab_rows))
    groups = FeatureGroups.from_labels([r[2] for r in vocab_rows], ())
    return {"weights": WeightMatrix(W, groups), "vocabulary": vocab, "hyperparams": hp,
            "features": config, "norm": norm, "n": n}


# -- predictions, manifests ------------------------------------------------

def write_predictions(path, tweet_ids, classes, scores):
    out = [f"{t}\t{int(k)}\t" + "\t".join(f"{s:.17g}" for s in row) + "\n"
           for t, k, row in zip(tweet_ids, classes, scores)]
    _write_text(path, "".join(out))


def read_predictions(path) -> dict:
    out = {}
    for no, f in _read_lines(path):
        if len(f) < 2:
            raise ValidationError(f"{path}:{no}: expected tweet_id, class, scores")
        if f[0] in out:
            raise DuplicateTweetError(f[0], no)
        out[f[0]] = _parse_label(f[1], path, no)
    return out


def file_digest(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 16), b""):
                h.update(chunk)
    except OSError as exc:
        raise DataIOError(f"{path}: {exc.strerror}") from None
    return h.hexdigest()


def write_manifest(path, command: str, config: dict, inputs=()):
    """Run manifest: command, flags, input digests and tool version.  No timestamps."""
    doc = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "inputs": {os.path.basename(str(p)): file_digest(p) for p in inputs if p},
        "version": __version__,
    }
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
