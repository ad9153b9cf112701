"""Documents, entity spans, JSON Lines I/O and corpus statistics."""

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

ENTITY_TYPES = ("TotalAssets", "BeginningCash", "EndCash", "FinancialCash", "ChangeInCash", "QuarterKeys")


class SchemaError(ValueError):
    """A dataset file violates the Document schema; ``line`` is 1-based."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = f"{path or '<input>'}:{line}: " if line is not None else ""
        super().__init__(where + message)


class EntitySpan(NamedTuple):
    type: str
    start: int
    end: int  # inclusive


@dataclass
class Word:
    text: str
    page: int
    bbox: tuple


@dataclass
class Document:
    id: str
    pages: list  # [(width, height)]
    words: list = field(default_factory=list)
    entities: list = field(default_factory=list)


def check_spans(spans, n_words=None):
    """Raise ValueError if spans overlap, are malformed or fall outside ``[0, n_words)``."""
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    prev_end = -1
    for s in ordered:
        if s.type not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type {s.type!r}")
        if s.start > s.end or s.start < 0:
            raise ValueError(f"bad span {tuple(s)}")
        if n_words is not None and s.end >= n_words:
            raise ValueError(f"span {tuple(s)} beyond {n_words} words")
        if s.start <= prev_end:
            raise ValueError(f"overlapping spans at word {s.start}")
        prev_end = s.end


def validate_document(doc):
    """Return a list of invariant violations (empty when the document is valid)."""
    problems = []
    if not doc.pages:
        problems.append("document has no pages")
    for k, (w, h) in enumerate(doc.pages):
        if not (w > 0 and h > 0):
            problems.append(f"page {k} has non-positive size {w}x{h}")
    last_page = 0
    for i, word in enumerate(doc.words):
        if not 0 <= word.page < len(doc.pages):
            problems.append(f"word {i} on missing page {word.page}")
            continue
        if word.page < last_page:
            problems.append(f"word {i} breaks page-major reading order")
        last_page = word.page
        x0, y0, x1, y1 = word.bbox
        pw, ph = doc.pages[word.page]
        if not (0 <= x0 <= x1 <= pw and 0 <= y0 <= y1 <= ph):
            problems.append(f"word {i} bbox {tuple(word.bbox)} outside page {pw}x{ph} or unordered")
    try:
        check_spans(doc.entities, len(doc.words))
    except ValueError as exc:
        problems.append(str(exc))
    return problems


def normalize_bbox(box, page_w, page_h):
    """Scale a source-unit box to integer coordinates in ``[0, 1000]``."""
    if not (page_w > 0 and page_h > 0):
        raise ValueError(f"page size must be positive, got {page_w}x{page_h}")
    x0, y0, x1, y1 = box

    def f(v, dim):
        return min(1000, max(0, math.floor(1000 * v / dim)))

    return (f(x0, page_w), f(y0, page_h), f(x1, page_w), f(y1, page_h))


# ---------------------------------------------------------------------------
# JSON Lines


def document_from_dict(obj):
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    for key in ("id", "pages", "words", "entities"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    extra = set(obj) - {"id", "pages", "words", "entities"}
    if extra:
        raise ValueError(f"unknown field(s) {sorted(extra)}")
    try:
        pages = [(float(p["width"]), float(p["height"])) for p in obj["pages"]]
        words = [Word(str(w["text"]), int(w["page"]), tuple(float(v) for v in w["bbox"])) for w in obj["words"]]
        ents = [EntitySpan(str(e["type"]), int(e["start"]), int(e["end"])) for e in obj["entities"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed record: {exc!r}") from None
    if any(len(w.bbox) != 4 for w in words):
        raise ValueError("every bbox needs exactly 4 numbers")
    return Document(str(obj["id"]), pages, words, ents)


def _num(v):
    return int(v) if float(v).is_integer() else v


def document_to_dict(doc):
    return {
        "id": doc.id,
        "pages": [{"width": _num(w), "height": _num(h)} for w, h in doc.pages],
        "words": [{"text": w.text, "page": w.page, "bbox": [_num(v) for v in w.bbox]} for w in doc.words],
        "entities": [{"type": e.type, "start": e.start, "end": e.end} for e in doc.entities],
    }


def parse_jsonl(lines, path=None):
    docs = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = document_from_dict(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON ({exc.msg})", lineno, path) from None
        except ValueError as exc:
            raise SchemaError(str(exc), lineno, path) from None
        problems = validate_document(doc)
        if problems:
            raise SchemaError("; ".join(problems), lineno, path)
        docs.append(doc)
    return docs


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return parse_jsonl(fh, path=str(path))


def write_jsonl(path, docs):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_dict(doc), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# statistics


class DatasetStats(NamedTuple):
    forms: int
    pages: int
    words: int
    entities: int


def dataset_stats(docs):
    return DatasetStats(
        len(docs),
        sum(len(d.pages) for d in docs),
        sum(len(d.words) for d in docs),
        sum(len(d.entities) for d in docs),
    )


def split_stats(splits):
    """Per-split rows plus an ``Overall`` row; ``splits`` maps name -> documents."""
    rows = [(name, dataset_stats(docs)) for name, docs in splits.items()]
    total = DatasetStats(*(sum(col) for col in zip(*(s for _, s in rows)))) if rows else DatasetStats(0, 0, 0, 0)
    rows.append(("Overall", total))
    return rows


def format_stats_table(rows):
    header = ("Dataset Split", "#Forms", "#Pages", "#Words", "#Entities")
    body = [(name, *map(str, stats)) for name, stats in rows]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(5)]
    fmt = lambda r: " | ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))  # noqa: E731
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep, *(fmt(r) for r in body)]) + "\n"
