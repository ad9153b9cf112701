"""Entity-level precision / recall / F1 over exact (type, start, end) matches."""

import json
from dataclasses import asdict, dataclass, field

from .document import ENTITY_TYPES, EntitySpan, check_spans

# Column labels for the per-entity table.
TYPE_TITLES = {
    "BeginningCash": "Beginning Cash",
    "EndCash": "Ending Cash",
    "FinancialCash": "Financial Cash",
    "ChangeInCash": "Change in Cash",
    "QuarterKeys": "Quarter Keys",
    "TotalAssets": "Total Assets",
}


def _prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass
class TypeScores:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass
class EvalReport:
    micro_precision: float = 0.0
    micro_recall: float = 0.0
    micro_f1: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_type: dict = field(default_factory=lambda: {t: TypeScores() for t in ENTITY_TYPES})
    truncated_tokens: int = 0

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _normalise(spans):
    uniq = sorted({EntitySpan(*s) for s in spans}, key=lambda s: (s.start, s.end, s.type))
    check_spans(uniq)
    return uniq


def span_counts(pred, gold):
    """Per-type ``[tp, fp, fn]`` for one document."""
    pred, gold = _normalise(pred), _normalise(gold)
    gold_set = set(gold)
    counts = {t: [0, 0, 0] for t in ENTITY_TYPES}
    for s in pred:
        counts[s.type][0 if s in gold_set else 1] += 1
    pred_set = set(pred)
    for s in gold:
        if s not in pred_set:
            counts[s.type][2] += 1
    return counts


def report_from_counts(counts, truncated_tokens=0):
    rep = EvalReport(truncated_tokens=truncated_tokens)
    for t in ENTITY_TYPES:
        tp, fp, fn = counts[t]
        rep.per_type[t] = TypeScores(*_prf(tp, fp, fn), tp, fp, fn)
    rep.tp = sum(c[0] for c in counts.values())
    rep.fp = sum(c[1] for c in counts.values())
    rep.fn = sum(c[2] for c in counts.values())
    rep.micro_precision, rep.micro_recall, rep.micro_f1 = _prf(rep.tp, rep.fp, rep.fn)
    return rep


def entity_f1(pred, gold):
    """Score one document's predicted spans against its gold spans.

    Duplicates on either side are collapsed; overlapping spans raise ValueError.
    """
    return report_from_counts(span_counts(pred, gold))


def corpus_f1(pairs, truncated_tokens=0):
    """Pool counts over ``(pred, gold)`` pairs from several documents."""
    total = {t: [0, 0, 0] for t in ENTITY_TYPES}
    for pred, gold in pairs:
        for t, c in span_counts(pred, gold).items():
            for k in range(3):
                total[t][k] += c[k]
    return report_from_counts(total, truncated_tokens)


def format_report(rep, model_name="model"):
    """Plain-text tables: overall P/R/F1, then F1 by entity type (percent)."""
    pct = lambda v: f"{100 * v:.2f}"  # noqa: E731
    head1 = ("Model", "Precision", "Recall", "F1")
    row1 = (model_name, pct(rep.micro_precision), pct(rep.micro_recall), pct(rep.micro_f1))
    order = ("BeginningCash", "EndCash", "FinancialCash", "ChangeInCash", "QuarterKeys", "TotalAssets")
    head2 = ("Model",) + tuple(TYPE_TITLES[t] for t in order)
    row2 = (model_name,) + tuple(pct(rep.per_type[t].f1) for t in order)

    def table(head, row):
        w = [max(len(a), len(b)) for a, b in zip(head, row)]
        line = lambda r: " | ".join(c.ljust(x) if i == 0 else c.rjust(x) for i, (c, x) in enumerate(zip(r, w)))  # noqa: E731
        return "\n".join([line(head), "-+-".join("-" * x for x in w), line(row)])

    tail = f"\ntruncated tokens: {rep.truncated_tokens}\n" if rep.truncated_tokens else "\n"
    return table(head1, row1) + "\n\n" + table(head2, row2) + tail
