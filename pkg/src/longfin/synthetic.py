"""Synthetic financial-form corpora for smoke training and contrast experiments.

``toy_forms`` builds short one-page quarterly forms carrying all six entity
types. ``long_range_forms`` builds multi-page filings where a cash-flow row far
down the document is an entity only if the column headers near the top report
a "three months" period; a 512-token window over the rows cannot see them.
"""

from .document import Document, EntitySpan, Word

PAGE_W, PAGE_H = 612.0, 792.0  # US letter in points
_MONTHS = ("march", "june", "september", "december")
_FILLER = (
    "the", "company", "reported", "results", "of", "operations", "for", "period", "and", "in",
    "accordance", "with", "accounting", "principles", "see", "notes", "to", "condensed", "statements",
    "revenue", "expenses", "segment", "income", "tax", "liabilities", "equity", "shares", "per",
    "basis", "fair", "value", "debt", "lease", "interest", "other", "net",
)


class _Page:
    """Lays words out left to right, wrapping lines and pages."""

    def __init__(self, words_per_line=10, lines_per_page=40):
        self.wpl = words_per_line
        self.lpp = lines_per_page
        self.page = 0
        self.line = 0
        self.col = 0
        self.words = []

    def newline(self):
        self.col = 0
        self.line += 1
        if self.line >= self.lpp:
            self.line = 0
            self.page += 1

    def add(self, text):
        if self.col >= self.wpl:
            self.newline()
        cw = PAGE_W / (self.wpl + 2)
        x0 = cw * (self.col + 1)
        y0 = 36.0 + self.line * 18.0
        self.words.append(Word(text, self.page, (round(x0, 2), round(y0, 2), round(x0 + cw * 0.8, 2), round(y0 + 12.0, 2))))
        self.col += 1
        return len(self.words) - 1

    def row(self, texts):
        idx = [self.add(t) for t in texts]
        self.newline()
        return idx

    @property
    def n_pages(self):
        return self.page + (1 if self.line or self.col else 0)


def _amount(rng):
    return f"{int(rng.integers(1, 100))},{int(rng.integers(0, 10))}00"


# a small shared pool, so amounts carry no information about their label
_POOL = tuple(f"{k},{(7 * k) % 10}00" for k in range(11, 19))


def _pooled_amount(rng):
    return _POOL[int(rng.integers(0, len(_POOL)))]


def toy_form(rng, doc_id):
    """A one-page quarterly form with one entity of each type."""
    lay = _Page(words_per_line=12, lines_per_page=48)
    month = _MONTHS[int(rng.integers(0, 4))]
    year = str(int(rng.integers(2018, 2024)))
    ents = []
    company = f"acme{doc_id}"
    lay.row(["form", "10-q", company, "quarterly", "report"])
    q = lay.row(["three", "months", "ended", month, "31", year])
    ents.append(EntitySpan("QuarterKeys", q[3], q[5]))
    for label, etype in (
        (["total", "assets"], "TotalAssets"),
        (["cash", "at", "beginning", "of", "period"], "BeginningCash"),
        (["net", "cash", "provided", "by", "financing", "activities"], "FinancialCash"),
        (["net", "change", "in", "cash"], "ChangeInCash"),
        (["cash", "at", "end", "of", "period"], "EndCash"),
    ):
        idx = lay.row(label + [_amount(rng)])
        ents.append(EntitySpan(etype, idx[-1], idx[-1]))
    lay.row(["signed", company])
    return Document(str(doc_id), [(PAGE_W, PAGE_H)] * lay.n_pages, lay.words, sorted(ents, key=lambda e: e.start))


def toy_forms(n, rng):
    return [toy_form(rng, i) for i in range(n)]


def long_range_form(rng, doc_id, three_months, amounts, header_repeats=40, gap_words=520, rows=4):
    """A multi-page filing whose cash-flow rows are labelled only when the
    column headers at the top report a "three months" period.

    The header block repeats "<period> months ended" ``header_repeats`` times,
    ``gap_words`` words of neutral boilerplate follow, then the table rows.
    Only the period word differs between a three-month and a nine-month
    filing built from the same ``amounts``.
    """
    period = "three" if three_months else "nine"
    lay = _Page(words_per_line=9, lines_per_page=40)
    ents = []
    lay.row(["form", "10-q", "statements", "of", "cash", "flows"])
    for _ in range(header_repeats):
        for w in (period, "months", "ended"):
            lay.add(w)
    lay.newline()
    for k in range(gap_words):
        lay.add(_FILLER[(7 * k + k // len(_FILLER)) % len(_FILLER)])
    lay.newline()
    for r in range(rows):
        idx = lay.row(["net", "change", "in", "cash", amounts[r]])
        if three_months:
            ents.append(EntitySpan("ChangeInCash", idx[-1], idx[-1]))
    idx = lay.row(["total", "assets", amounts[rows]])
    ents.append(EntitySpan("TotalAssets", idx[-1], idx[-1]))
    return Document(str(doc_id), [(PAGE_W, PAGE_H)] * lay.n_pages, lay.words, ents)


def long_range_forms(n, rng, header_repeats=40, gap_words=520, rows=4):
    """Pairs of filings identical except for the reported period."""
    docs = []
    for i in range(n):
        if i % 2 == 0:
            amounts = [_pooled_amount(rng) for _ in range(rows + 1)]
        docs.append(long_range_form(rng, i, i % 2 == 0, amounts, header_repeats, gap_words, rows))
    return docs
