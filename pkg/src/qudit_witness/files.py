"""Output helpers: atomic text writes and the CSV layouts used by the CLI."""
from __future__ import annotations

import csv
import io
import itertools
import os
import tempfile
from pathlib import Path

TRACE_COLUMNS = ("t", "prep_k", "i", "j", "re", "im")
DIFF_COLUMNS = ("t", "k", "q", "i", "j", "re_diff", "im_diff")


def atomic_write_text(path, text: str) -> None:
    """Write UTF-8 text with LF endings via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x) -> str:
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _label(labels, k):
    return k if labels is None else labels[k]


def trace_csv(trace, labels=None) -> str:
    i, j = (_label(labels, x) for x in trace.pair)
    k = _label(labels, trace.prep)
    rows = (
        [fmt(t), k, i, j, fmt(v.real), fmt(v.imag)]
        for t, v in zip(trace.times, trace.values)
    )
    return _csv_text(TRACE_COLUMNS, rows)


def diff_rows(report, prep_pairs=None, coherences=None, labels=None):
    """Rows ``t, k, q, i, j, re_diff, im_diff`` in a fixed order."""
    preps = sorted({tr.prep for tr in report.traces})
    if prep_pairs is None:
        prep_pairs = list(itertools.combinations(preps, 2))
    if coherences is None:
        coherences = sorted({tr.pair for tr in report.traces})
    for k, q in prep_pairs:
        for pair in coherences:
            delta = report.difference(k, q, pair)
            times = report.trace(k, pair).times
            lk, lq = _label(labels, k), _label(labels, q)
            li, lj = (_label(labels, x) for x in pair)
            for t, v in zip(times, delta):
                yield [fmt(t), lk, lq, li, lj, fmt(v.real), fmt(v.imag)]


def diff_csv(report, prep_pairs=None, coherences=None, labels=None) -> str:
    return _csv_text(DIFF_COLUMNS, diff_rows(report, prep_pairs, coherences, labels))


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
