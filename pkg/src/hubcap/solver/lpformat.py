"""CPLEX LP-format dump of a model instance, for cross-checking with external solvers."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

_BAD = re.compile(r"[^A-Za-z0-9_.\[\],]")


def _name(s: str) -> str:
    return _BAD.sub("_", s.replace("->", "_to_"))


def _terms(coefs, names):
    parts = []
    for j, v in coefs:
        if v == 0:
            continue
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(v)!r} {names[j]}")
    text = " ".join(parts) if parts else "0 " + names[0]
    return text[2:] if text.startswith("+ ") else text


def _wrap(text, width=200):
    out, line = [], ""
    for tok in text.split(" "):
        if len(line) + len(tok) + 1 > width:
            out.append(line)
            line = " " + tok
        else:
            line = f"{line} {tok}" if line else tok
    out.append(line)
    return "\n".join(out)


def to_lp(model) -> str:
    names = [_name(n) for n in model.col_names]
    lines = ["\\ two-stage hub capacity deployment, sample-average extensive form", "Minimize",
             _wrap(" obj: " + _terms(((j, v) for j, v in enumerate(model.c)), names)), "Subject To"]
    for A, b, rnames, sense in ((model.A_eq, model.b_eq, model.eq_names, "="),
                                (model.A_ub, model.b_ub, model.ub_names, "<=")):
        if A is None:
            continue
        A = A.tocsr()
        for r in range(A.shape[0]):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            coefs = zip(A.indices[lo:hi], A.data[lo:hi])
            lines.append(_wrap(f" {_name(rnames[r])}: {_terms(coefs, names)} {sense} {b[r]!r}"))
    lines.append("Bounds")
    for j, n in enumerate(names):
        lo, hi = model.lb[j], model.ub[j]
        hi_s = "+inf" if not np.isfinite(hi) else repr(float(hi))
        lines.append(f" {float(lo)!r} <= {n} <= {hi_s}")
    ints = [names[j] for j in np.flatnonzero(model.integrality)]
    if ints:
        lines.append("General")
        lines.append(_wrap(" " + " ".join(ints)))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model, path):
    Path(path).write_text(to_lp(model))
