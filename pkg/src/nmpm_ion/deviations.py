"""Collects disagreements between explicit closed forms and direct numerics.

A row is written whenever an explicit formula and the direct computation of
the same quantity differ by more than the tolerance.  Complex quantities are
split into ``.re`` and ``.im`` rows so every value column stays real.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import astuple, dataclass
from pathlib import Path

COLUMNS = (
    "operation",
    "order",
    "lambda",
    "eta",
    "kappa",
    "alpha",
    "tau",
    "branch",
    "paper_value",
    "direct_value",
    "abs_diff",
)


@dataclass(frozen=True)
class DeviationRow:
    operation: str
    order: int
    lam: float
    eta: float
    kappa: float
    alpha: float
    tau: float
    branch: str
    paper_value: float
    direct_value: float
    abs_diff: float


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.12e" % x
    return str(x)


class DeviationReport:
    """Thread-safe accumulator of :class:`DeviationRow` records."""

    def __init__(self) -> None:
        self._rows: list[DeviationRow] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def rows(self) -> list[DeviationRow]:
        with self._lock:
            return sorted(self._rows, key=_sort_key)

    def add(self, row: DeviationRow) -> None:
        with self._lock:
            self._rows.append(row)

    def compare(
        self,
        operation: str,
        branch: str,
        paper_value: complex,
        direct_value: complex,
        *,
        order: int,
        lam: float,
        eta: float,
        kappa: float,
        alpha: float = math.nan,
        tau: float = math.nan,
        rtol: float = 1e-6,
    ) -> bool:
        """Record a row if the values differ beyond ``rtol * max(1, |direct|)``.

        Returns True when the values agree.
        """
        diff = abs(complex(paper_value) - complex(direct_value))
        if diff <= rtol * max(1.0, abs(complex(direct_value))):
            return True
        meta = (operation, int(order), float(lam), float(eta), float(kappa),
                float(alpha), float(tau))
        pv, dv = complex(paper_value), complex(direct_value)
        if pv.imag == 0 and dv.imag == 0:
            self.add(DeviationRow(*meta, branch, pv.real, dv.real, diff))
        else:
            self.add(DeviationRow(*meta, branch + ".re", pv.real, dv.real,
                                  abs(pv.real - dv.real)))
            self.add(DeviationRow(*meta, branch + ".im", pv.imag, dv.imag,
                                  abs(pv.imag - dv.imag)))
        return False

    def filter(self, operation: str | None = None, order: int | None = None):
        return [
            r
            for r in self.rows
            if (operation is None or r.operation == operation)
            and (order is None or r.order == order)
        ]

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for row in self.rows:
                w.writerow([_fmt(v) for v in astuple(row)])
        return path


def _sort_key(r: DeviationRow):
    nan_last = lambda x: (math.isnan(x), 0.0 if math.isnan(x) else x)  # noqa: E731
    return (r.operation, r.order, nan_last(r.lam), nan_last(r.eta), nan_last(r.kappa),
            nan_last(r.alpha), nan_last(r.tau), r.branch)
