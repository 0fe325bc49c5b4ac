"""Sparse complex factorization, normal-equation solves, and solve accounting.

One "PDE solution" in the ledger is one triangular solve pair against a
factorization for one right-hand-side column; factorizations are counted
separately. Size classes: "full" (padded-domain systems), "background"
(background-block normal systems), "target" (target-block normal systems).
"""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationError

__all__ = [
    "SolveLedger",
    "Factorization",
    "factorize",
    "solve_augmented_normal",
    "solve_target_normal",
]

SIZE_CLASSES = ("full", "background", "target")


class SolveLedger:
    """Monotone counters of factorized solves keyed by phase, frequency, size."""

    def __init__(self):
        self._solves: dict[tuple[str, float, str], int] = {}
        self._factorizations: dict[tuple[str, float, str], int] = {}
        self._lock = threading.Lock()

    def record_solve(self, phase: str, freq_hz: float, size_class: str, count: int):
        if count < 0:
            raise ValueError("solve count cannot decrease")
        key = (phase, float(freq_hz), size_class)
        with self._lock:
            self._solves[key] = self._solves.get(key, 0) + count

    def record_factorization(self, phase: str, freq_hz: float, size_class: str):
        key = (phase, float(freq_hz), size_class)
        with self._lock:
            self._factorizations[key] = self._factorizations.get(key, 0) + 1

    def solves(self, size_class=None, phase=None, freq_hz=None) -> int:
        """Total solve count over all entries matching the given filters."""
        total = 0
        with self._lock:
            for (ph, f, sc), count in self._solves.items():
                if size_class is not None and sc != size_class:
                    continue
                if phase is not None and ph != phase:
                    continue
                if freq_hz is not None and f != float(freq_hz):
                    continue
                total += count
        return total

    def factorizations(self, size_class=None, phase=None, freq_hz=None) -> int:
        total = 0
        with self._lock:
            for (ph, f, sc), count in self._factorizations.items():
                if size_class is not None and sc != size_class:
                    continue
                if phase is not None and ph != phase:
                    continue
                if freq_hz is not None and f != float(freq_hz):
                    continue
                total += count
        return total

    def snapshot(self) -> dict[tuple[str, float, str], int]:
        with self._lock:
            return dict(self._solves)

    def to_csv(self, path=None) -> str:
        """Dump solve counters as CSV (phase, frequency_hz, size_class, count)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["phase", "frequency_hz", "size_class", "count"])
        with self._lock:
            rows = sorted(self._solves.items())
        for (phase, freq, size_class), count in rows:
            writer.writerow([phase, repr(freq), size_class, count])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


@dataclass
class Factorization:
    """Reusable LU factorization of a sparse complex matrix."""

    lu: spla.SuperLU
    n: int
    size_class: str
    freq_hz: float
    phase: str
    ledger: SolveLedger | None = None
    _nrhs_hint: int = field(default=0, repr=False)

    def solve(self, rhs: np.ndarray, phase: str | None = None) -> np.ndarray:
        """Solve for one or more right-hand-side columns.

        Counts one ledger solve per column. Multi-column solves are bitwise
        identical to solving columns one at a time.
        """
        rhs = np.asarray(rhs, dtype=complex)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {self.n}")
        ncols = 1 if rhs.ndim == 1 else rhs.shape[1]
        out = self.lu.solve(rhs)
        if self.ledger is not None:
            self.ledger.record_solve(phase or self.phase, self.freq_hz, self.size_class, ncols)
        return out


def _locate_zero_pivot(matrix: sp.spmatrix) -> int | None:
    """Best-effort pivot location for a singular matrix (small systems only)."""
    if matrix.shape[0] > 2000:
        return None
    import scipy.linalg

    dense = matrix.toarray()
    _, _, u = scipy.linalg.lu(dense)
    diag = np.abs(np.diag(u))
    scale = diag.max() if diag.size else 0.0
    bad = np.nonzero(diag <= 1e-14 * max(scale, 1.0))[0]
    return int(bad[0]) if bad.size else None


def factorize(
    matrix: sp.spmatrix,
    *,
    size_class: str = "full",
    freq_hz: float = 0.0,
    phase: str = "unlabeled",
    ledger: SolveLedger | None = None,
) -> Factorization:
    """LU-factorize a square sparse complex matrix with fill-reducing ordering."""
    if size_class not in SIZE_CLASSES:
        raise ValueError(f"unknown size class {size_class!r}")
    matrix = sp.csc_matrix(matrix)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix is {matrix.shape}, must be square")
    try:
        lu = spla.splu(matrix.astype(complex), permc_spec="COLAMD")
    except RuntimeError as exc:
        pivot = _locate_zero_pivot(matrix)
        where = f" (pivot index {pivot})" if pivot is not None else ""
        raise FactorizationError(f"singular factorization: {exc}{where}", pivot) from exc
    if ledger is not None:
        ledger.record_factorization(phase, freq_hz, size_class)
    return Factorization(
        lu=lu, n=matrix.shape[0], size_class=size_class, freq_hz=freq_hz,
        phase=phase, ledger=ledger,
    )


def _as_matrix(operator):
    return operator.matrix if hasattr(operator, "matrix") else operator


def solve_augmented_normal(
    operator,
    observation,
    lam: float,
    rhs_wave: np.ndarray,
    rhs_data: np.ndarray,
    *,
    size_class: str = "full",
    freq_hz: float = 0.0,
    phase: str = "augmented",
    ledger: SolveLedger | None = None,
) -> np.ndarray:
    """Minimize ||P U - rhs_data||^2 + lam ||A U - rhs_wave||^2 per column.

    Solves the explicitly formed Hermitian normal equations
    ``[lam A^H A + P^H P] U = lam A^H rhs_wave + P^H rhs_data``. With no
    receivers the data term drops and the result is the plain solve
    ``A^{-1} rhs_wave``.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    a = _as_matrix(operator)
    p = _as_matrix(observation) if observation is not None else None
    ah = a.conj().T.tocsc()
    if p is None or p.shape[0] == 0:
        normal = (ah @ a).tocsc()
        rhs = ah @ rhs_wave
    else:
        ph = p.conj().T.tocsc()
        normal = (lam * (ah @ a) + ph @ p).tocsc()
        rhs = lam * (ah @ rhs_wave) + ph @ rhs_data
    fact = factorize(normal, size_class=size_class, freq_hz=freq_hz, phase=phase, ledger=ledger)
    return fact.solve(rhs)


def solve_target_normal(
    a2: sp.spmatrix,
    rhs: np.ndarray,
    *,
    freq_hz: float = 0.0,
    phase: str = "target",
    ledger: SolveLedger | None = None,
) -> np.ndarray:
    """Least-squares fields over the target block: argmin ||A2 U2 - rhs||.

    The normal matrix ``A2^H A2`` has target size; rank-deficient blocks
    (degenerate targets) raise FactorizationError.
    """
    a2 = sp.csc_matrix(a2)
    a2h = a2.conj().T.tocsc()
    normal = (a2h @ a2).tocsc()
    try:
        fact = factorize(normal, size_class="target", freq_hz=freq_hz, phase=phase, ledger=ledger)
    except FactorizationError as exc:
        raise FactorizationError(
            f"target block is rank-deficient (degenerate target region): {exc}",
            exc.pivot_index,
        ) from exc
    return fact.solve(a2h @ rhs)
