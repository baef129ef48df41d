"""Canonical convex program ``min 1/2 z'Hz + f'z + c  s.t.  A_eq z = b_eq, A_in z <= b_in``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Any

import numpy as np


@dataclass(frozen=True)
class ConvexProgram:
    """Dense QP/LP in canonical form.

    Attributes:
        H: (n, n) symmetric positive semidefinite cost matrix.
        f: (n,) linear cost.
        A_eq, b_eq: equality rows.
        A_in, b_in: inequality rows ``A_in z <= b_in``.
        constant: objective offset (does not affect the minimizer).
        layout: named slices of the variable vector.
        info: builder-specific data needed to interpret a solution.
    """

    H: np.ndarray
    f: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray
    constant: float = 0.0
    layout: dict[str, slice] = field(default_factory=dict)
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        f = np.asarray(self.f, dtype=float).reshape(-1)
        n = f.size
        H = np.asarray(self.H, dtype=float).reshape(n, n)
        A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        A_in = np.asarray(self.A_in, dtype=float).reshape(-1, n)
        b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        b_in = np.asarray(self.b_in, dtype=float).reshape(-1)
        if b_eq.size != A_eq.shape[0]:
            raise ValueError(f"b_eq has {b_eq.size} entries for {A_eq.shape[0]} equality rows")
        if b_in.size != A_in.shape[0]:
            raise ValueError(f"b_in has {b_in.size} entries for {A_in.shape[0]} inequality rows")
        if not np.allclose(H, H.T, atol=1e-12 * max(1.0, float(np.abs(H).max(initial=0.0))), rtol=0.0):
            raise ValueError("H is not symmetric")
        for name, arr in (("H", H), ("f", f), ("A_eq", A_eq), ("b_eq", b_eq), ("A_in", A_in), ("b_in", b_in)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def n(self) -> int:
        return self.f.size

    @property
    def n_eq(self) -> int:
        return self.b_eq.size

    @property
    def n_in(self) -> int:
        return self.b_in.size

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ self.H @ z + self.f @ z + self.constant)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.H).min()) if self.n else 0.0

    def is_psd(self, tol: float = 1e-9) -> bool:
        return self.min_eigenvalue() >= -tol * max(1.0, float(np.abs(self.H).max(initial=0.0)))

    def part(self, z: np.ndarray, name: str) -> np.ndarray:
        return np.asarray(z)[self.layout[name]]

    def dump(self, fh: IO[str]) -> None:
        """Write the canonical data as plain text (17 significant digits)."""
        fh.write("# convex program: min 1/2 z'Hz + f'z + c s.t. A_eq z = b_eq, A_in z <= b_in\n")
        fh.write(f"dims {self.n} {self.n_eq} {self.n_in}\n")
        fh.write(f"constant {self.constant!r}\n")
        for name, sl in self.layout.items():
            fh.write(f"layout {name} {sl.start} {sl.stop}\n")
        for name in ("H", "f", "A_eq", "b_eq", "A_in", "b_in"):
            arr = np.atleast_2d(getattr(self, name)) if name in ("H", "A_eq", "A_in") else getattr(self, name)
            fh.write(f"{name}\n")
            if arr.ndim == 1:
                fh.write(" ".join(repr(float(v)) for v in arr) + "\n")
            else:
                for row in arr:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_program(fh: IO[str]) -> ConvexProgram:
    """Read a program written by :meth:`ConvexProgram.dump` (``info`` is not preserved)."""
    lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    it = iter(lines)
    n = n_eq = n_in = None
    constant = 0.0
    layout: dict[str, slice] = {}
    arrays: dict[str, np.ndarray] = {}
    for line in it:
        head, *rest = line.split(" ")
        if head == "dims":
            n, n_eq, n_in = (int(v) for v in rest)
        elif head == "constant":
            constant = float(rest[0])
        elif head == "layout":
            layout[rest[0]] = slice(int(rest[1]), int(rest[2]))
        elif head in ("f", "b_eq", "b_in"):
            row = next(it)
            arrays[head] = np.array([float(v) for v in row.split()]) if row.strip() else np.zeros(0)
        elif head in ("H", "A_eq", "A_in"):
            rows = {"H": n, "A_eq": n_eq, "A_in": n_in}[head]
            if n is None:
                raise ValueError("dims line must precede matrices")
            data = [[float(v) for v in next(it).split()] for _ in range(rows)]
            arrays[head] = np.array(data).reshape(rows, n)
        elif line.strip():
            raise ValueError(f"unexpected line in program dump: {line[:40]!r}")
    return ConvexProgram(constant=constant, layout=layout, **arrays)
