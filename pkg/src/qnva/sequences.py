"""(d, n) symbol sequences and the index-set queries used by every check.

A sequence holds ``d`` tuples, each of width ``n``.  Tuples are addressed by
``l`` in ``1..d`` and the cells inside a tuple by position ``k`` in ``1..n``,
so ``seq[k, l]`` is the bit that aggregator ``k`` is entangled with in tuple
``l``.  Storage is a read-only ``int8`` array of shape ``(d, n)``.
"""
from __future__ import annotations

from enum import IntEnum
from typing import FrozenSet, Iterable

import numpy as np

from .errors import MalformedSequenceError

IndexSet = FrozenSet[int]


class Symbol(IntEnum):
    ZERO = 0
    ONE = 1
    CRYPTIC = 2

    def __str__(self) -> str:
        return _SYMBOL_CHARS[self]


_SYMBOL_CHARS = {Symbol.ZERO: "0", Symbol.ONE: "1", Symbol.CRYPTIC: "*"}
_CHAR_SYMBOLS = {v: k for k, v in _SYMBOL_CHARS.items()}
CRYPTIC = int(Symbol.CRYPTIC)


class TupleSequence:
    """Immutable grid of symbols; the common type for bit and proof sequences."""

    __slots__ = ("_cells",)

    def __init__(self, cells):
        arr = np.array(cells, dtype=np.int8, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"cells must be a non-empty (d, n) grid, got shape {arr.shape}")
        if arr.min() < 0 or arr.max() > CRYPTIC:
            raise ValueError("cells must hold 0, 1 or 2 (cryptic)")
        arr.flags.writeable = False
        self._cells = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "TupleSequence":
        # trusted constructor for arrays already validated by the caller
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.int8)
        arr.flags.writeable = False
        obj._cells = arr
        return obj

    @classmethod
    def cryptic(cls, d: int, n: int) -> "TupleSequence":
        return cls._wrap(np.full((d, n), CRYPTIC, dtype=np.int8))

    @property
    def d(self) -> int:
        return self._cells.shape[0]

    @property
    def n(self) -> int:
        return self._cells.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._cells.shape

    @property
    def cells(self) -> np.ndarray:
        """Read-only ``(d, n)`` view; row ``l-1`` is tuple ``l``."""
        return self._cells

    def column(self, k: int) -> np.ndarray:
        self._check_position(k)
        return self._cells[:, k - 1]

    def __getitem__(self, key: tuple[int, int]) -> Symbol:
        k, l = key
        self._check_position(k)
        if not 1 <= l <= self.d:
            raise IndexError(f"tuple index {l} outside 1..{self.d}")
        return Symbol(int(self._cells[l - 1, k - 1]))

    def tuple_at(self, l: int) -> tuple[Symbol, ...]:
        return tuple(Symbol(int(v)) for v in self._cells[l - 1])

    def _check_position(self, k: int) -> None:
        if not 1 <= k <= self.n:
            raise ValueError(f"position {k} outside 1..{self.n}")

    def has_cryptic(self) -> bool:
        return bool((self._cells == CRYPTIC).any())

    def is_valid_proof(self) -> bool:
        """True when every tuple is either fully revealed or fully cryptic."""
        cryptic = self._cells == CRYPTIC
        per_tuple = cryptic.sum(axis=1)
        return bool(np.all((per_tuple == 0) | (per_tuple == self.n)))

    def cryptic_mask(self) -> np.ndarray:
        """Boolean mask over tuples, raising on a mixed tuple."""
        cryptic = self._cells == CRYPTIC
        per_tuple = cryptic.sum(axis=1)
        mixed = (per_tuple != 0) & (per_tuple != self.n)
        if mixed.any():
            bad = int(np.flatnonzero(mixed)[0]) + 1
            raise MalformedSequenceError(f"tuple {bad} is partially cryptic")
        return per_tuple == self.n

    def to_text(self) -> str:
        """One token per tuple, l ascending, e.g. ``'01 *' '* 10'``."""
        table = np.array(["0", "1", "*"])
        return " ".join("".join(table[row]) for row in self._cells)

    @classmethod
    def from_text(cls, text: str) -> "TupleSequence":
        tokens = text.split()
        if not tokens:
            raise ValueError("empty sequence text")
        width = len(tokens[0])
        rows = []
        for tok in tokens:
            if len(tok) != width:
                raise ValueError(f"token {tok!r} has width {len(tok)}, expected {width}")
            try:
                rows.append([int(_CHAR_SYMBOLS[ch]) for ch in tok])
            except KeyError as exc:
                raise ValueError(f"unknown symbol {exc.args[0]!r}") from None
        return cls(rows)

    def __eq__(self, other):
        if not isinstance(other, TupleSequence):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._cells, other._cells))

    def __hash__(self):
        return hash((self.shape, self._cells.tobytes()))

    def __repr__(self):
        text = self.to_text()
        if len(text) > 60:
            text = text[:57] + "..."
        return f"TupleSequence(d={self.d}, n={self.n}, {text!r})"


def as_index_set(mask: np.ndarray) -> IndexSet:
    return frozenset(int(i) + 1 for i in np.flatnonzero(mask))


def _check_bit(x: int) -> None:
    if x not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {x!r}")


def mask_with(seq: TupleSequence, k: int, x: int) -> np.ndarray:
    _check_bit(x)
    return seq.column(k) == x


def mask_with_pair(seq: TupleSequence, k: int, k2: int, x: int, y: int) -> np.ndarray:
    if k == k2:
        raise ValueError("positions k and k' must differ")
    _check_bit(y)
    return mask_with(seq, k, x) & (seq.column(k2) == y)


def positions_with(seq: TupleSequence, k: int, x: int) -> IndexSet:
    """Indices ``l`` whose cell at position ``k`` holds bit ``x``."""
    return as_index_set(mask_with(seq, k, x))


def positions_with_pair(seq: TupleSequence, k: int, k2: int, x: int, y: int) -> IndexSet:
    """Indices ``l`` holding ``x`` at position ``k`` and ``y`` at ``k2``."""
    return as_index_set(mask_with_pair(seq, k, k2, x, y))


def cryptic_positions(seq: TupleSequence) -> IndexSet:
    """Indices of fully cryptic tuples; raises on a mixed tuple."""
    return as_index_set(seq.cryptic_mask())


def index_set(members: Iterable[int], d: int) -> IndexSet:
    """Validated index set over ``1..d``."""
    out = frozenset(int(m) for m in members)
    for m in out:
        if not 1 <= m <= d:
            raise ValueError(f"index {m} outside 1..{d}")
    return out
