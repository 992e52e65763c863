"""Symbolic expansion of nested (anti)commutators over free non-commuting
symbols, and classification of which operator orderings are reachable from
the 2^(n-1) phase choices.

The bracket convention matches the protocol: alpha_j = 0 selects the
anticommutator and alpha_j = 1 the commutator at nesting level j, with
O_1 outermost, i.e. [O_1, [O_2, ..., [O_{n-1}, O_n]_{s_{n-1}} ...]_{s_2}]_{s_1}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, NamedTuple, Sequence, Set, Tuple

import numpy as np


class OperatorWord(NamedTuple):
    """A signed operator permutation: coefficient times O_{p1} O_{p2} ... O_{pn}."""

    perm: Tuple[int, ...]
    coeff: complex


@dataclass(frozen=True)
class NestedBracket:
    """Nested bracket configuration; alpha_j = 0 -> '+', 1 -> '-'."""

    alpha: Tuple[int, ...]

    def __post_init__(self):
        alpha = tuple(int(a) for a in self.alpha)
        if not alpha:
            raise ValueError("need at least one bracket (n >= 2)")
        if any(a not in (0, 1) for a in alpha):
            raise ValueError("alpha entries must be 0 or 1")
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return len(self.alpha) + 1

    @property
    def signs(self) -> Tuple[int, ...]:
        """+1 for anticommutator, -1 for commutator, outermost first."""
        return tuple(1 if a == 0 else -1 for a in self.alpha)


def expand(bracket: NestedBracket):
    """Fully expand the nested bracket into signed permutation words.

    Exactly 2^(n-1) distinct permutations appear, each with coefficient +-1:
    level j either prepends O_j (coefficient unchanged) or appends it
    (coefficient times s_j).
    """
    n = bracket.n
    terms: Dict[Tuple[int, ...], complex] = {(n,): 1.0}
    for j in range(n - 1, 0, -1):
        s = bracket.signs[j - 1]
        new: Dict[Tuple[int, ...], complex] = {}
        for word, coeff in terms.items():
            left = (j,) + word
            right = word + (j,)
            new[left] = new.get(left, 0.0) + coeff
            new[right] = new.get(right, 0.0) + s * coeff
        terms = {w: c for w, c in new.items() if c != 0}
    return [OperatorWord(w, complex(c)) for w, c in sorted(terms.items())]


def accessible_permutations(n: int) -> Set[Tuple[int, ...]]:
    """Permutations reachable by some alpha choice; cardinality 2^(n-1)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    out: Set[Tuple[int, ...]] = set()
    for alpha in itertools.product((0, 1), repeat=n - 1):
        for word in expand(NestedBracket(alpha)):
            out.add(word.perm)
    return out


def missing_permutations(n: int) -> Set[Tuple[int, ...]]:
    """The n! - 2^(n-1) orderings no bracket expansion produces."""
    all_perms = set(itertools.permutations(range(1, n + 1)))
    return all_perms - accessible_permutations(n)


def contour_classify(perm: Sequence[int]) -> str:
    """"two_branch" if the ordering is realizable on a single forward/backward
    contour pair (equivalently, reachable by some bracket expansion),
    otherwise "multi_branch"."""
    perm = tuple(int(x) for x in perm)
    n = len(perm)
    if sorted(perm) != list(range(1, n + 1)):
        raise ValueError(f"{perm} is not a permutation of 1..{n}")
    return "two_branch" if perm in accessible_permutations(n) else "multi_branch"


def evaluate_words(words: Iterable[OperatorWord], mats: Sequence[np.ndarray]) -> np.ndarray:
    """Numerically substitute matrices for the symbols (mats[i] stands for
    O_{i+1}) and sum the signed products."""
    mats = [np.asarray(m, dtype=complex) for m in mats]
    dim = mats[0].shape[0]
    acc = np.zeros((dim, dim), dtype=complex)
    for word in words:
        prod = np.eye(dim, dtype=complex)
        for idx in word.perm:
            prod = prod @ mats[idx - 1]
        acc += word.coeff * prod
    return acc


def nested_bracket_matrix(bracket: NestedBracket, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Direct (non-expanded) evaluation of the nested bracket on matrices."""
    mats = [np.asarray(m, dtype=complex) for m in mats]
    acc = mats[-1]
    for j in range(bracket.n - 1, 0, -1):
        s = bracket.signs[j - 1]
        acc = mats[j - 1] @ acc + s * (acc @ mats[j - 1])
    return acc
