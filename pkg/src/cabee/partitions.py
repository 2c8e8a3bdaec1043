"""Set partitions of game indices and their enumeration.

Analogy partitions are partitions of the game set {0, ..., n-1} into at
most K nonempty classes.  Enumeration walks restricted-growth strings in
lexicographic order, which gives a deterministic canonical ordering that
the solvers and the search rely on for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

# Beyond this many games exhaustive enumeration is refused (B_14 ~ 1.9e8).
DEFAULT_ENUMERATION_CAP = 14


class PartitionSizeError(ValueError):
    """Raised when exhaustive enumeration would be too large."""


@dataclass(frozen=True)
class Partition:
    """A partition of games {0..n_games-1} into disjoint nonempty classes.

    Classes are stored in canonical form: each class sorted ascending,
    classes ordered by their smallest element.  Instances are hashable so
    they can key strategy maps and distributions over partitions.
    """

    n_games: int
    classes: tuple[tuple[int, ...], ...]

    @staticmethod
    def from_classes(n_games: int, classes) -> "Partition":
        canon = tuple(sorted((tuple(sorted(c)) for c in classes), key=lambda c: c[0]))
        part = Partition(n_games, canon)
        part.validate()
        return part

    @staticmethod
    def from_assignment(labels) -> "Partition":
        """Build from a per-game class-label sequence."""
        groups: dict[int, list[int]] = {}
        for game, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(game)
        return Partition.from_classes(len(list(labels)), groups.values())

    @staticmethod
    def finest(n_games: int) -> "Partition":
        return Partition(n_games, tuple((g,) for g in range(n_games)))

    @staticmethod
    def coarsest(n_games: int) -> "Partition":
        return Partition(n_games, (tuple(range(n_games)),))

    def validate(self) -> None:
        seen: set[int] = set()
        for cls in self.classes:
            if not cls:
                raise ValueError("empty class")
            for g in cls:
                if g in seen:
                    raise ValueError(f"game {g} appears in two classes")
                seen.add(g)
        if seen != set(range(self.n_games)):
            raise ValueError("classes do not cover the game set")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_of(self, game: int) -> int:
        for idx, cls in enumerate(self.classes):
            if game in cls:
                return idx
        raise KeyError(game)

    def assignment(self) -> tuple[int, ...]:
        """Per-game class index, canonical (first occurrence order)."""
        out = [0] * self.n_games
        for idx, cls in enumerate(self.classes):
            for g in cls:
                out[g] = idx
        return tuple(out)

    def key(self) -> tuple:
        return self.classes

    def __str__(self) -> str:
        return "{" + ", ".join("{" + ",".join(map(str, c)) + "}" for c in self.classes) + "}"


def restricted_growth_strings(n: int, max_classes: int) -> Iterator[tuple[int, ...]]:
    """Yield restricted-growth strings of length n with <= max_classes labels.

    Lexicographic order; the first string is all zeros (coarsest partition).
    """
    if n < 1:
        raise ValueError("need at least one game")
    if max_classes < 1:
        raise ValueError("need at least one class")
    labels = [0] * n
    while True:
        yield tuple(labels)
        # find rightmost position that can be incremented
        i = n - 1
        while i > 0:
            prefix_max = max(labels[:i])
            if labels[i] < min(prefix_max + 1, max_classes - 1):
                break
            i -= 1
        if i == 0:
            return
        labels[i] += 1
        for j in range(i + 1, n):
            labels[j] = 0


def enumerate_partitions(
    n_games: int, max_classes: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[Partition]:
    """All partitions of n_games games into at most max_classes classes.

    Deterministic canonical order (lexicographic restricted-growth strings).
    Refuses instances with more than `cap` games.
    """
    if n_games > cap:
        raise PartitionSizeError(
            f"{n_games} games exceeds the enumeration cap of {cap}; "
            "use the iterative clustering path instead"
        )
    for labels in restricted_growth_strings(n_games, max_classes):
        yield Partition.from_assignment(labels)


_PARTITION_CACHE: dict[tuple[int, int, int], tuple[Partition, ...]] = {}


def partition_list(
    n_games: int, max_classes: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> tuple[Partition, ...]:
    """Cached tuple of enumerate_partitions output (same canonical order)."""
    key = (n_games, max_classes, cap)
    if key not in _PARTITION_CACHE:
        _PARTITION_CACHE[key] = tuple(enumerate_partitions(n_games, max_classes, cap))
    return _PARTITION_CACHE[key]


def bell_number(n: int) -> int:
    """Number of set partitions of n items (Bell triangle recurrence)."""
    if n == 0:
        return 1
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


def count_partitions(n: int, max_classes: int) -> int:
    """Number of partitions of n items into at most max_classes classes."""
    # Stirling numbers of the second kind, summed over class counts.
    stirling = [[0] * (max_classes + 1) for _ in range(n + 1)]
    stirling[0][0] = 1
    for i in range(1, n + 1):
        for k in range(1, max_classes + 1):
            stirling[i][k] = k * stirling[i - 1][k] + stirling[i - 1][k - 1]
    return sum(stirling[n][1 : max_classes + 1])
