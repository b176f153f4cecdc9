"""Group bookkeeping: an ordered, non-overlapping partition of atom indices."""

import numpy as np

from .errors import InvalidInputError


class GroupPartition:
    """Ordered partition of ``{0, ..., n-1}`` into disjoint non-empty groups.

    Each group carries a class label. The group order is fixed at
    construction and is the canonical class order everywhere else in the
    package (classification residuals, confusion matrices, reports).

    Parameters
    ----------
    groups : sequence of index sequences
        One entry per group; together they must cover ``0..n-1`` exactly
        once. Indices within a group keep their given order.
    labels : sequence, optional
        One label per group. Defaults to ``0..K-1``.
    """

    def __init__(self, groups, labels=None):
        if len(groups) == 0:
            raise InvalidInputError("partition needs at least one group")
        self.groups = [np.asarray(g, dtype=np.intp) for g in groups]
        for g in self.groups:
            if g.ndim != 1 or g.size == 0:
                raise InvalidInputError("every group must be a non-empty 1-d index set")
        if labels is None:
            labels = list(range(len(self.groups)))
        labels = list(labels)
        if len(labels) != len(self.groups):
            raise InvalidInputError("need exactly one label per group")
        if len(set(labels)) != len(labels):
            raise InvalidInputError("group labels must be distinct")
        self.labels = labels

        flat = np.concatenate(self.groups)
        n = flat.size
        seen = np.zeros(n, dtype=bool)
        if flat.min(initial=0) < 0 or flat.max(initial=-1) >= n:
            raise InvalidInputError("group indices out of range: groups must cover 0..n-1")
        seen[flat] = True
        if flat.size != np.unique(flat).size or not seen.all():
            raise InvalidInputError("groups must be disjoint and cover 0..n-1")
        self.n = n

    @classmethod
    def from_sizes(cls, sizes, labels=None):
        """Build a partition of contiguous blocks with the given sizes."""
        sizes = [int(s) for s in sizes]
        if any(s <= 0 for s in sizes):
            raise InvalidInputError("group sizes must be positive")
        edges = np.cumsum([0] + sizes)
        groups = [np.arange(edges[i], edges[i + 1]) for i in range(len(sizes))]
        return cls(groups, labels=labels)

    @property
    def n_groups(self):
        return len(self.groups)

    @property
    def sizes(self):
        return [int(g.size) for g in self.groups]

    def indices_of(self, label):
        """Index set of the group carrying ``label``."""
        try:
            return self.groups[self.labels.index(label)]
        except ValueError:
            raise InvalidInputError(f"unknown group label: {label!r}") from None

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(zip(self.labels, self.groups))

    def __eq__(self, other):
        if not isinstance(other, GroupPartition):
            return NotImplemented
        return (
            self.labels == other.labels
            and len(self.groups) == len(other.groups)
            and all(np.array_equal(a, b) for a, b in zip(self.groups, other.groups))
        )

    def __repr__(self):
        return f"GroupPartition(n={self.n}, sizes={self.sizes}, labels={self.labels})"
