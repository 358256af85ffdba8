"""Binary partition of the index vector [0, N) shared by all compressed formats.

Nodes are numbered 1-based in breadth-first order, so for a fully populated
tree the children of node tau are 2*tau and 2*tau + 1.  Intervals are stored
as half-open 0-based ranges (start, stop).  A node is split iff it holds more
than ``leaf_size`` indices; the left child receives ceil(n/2) of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class IndexTree:
    """Immutable binary partition of [0, N)."""

    n: int
    leaf_size: int
    start: list[int] = field(repr=False)
    stop: list[int] = field(repr=False)
    level: list[int] = field(repr=False)
    parent: list[int] = field(repr=False)
    left: list[int] = field(repr=False)   # 0 when the node is a leaf
    right: list[int] = field(repr=False)
    depth: int = 0

    @property
    def node_count(self) -> int:
        return len(self.start) - 1

    def interval(self, tau: int) -> tuple[int, int]:
        return self.start[tau], self.stop[tau]

    def size(self, tau: int) -> int:
        return self.stop[tau] - self.start[tau]

    def is_leaf(self, tau: int) -> bool:
        return self.left[tau] == 0

    def children(self, tau: int) -> tuple[int, int]:
        if self.is_leaf(tau):
            raise ValueError(f"node {tau} is a leaf")
        return self.left[tau], self.right[tau]

    def sibling(self, tau: int) -> int:
        p = self.parent[tau]
        if p == 0:
            raise ValueError("root has no sibling")
        a, b = self.left[p], self.right[p]
        return b if tau == a else a

    def leaves(self) -> list[int]:
        return [t for t in range(1, self.node_count + 1) if self.is_leaf(t)]

    def max_leaf_size(self) -> int:
        return max(self.size(t) for t in self.leaves())

    def child_slices(self, tau: int) -> tuple[slice, slice]:
        """Relative positions of the children inside the parent interval."""
        a, b = self.children(tau)
        na = self.size(a)
        return slice(0, na), slice(na, self.size(tau))


def build_tree(n: int, leaf_size: int) -> IndexTree:
    """Build the binary index tree for a vector of length ``n``.

    Splitting is deterministic: any node with more than ``leaf_size`` indices
    is divided, the left child taking ceil(n_tau / 2) of them.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if leaf_size < 1:
        raise ValueError("leaf_size must be positive")

    start = [0, 0]
    stop = [0, n]
    level = [0, 0]
    parent = [0, 0]
    left = [0, 0]
    right = [0, 0]

    # Breadth-first: process nodes in id order; new ids are appended in order.
    tau = 1
    while tau < len(start):
        lo, hi = start[tau], stop[tau]
        if hi - lo > leaf_size:
            mid = lo + (hi - lo + 1) // 2
            for child_lo, child_hi in ((lo, mid), (mid, hi)):
                start.append(child_lo)
                stop.append(child_hi)
                level.append(level[tau] + 1)
                parent.append(tau)
                left.append(0)
                right.append(0)
            left[tau] = len(start) - 2
            right[tau] = len(start) - 1
        tau += 1

    depth = max(level[1:])
    return IndexTree(n=n, leaf_size=leaf_size, start=start, stop=stop,
                     level=level, parent=parent, left=left, right=right,
                     depth=depth)


def nodes_on_level(tree: IndexTree, lvl: int) -> list[int]:
    """All nodes at level ``lvl``, ordered left to right."""
    if lvl < 0 or lvl > tree.depth:
        raise ValueError(f"level {lvl} outside [0, {tree.depth}]")
    out = [t for t in range(1, tree.node_count + 1) if tree.level[t] == lvl]
    out.sort(key=lambda t: tree.start[t])
    return out
