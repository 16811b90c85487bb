"""Tree shapes as preorder bitstrings: 1 per internal node, 0 per leaf.

A feasible sequence of a shape with n >= 1 internal nodes satisfies:
  i.   it begins with 1,
  ii.  #zeros = #ones + 1,
  iii. no proper prefix satisfies ii,
and has length 2n + 1.  The degenerate single-leaf tree is encoded as "0".

Shapes are nested pairs: a leaf is None, an internal node is (left, right).
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedSequence
from .forest import Node

Shape = tuple | None


@dataclass(frozen=True)
class ZaksSequence:
    bits: str

    @property
    def n_nodes(self) -> int:
        """Internal node count."""
        return (len(self.bits) - 1) // 2


def is_valid_zaks(bits: str) -> bool:
    if bits == "0":
        return True
    if not bits or bits[0] != "1":
        return False  # condition i
    zeros = ones = 0
    for i, ch in enumerate(bits):
        if ch == "1":
            ones += 1
        elif ch == "0":
            zeros += 1
        else:
            return False
        # condition iii: the balance property may hold only at the very end
        if zeros == ones + 1 and i != len(bits) - 1:
            return False
    return zeros == ones + 1  # condition ii


def zaks_encode_shape(shape: Shape) -> ZaksSequence:
    out: list[str] = []
    stack = [shape]
    while stack:
        cur = stack.pop()
        if cur is None:
            out.append("0")
        else:
            out.append("1")
            stack.append(cur[1])
            stack.append(cur[0])
    return ZaksSequence("".join(out))


def zaks_encode(root: Node) -> ZaksSequence:
    """Preorder shape sequence of a labeled tree."""
    out: list[str] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            out.append("0")
        else:
            out.append("1")
            stack.append(node.right)
            stack.append(node.left)
    return ZaksSequence("".join(out))


def zaks_decode(seq: ZaksSequence | str) -> Shape:
    """Decode a sequence back to a shape; inverse of zaks_encode_shape."""
    bits = seq.bits if isinstance(seq, ZaksSequence) else seq
    if not is_valid_zaks(bits):
        raise MalformedSequence(f"not a feasible shape sequence: {bits[:64]!r}...")
    shape, consumed = decode_prefix(bits, 0)
    if consumed != len(bits):
        raise MalformedSequence("bits remain after the shape completed")
    return shape


def decode_prefix(bits, start: int) -> tuple[Shape, int]:
    """Decode one complete shape starting at `start`; returns (shape, next position).

    `bits` may be any indexable of "0"/"1" characters. Raises MalformedSequence
    if the prefix ends before the shape completes.
    """
    n = len(bits)
    if start >= n:
        raise MalformedSequence("empty prefix")
    # Iterative preorder build: each frame is a mutable [left, right] pair.
    pos = start
    if bits[pos] == "0":
        return None, pos + 1
    root: list = [None, None]
    pos += 1
    # Slots fill left-first: push the right slot first so the left pops first.
    stack = [(root, 1), (root, 0)]
    while stack:
        if pos >= n:
            raise MalformedSequence("sequence ended before the shape completed")
        holder, slot = stack.pop()
        if bits[pos] == "1":
            pair: list = [None, None]
            holder[slot] = pair
            stack.append((pair, 1))
            stack.append((pair, 0))
        else:
            holder[slot] = None
        pos += 1
    return _freeze_lists(root), pos


def _freeze_lists(root: list) -> Shape:
    memo: dict[int, Shape] = {}
    stack = [root]
    while stack:
        cur = stack.pop()
        if cur is None or id(cur) in memo:
            continue
        left, right = cur
        left_done = left is None or id(left) in memo
        right_done = right is None or id(right) in memo
        if left_done and right_done:
            memo[id(cur)] = (memo.get(id(left)), memo.get(id(right)))
        else:
            stack.append(cur)
            if not right_done:
                stack.append(right)
            if not left_done:
                stack.append(left)
    return memo[id(root)]


def shape_counts(shape: Shape) -> tuple[int, int]:
    """(internal, leaf) counts of a shape."""
    internal = leaves = 0
    stack = [shape]
    while stack:
        cur = stack.pop()
        if cur is None:
            leaves += 1
        else:
            internal += 1
            stack.append(cur[0])
            stack.append(cur[1])
    return internal, leaves
