"""Hilbert space-filling curve on a 2^order x 2^order grid.

The curve index is a bijection between grid cells and 0..4^order-1 in which
consecutive indices are always Manhattan-distance-1 neighbours, so sorting by
index preserves 2D locality.
"""

from __future__ import annotations


def hilbert_index(x: int, y: int, order: int) -> int:
    """Distance along the curve of cell (x, y); standard rotate-and-flip walk."""
    side = 1 << order
    if not (0 <= x < side and 0 <= y < side):
        raise ValueError(f"({x}, {y}) outside {side}x{side} grid")
    d = 0
    s = side >> 1
    while s > 0:
        rx = 1 if x & s else 0
        ry = 1 if y & s else 0
        d += s * s * ((3 * rx) ^ ry)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        s >>= 1
    return d


def hilbert_xy(d: int, order: int) -> tuple[int, int]:
    """Inverse of hilbert_index."""
    side = 1 << order
    if not (0 <= d < side * side):
        raise ValueError(f"index {d} outside curve of order {order}")
    x = y = 0
    t = d
    s = 1
    while s < side:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s <<= 1
    return x, y


def order_for(width: int, height: int) -> int:
    """Smallest curve order whose grid covers a width x height rectangle."""
    order = 0
    while (1 << order) < max(width, height):
        order += 1
    return order


def hilbert_cells(width: int, height: int) -> list[tuple[int, int]]:
    """All cells of the rectangle in curve order (cells outside it skipped)."""
    order = order_for(width, height)
    side = 1 << order
    out = []
    for d in range(side * side):
        x, y = hilbert_xy(d, order)
        if x < width and y < height:
            out.append((x, y))
    return out
