"""secp256k1 scalar multiplication for address derivation.

Two code paths share the field arithmetic: a generic Jacobian double-and-add
for arbitrary points, and a fixed-base path that spends one-time setup on a
table of byte-window multiples of G, after which each derivation costs at
most 32 mixed additions. The table build uses plain affine arithmetic.
"""

from __future__ import annotations

__all__ = [
    "CURVE_ORDER",
    "FIELD_PRIME",
    "GX",
    "GY",
    "is_on_curve",
    "scalar_base_mult",
    "scalar_mult",
]

FIELD_PRIME = 2**256 - 2**32 - 977
CURVE_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

_P = FIELD_PRIME
_INFINITY = (0, 1, 0)  # Jacobian Z = 0


def is_on_curve(x: int, y: int) -> bool:
    return (y * y - x * x * x - 7) % _P == 0


def _jac_double(point):
    x1, y1, z1 = point
    if not z1 or not y1:
        return _INFINITY
    a = x1 * x1 % _P
    b = y1 * y1 % _P
    c = b * b % _P
    d = 2 * ((x1 + b) * (x1 + b) - a - c) % _P
    e = 3 * a % _P
    f = e * e % _P
    x3 = (f - 2 * d) % _P
    y3 = (e * (d - x3) - 8 * c) % _P
    z3 = 2 * y1 * z1 % _P
    return (x3, y3, z3)


def _jac_add_affine(point, x2, y2):
    """Add an affine point to a Jacobian point."""
    x1, y1, z1 = point
    if not z1:
        return (x2, y2, 1)
    z1z1 = z1 * z1 % _P
    u2 = x2 * z1z1 % _P
    s2 = y2 * z1 % _P * z1z1 % _P
    h = (u2 - x1) % _P
    r = (s2 - y1) % _P
    if h == 0:
        if r == 0:
            return _jac_double(point)
        return _INFINITY
    hh = h * h % _P
    hhh = h * hh % _P
    v = x1 * hh % _P
    x3 = (r * r - hhh - 2 * v) % _P
    y3 = (r * (v - x3) - y1 * hhh) % _P
    z3 = z1 * h % _P
    return (x3, y3, z3)


def _to_affine(point):
    x, y, z = point
    if not z:
        raise ValueError("point at infinity has no affine form")
    zinv = pow(z, -1, _P)
    zinv2 = zinv * zinv % _P
    return (x * zinv2 % _P, y * zinv2 % _P * zinv % _P)


def _affine_add(p, q):
    if p is None:
        return q
    if q is None:
        return p
    x1, y1 = p
    x2, y2 = q
    if x1 == x2:
        if (y1 + y2) % _P == 0:
            return None
        slope = 3 * x1 * x1 * pow(2 * y1, -1, _P) % _P
    else:
        slope = (y2 - y1) * pow(x2 - x1, -1, _P) % _P
    x3 = (slope * slope - x1 - x2) % _P
    return (x3, (slope * (x1 - x3) - y1) % _P)


def scalar_mult(k: int, point: tuple[int, int]) -> tuple[int, int]:
    """Generic double-and-add. Requires 1 <= k < curve order."""
    if not 1 <= k < CURVE_ORDER:
        raise ValueError(f"scalar outside [1, n-1]: {k}")
    x, y = point
    acc = _INFINITY
    for bit in bin(k)[2:]:
        acc = _jac_double(acc)
        if bit == "1":
            acc = _jac_add_affine(acc, x, y)
    return _to_affine(acc)


_BASE_TABLE: list[list[tuple[int, int]]] | None = None


def _build_base_table() -> list[list[tuple[int, int]]]:
    """Multiples w * 2^(8i) * G for every byte window i and w in 1..255."""
    table = []
    base = (GX, GY)
    for _ in range(32):
        row = []
        entry = base
        for _ in range(255):
            row.append(entry)
            entry = _affine_add(entry, base)
        table.append(row)
        base = entry  # 256 * previous base
    return table


def scalar_base_mult(k: int) -> tuple[int, int]:
    """k * G via the fixed-base window table."""
    if not 1 <= k < CURVE_ORDER:
        raise ValueError(f"scalar outside [1, n-1]: {k}")
    global _BASE_TABLE
    if _BASE_TABLE is None:
        _BASE_TABLE = _build_base_table()
    table = _BASE_TABLE
    acc = _INFINITY
    i = 0
    while k:
        w = k & 0xFF
        if w:
            x2, y2 = table[i][w - 1]
            acc = _jac_add_affine(acc, x2, y2)
        k >>= 8
        i += 1
    return _to_affine(acc)
