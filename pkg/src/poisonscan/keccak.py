"""Keccak-256 (the pre-standard padding variant used for EVM addresses).

Pure-Python sponge over keccak-f[1600]. State is a flat list of 25 lanes
indexed x + 5y; the rho and pi steps are fused through precomputed
destination and rotation tables. Distinct from SHA3-256, which pads with a
different domain byte and produces different digests.
"""

from __future__ import annotations

__all__ = ["keccak256"]

_MASK = (1 << 64) - 1
_RATE = 136  # bytes, for 256-bit output


def _build_tables() -> tuple[list[int], list[int], list[int]]:
    # rho offsets from the triangular-number walk over lane positions
    offsets = {0: 0}
    x, y = 1, 0
    for t in range(24):
        offsets[x + 5 * y] = ((t + 1) * (t + 2) // 2) % 64
        x, y = y, (2 * x + 3 * y) % 5
    # pi sends lane (x, y) to (y, 2x + 3y)
    pi_dst = [0] * 25
    rot = [0] * 25
    for xx in range(5):
        for yy in range(5):
            src = xx + 5 * yy
            pi_dst[src] = yy + 5 * ((2 * xx + 3 * yy) % 5)
            rot[src] = offsets[src]
    # round constants from the degree-8 LFSR
    constants = []
    reg = 1
    for _ in range(24):
        rc = 0
        for j in range(7):
            if reg & 1:
                rc |= 1 << (2**j - 1)
            reg <<= 1
            if reg & 0x100:
                reg ^= 0x171
        constants.append(rc)
    return pi_dst, rot, constants


_PI_DST, _ROT, _RC = _build_tables()


def _keccak_f(lanes: list[int]) -> None:
    pi_dst = _PI_DST
    rot = _ROT
    mask = _MASK
    for rc in _RC:
        # theta
        c = [
            lanes[0] ^ lanes[5] ^ lanes[10] ^ lanes[15] ^ lanes[20],
            lanes[1] ^ lanes[6] ^ lanes[11] ^ lanes[16] ^ lanes[21],
            lanes[2] ^ lanes[7] ^ lanes[12] ^ lanes[17] ^ lanes[22],
            lanes[3] ^ lanes[8] ^ lanes[13] ^ lanes[18] ^ lanes[23],
            lanes[4] ^ lanes[9] ^ lanes[14] ^ lanes[19] ^ lanes[24],
        ]
        for x in range(5):
            cx = c[(x + 1) % 5]
            d = c[(x + 4) % 5] ^ (((cx << 1) | (cx >> 63)) & mask)
            for y in (0, 5, 10, 15, 20):
                lanes[x + y] ^= d
        # rho and pi fused
        b = [0] * 25
        for src in range(25):
            v = lanes[src]
            s = rot[src]
            b[pi_dst[src]] = ((v << s) | (v >> (64 - s))) & mask if s else v
        # chi
        for y in (0, 5, 10, 15, 20):
            b0, b1, b2, b3, b4 = b[y], b[y + 1], b[y + 2], b[y + 3], b[y + 4]
            lanes[y] = b0 ^ (~b1 & b2)
            lanes[y + 1] = b1 ^ (~b2 & b3)
            lanes[y + 2] = b2 ^ (~b3 & b4)
            lanes[y + 3] = b3 ^ (~b4 & b0)
            lanes[y + 4] = b4 ^ (~b0 & b1)
        # iota
        lanes[0] ^= rc


def keccak256(data: bytes) -> bytes:
    padlen = _RATE - (len(data) % _RATE)
    if padlen == 1:
        padded = data + b"\x81"
    else:
        padded = data + b"\x01" + b"\x00" * (padlen - 2) + b"\x80"
    lanes = [0] * 25
    from_bytes = int.from_bytes
    for start in range(0, len(padded), _RATE):
        block = padded[start : start + _RATE]
        for lane in range(17):
            lanes[lane] ^= from_bytes(block[8 * lane : 8 * lane + 8], "little")
        _keccak_f(lanes)
    return b"".join(lanes[i].to_bytes(8, "little") for i in range(4))
