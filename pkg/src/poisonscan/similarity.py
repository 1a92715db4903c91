"""Address similarity scoring and the lookalike generation cost model.

A lookalike address imitates a target by sharing its first a and last b hex
digits; d = a + b is the similarity. Humans verify addresses by glancing at
the displayed head and tail, which is exactly what these scores measure.
The module also provides positional digit matching (for mistyped-address
checks), an optimal string alignment edit distance, and closed-form
probability and hardware-cost formulas for brute-force lookalike search.

The probability math deliberately avoids the naive 1 - (1 - 16**-d)**r
form: at d = 20 the per-trial probability is ~8e-25, which collapses to
zero in 64-bit floats. log1p/expm1 keep full relative precision instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "GenModel",
    "HardwareEstimate",
    "SimilarityScore",
    "birthday_collision_prob",
    "expected_trials",
    "hardware_estimate",
    "match_probability",
    "osa_distance",
    "positional_matches",
    "score",
]

SECONDS_PER_DAY = 86_400


@dataclass(frozen=True, slots=True)
class SimilarityScore:
    """Shared-prefix length a and shared-suffix length b of two addresses."""

    a: int
    b: int

    @property
    def d(self) -> int:
        return self.a + self.b

    @property
    def identical(self) -> bool:
        # a == 40 already implies full equality
        return self.a == 40


def _digits(address: str) -> str:
    if address[:2] in ("0x", "0X"):
        address = address[2:]
    return address


def score(x: str, y: str) -> SimilarityScore:
    """Prefix/suffix similarity of two 40-digit addresses.

    Identical inputs score (40, 40) and set the identical flag; callers that
    look for lookalikes must filter those out, an address is not its own
    imitation. For distinct inputs a + b <= 39 by construction.
    """
    dx, dy = _digits(x), _digits(y)
    if len(dx) != 40 or len(dy) != 40:
        raise ValueError(f"addresses must have 40 hex digits, got {len(dx)} and {len(dy)}")
    if dx == dy:
        return SimilarityScore(40, 40)
    a = 0
    while dx[a] == dy[a]:
        a += 1
    b = 0
    while dx[39 - b] == dy[39 - b]:
        b += 1
    return SimilarityScore(a, b)


def positional_matches(x: str, y: str) -> int:
    """Count of positions where two 40-digit addresses carry the same digit.

    Random pairs match 40/16 = 2.5 positions on average, so a high count is
    strong evidence of a mistyped rather than a mined address.
    """
    dx, dy = _digits(x), _digits(y)
    if len(dx) != len(dy):
        raise ValueError(f"length mismatch: {len(dx)} vs {len(dy)}")
    return sum(1 for cx, cy in zip(dx, dy) if cx == cy)


def osa_distance(s1: str, s2: str) -> int:
    """Optimal string alignment distance.

    Unit-cost insertions, deletions, substitutions, and adjacent
    transpositions, with the restriction that no substring is edited twice.
    Classic full-matrix dynamic program.
    """
    n, m = len(s1), len(s2)
    if n == 0:
        return m
    if m == 0:
        return n
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        c1 = s1[i - 1]
        row = d[i]
        above = d[i - 1]
        for j in range(1, m + 1):
            cost = 0 if c1 == s2[j - 1] else 1
            best = min(above[j] + 1, row[j - 1] + 1, above[j - 1] + cost)
            if i > 1 and j > 1 and c1 == s2[j - 2] and s1[i - 2] == s2[j - 1]:
                two = d[i - 2][j - 2] + 1
                if two < best:
                    best = two
            row[j] = best
    return d[n][m]


# ---------------------------------------------------------------------------
# probability of brute-force lookalike search


def match_probability(d: int, r: int, alphabet: int = 16) -> float:
    """Probability that one random address matches at least one of r targets
    on d fixed digits: 1 - ((16^d - 1) / 16^d)^r."""
    if d < 0:
        raise ValueError(f"d must be >= 0, got {d}")
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    if r == 0:
        return 0.0
    if d == 0:
        return 1.0
    per_target = float(alphabet) ** -d
    return -math.expm1(r * math.log1p(-per_target))


def expected_trials(d: int, r: int, alphabet: int = 16) -> float:
    """Expected number of candidate addresses before the first match.

    Trials are geometric, so E[X] = 1/p, roughly 16^d / r. Doubling d by one
    digit multiplies the work by 16; this is the knob attackers trade off
    against deceptiveness.
    """
    if r < 1:
        raise ValueError(f"need at least one target, got r={r}")
    p = match_probability(d, r, alphabet)
    if p == 0.0:
        return math.inf
    return 1.0 / p


def birthday_collision_prob(r: int, digits: int = 7, alphabet: int = 16) -> float:
    """Probability that some pair among r random counterparties collides on
    the checked digit positions: 1 - exp(-r^2 / (2 * 16^digits)).

    At the default 7 digits (3 prefix + 4 suffix) this crosses one half near
    r = 19,290. Victims with that many distinct counterparties are excluded,
    a near-match among their partners is expected by chance alone.
    """
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    slots = float(alphabet) ** digits
    return -math.expm1(-(float(r) * float(r)) / (2.0 * slots))


# ---------------------------------------------------------------------------
# hardware cost model


@dataclass(frozen=True, slots=True)
class GenModel:
    """Throughput and price constants for lookalike mining hardware.

    aps_cpu is the measured optimized CPU searcher throughput (addresses per
    second, 8 workers); aps_gpu the measured GPU vanity-search throughput.
    Prices are on-demand cloud rates per device-day.
    """

    alphabet: int = 16
    aps_cpu: float = 460_665.0
    aps_gpu: float = 516_437_000.0
    usd_per_cpu_day: float = 24.19
    usd_per_gpu_day: float = 62.69

    @property
    def addresses_per_cpu_day(self) -> float:
        return self.aps_cpu * SECONDS_PER_DAY

    @property
    def addresses_per_gpu_day(self) -> float:
        return self.aps_gpu * SECONDS_PER_DAY


@dataclass(frozen=True, slots=True)
class HardwareEstimate:
    """Expected search effort for one lookalike at similarity d against r
    targets, in device-days and USD."""

    d: int
    r: int
    trials: float
    cpu_days: float
    gpu_days: float
    cpu_usd: float
    gpu_usd: float


def hardware_estimate(d: int, r: int, model: GenModel | None = None) -> HardwareEstimate:
    """Closed-form mining effort estimate; no search is performed."""
    if model is None:
        model = GenModel()
    trials = expected_trials(d, r, model.alphabet)
    cpu_days = trials / model.addresses_per_cpu_day
    gpu_days = trials / model.addresses_per_gpu_day
    return HardwareEstimate(
        d=d,
        r=r,
        trials=trials,
        cpu_days=cpu_days,
        gpu_days=gpu_days,
        cpu_usd=cpu_days * model.usd_per_cpu_day,
        gpu_usd=gpu_days * model.usd_per_gpu_day,
    )
