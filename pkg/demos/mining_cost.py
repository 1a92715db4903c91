"""How expensive is a convincing lookalike address?

Runs a small seeded search against one target to show the geometric trial
count at shallow similarity, then prints the closed-form effort model at
the depths real campaigns pay for.
"""

from poisonscan.addrgen import SearchSpec, search
from poisonscan.similarity import hardware_estimate

TARGET = "0x7a16ff8270133f063aab6c9977183d9e72835428"


def main() -> None:
    spec = SearchSpec(targets=(TARGET,), a_min=2, b_min=1, max_matches=3)
    stats = search(spec, seed=7)
    print(f"target   {TARGET}")
    print(f"searched {stats.trials:,} keys ({stats.aps:,.0f} keys/s)")
    for match in stats.matches:
        print(f"  found  {match.address}  (prefix {match.a}, suffix {match.b})")

    print()
    print("expected effort per lookalike against one million harvested targets:")
    print(f"{'d':>3} {'trials':>12} {'cpu-days':>12} {'gpu-days':>12} {'gpu-cost':>14}")
    for d in (8, 11, 14, 17, 20):
        est = hardware_estimate(d=d, r=10**6)
        print(
            f"{d:>3} {est.trials:>12.3e} {est.cpu_days:>12.4g} "
            f"{est.gpu_days:>12.4g} {est.gpu_usd:>13,.2f}$"
        )
    print()
    print("a seven-digit match is pocket change; a twenty-digit one costs millions.")


if __name__ == "__main__":
    main()
