"""The whole toolchain end to end, through the command-line interface.

Simulates a labeled scenario into a working directory, then runs scan,
cluster, econ, and score exactly as an operator would, and shows what each
stage produced.
"""

import json
import tempfile
from pathlib import Path

from poisonscan.cli import run
from poisonscan.scenario import BotSpec, GroupSpec, ScenarioSpec


def main() -> None:
    spec = ScenarioSpec(
        seed=9,
        n_blocks=600,
        groups=(
            GroupSpec(n_attacks=4, n_attackers=1, payoff_rate=0.5),
            GroupSpec(
                n_attacks=3,
                n_attackers=1,
                strategies=("zero", "counterfeit"),
                scores=((4, 4),),
                payoff_rate=0.5,
            ),
        ),
        bots=(BotSpec(copies=(0, 1), n_copies=2),),
        typos=1,
    )
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp)
        spec_path = base / "scenario_spec.json"
        spec_path.write_text(json.dumps(spec.to_json_dict(), sort_keys=True) + "\n")

        sim = base / "sim"
        stages = [
            ["simulate", "--spec", str(spec_path), "--out", str(sim)],
            [
                "scan",
                "--events", str(sim / "events.jsonl"),
                "--config", str(sim / "config.json"),
                "--registry", str(sim / "registry.jsonl"),
                "--prices", str(sim / "prices.csv"),
                "--out", str(base / "scan"),
            ],
            [
                "cluster",
                "--report", str(base / "scan" / "report.json"),
                "--accounts", str(sim / "accounts.csv"),
                "--out", str(base / "cluster"),
            ],
            [
                "econ",
                "--report", str(base / "scan" / "report.json"),
                "--clusters", str(base / "cluster" / "clusters.json"),
                "--prices", str(sim / "prices.csv"),
                "--out", str(base / "econ"),
            ],
            [
                "score",
                "--report", str(base / "scan" / "report.json"),
                "--truth", str(sim / "ground_truth.jsonl"),
                "--clusters", str(base / "cluster" / "clusters.json"),
                "--out", str(base / "metrics.json"),
            ],
        ]
        for argv in stages:
            print(f"$ poisonscan {argv[0]} ...")
            code = run(argv)
            assert code == 0, f"{argv[0]} exited {code}"
            outdir = base / argv[0] if (base / argv[0]).is_dir() else None
            if argv[0] == "simulate":
                outdir = sim
            if outdir:
                names = ", ".join(sorted(p.name for p in outdir.iterdir()))
                print(f"  wrote {names}")

        metrics = json.loads((base / "metrics.json").read_text())
        print()
        print("score vs planted truth:")
        for key in ("precision", "recall", "f1", "rand_index"):
            print(f"  {key:<12} {metrics[key]}")


if __name__ == "__main__":
    main()
