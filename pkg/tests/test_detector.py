"""Detection pipeline tests: windowed collection, classification rules,
payoff confirmation, typo flagging, victim exclusion, and equality with the
brute-force reference detector."""

from __future__ import annotations

import json
import random
from datetime import date, timedelta
from decimal import Decimal

import pytest

from poisonscan.core import (
    ChainConfig,
    ConfigError,
    Label,
    OrderingError,
    PriceTable,
    RegistryEntry,
    TokenRef,
    TokenRegistry,
    TransferEvent,
    TransactionRecord,
)
from poisonscan.detector import (
    DetectionReport,
    birthday_filter,
    confirm_payoffs,
    detect_accidental,
    scan,
    sensitivity_run,
)
from poisonscan.ingest import EventStore
from poisonscan.scenario import GroupSpec, ScenarioSpec, generate, score_labels
from poisonscan.similarity import positional_matches, score

from reference import reference_detect
from helpers import (
    AUTH,
    FAKE,
    GENESIS,
    R1,
    R2,
    STABLE,
    V1,
    V2,
    StreamBuilder,
    lookalike,
    make_prices,
    make_registry,
)


def run_scan(builder, config=None):
    config = config or ChainConfig(chain_id=1)
    return scan(builder.events(), config, make_registry(), make_prices())


# ---------------------------------------------------------------------------
# classification rules


def test_tiny_poison_and_intended():
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(102, look, V1, STABLE, 5_000_000)
    report = run_scan(sb)
    trigger_key, poison_key = [e.key for e in sb.events()]
    assert report.labels == {trigger_key: Label.INTENDED, poison_key: Label.TINY}
    (ctx,) = report.contexts
    assert (ctx.victim, ctx.intended, ctx.lookalike) == (V1, R1, look)
    assert ctx.evidence == (poison_key,)
    assert (ctx.a, ctx.b) == (3, 4)
    assert ctx.anchor_key == trigger_key
    assert not ctx.via_sibling
    assert report.victim_recipients == {V1: 1}
    assert report.events[poison_key].usd == Decimal("5.000000")
    assert report.counters["tiny"] == 1


def test_zero_value_poison():
    look = lookalike(R1, 4, 5)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(150, V1, look, STABLE, 0)
    report = run_scan(sb)
    poison_key = sb.events()[1].key
    assert report.labels[poison_key] == Label.ZERO
    assert report.counters["zero_value"] == 1


def test_counterfeit_poison_has_no_usd():
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(103, V1, look, FAKE, 999 * 10**18)
    report = run_scan(sb)
    poison_key = sb.events()[1].key
    assert report.labels[poison_key] == Label.COUNTERFEIT
    assert report.events[poison_key].usd is None
    assert report.unpriced == ()
    assert report.counters["counterfeit"] == 1


def test_zero_value_of_unregistered_token_is_counterfeit():
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(103, V1, look, FAKE, 0)
    report = run_scan(sb)
    assert report.labels[sb.events()[1].key] == Label.COUNTERFEIT


@pytest.mark.parametrize(
    "value,expect_tiny",
    [(9_999_999, True), (10_000_000, False), (1, True)],
)
def test_tiny_threshold_is_strict(value, expect_tiny):
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(102, look, V1, STABLE, value)
    report = run_scan(sb)
    got = report.labels.get(sb.events()[1].key)
    assert (got == Label.TINY) is expect_tiny


@pytest.mark.parametrize(
    "offset,collected",
    [(1, True), (2, True), (101, True), (102, False), (0, False)],
)
def test_window_boundaries(offset, collected):
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(1000, V1, R1, STABLE, 50_000_000)
    sb.add(1000 + offset, V1, look, STABLE, 0)
    report = run_scan(sb)
    assert (sb.events()[1].key in report.labels) is collected


def test_repeat_payment_to_intended_is_benign():
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(102, V1, R1, STABLE, 5_000_000)
    sb.add(103, R1, V1, STABLE, 5_000_000)
    report = run_scan(sb)
    assert report.labels == {}
    assert report.payoffs == ()


def test_benign_triggers_emit_nothing():
    sb = StreamBuilder()
    for i in range(5):
        sb.add(100 + i, V1, R1, STABLE, 20_000_000 + i)
        sb.add(100 + i, V2, R2, STABLE, 30_000_000 + i)
    report = run_scan(sb)
    assert report.labels == {}
    assert report.contexts == ()


def test_near_miss_counter():
    near = lookalike(R1, 2, 6)
    far = lookalike(R2, 2, 2)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(100, V2, R2, STABLE, 50_000_000)
    sb.add(102, near, V1, STABLE, 5_000_000)
    sb.add(103, far, V2, STABLE, 5_000_000)
    report = run_scan(sb)
    assert report.labels == {}
    assert report.counters["near_misses"] == 1


def test_missing_price_quarantines_tiny_candidate():
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(102, look, V1, STABLE, 5_000_000)
    report = scan(sb.events(), ChainConfig(chain_id=1), make_registry(), PriceTable({}))
    poison_key = sb.events()[1].key
    assert report.labels == {}
    assert report.unpriced == (poison_key,)
    assert report.counters["unpriced"] == 1


# ---------------------------------------------------------------------------
# payoffs


def test_payoff_confirmed_far_beyond_window():
    look = lookalike(R1, 4, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(102, V1, look, STABLE, 0)
    sb.add(700, V1, look, STABLE, 200_000_000)
    report = run_scan(sb)
    trigger_key, poison_key, pay_key = [e.key for e in sb.events()]
    (row,) = report.payoffs
    assert row.key == pay_key
    assert row.confirmed and not row.via_history
    assert row.evidence == (poison_key,)
    assert row.intended == R1
    assert row.anchor_key == trigger_key
    assert report.labels[pay_key] == Label.PAYOFF_CONFIRMED
    assert row.usd == Decimal("200.000000")
    anchor = report.events[trigger_key]
    poison = report.events[poison_key]
    pay = report.events[pay_key]
    assert (anchor.block_number, anchor.log_index) < (poison.block_number, poison.log_index)
    assert (poison.block_number, poison.log_index) < (pay.block_number, pay.log_index)


def test_payoff_unconfirmed_without_poisoning():
    look = lookalike(R1, 5, 5)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(105, V1, look, STABLE, 300_000_000)
    report = run_scan(sb)
    (row,) = report.payoffs
    assert not row.confirmed
    assert row.evidence == ()
    assert report.labels[row.key] == Label.PAYOFF_UNCONFIRMED
    assert report.labels[sb.events()[0].key] == Label.INTENDED


def test_poisoning_after_payoff_does_not_confirm():
    look = lookalike(R1, 4, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(105, V1, look, STABLE, 300_000_000)
    sb.add(110, V1, look, STABLE, 0)
    report = run_scan(sb)
    (row,) = report.payoffs
    assert not row.confirmed
    assert report.labels[row.key] == Label.PAYOFF_UNCONFIRMED
    assert report.labels[sb.events()[2].key] == Label.ZERO


def test_payoff_label_outranks_poison_label():
    # one transfer that is a payoff for V1's context and a tiny poisoning
    # for the sender-victim context of its recipient
    x = lookalike(R1, 3, 4)
    r2 = lookalike(V1, 4, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(100, x, r2, STABLE, 50_000_000)
    sb.add(103, V1, x, STABLE, 5_000_000)
    report = run_scan(sb)
    key = sb.events()[2].key
    assert report.labels[key] == Label.PAYOFF_UNCONFIRMED
    ctx_keys = {(c.victim, c.intended, c.lookalike) for c in report.contexts}
    assert (x, r2, V1) in ctx_keys
    (ctx,) = [c for c in report.contexts if c.victim == x]
    assert key in ctx.evidence


# ---------------------------------------------------------------------------
# shared-transaction expansion


def sibling_stream(shared_tx: bool):
    look1 = lookalike(R1, 3, 4)
    look2 = lookalike(R2, 3, 4)
    sb = StreamBuilder()
    sb.add(10, V2, R2, STABLE, 50_000_000)
    sb.add(100, V1, R1, STABLE, 50_000_000)
    tx = "0x" + "ab" * 32
    sb.add(150, V1, look1, STABLE, 0, tx_hash=tx)
    sb.add(150, V2, look2, STABLE, 0, tx_hash=tx if shared_tx else None)
    return sb


def test_sibling_expansion_rescues_out_of_window_victim():
    report = run_scan(sibling_stream(shared_tx=True))
    events = sibling_stream(shared_tx=True).events()
    assert report.labels[events[2].key] == Label.ZERO
    assert report.labels[events[3].key] == Label.ZERO
    rescued = [c for c in report.contexts if c.victim == V2]
    assert rescued and rescued[0].via_sibling
    direct = [c for c in report.contexts if c.victim == V1]
    assert direct and not direct[0].via_sibling
    assert report.counters["collected_sibling"] == 1


def test_no_expansion_across_transactions():
    report = run_scan(sibling_stream(shared_tx=False))
    events = sibling_stream(shared_tx=False).events()
    assert report.labels[events[2].key] == Label.ZERO
    assert events[3].key not in report.labels


def test_expansion_needs_a_direct_hit():
    look1 = lookalike(R1, 3, 4)
    look2 = lookalike(R2, 3, 4)
    sb = StreamBuilder()
    sb.add(10, V1, R1, STABLE, 50_000_000)
    sb.add(11, V2, R2, STABLE, 50_000_000)
    tx = "0x" + "cd" * 32
    sb.add(300, V1, look1, STABLE, 0, tx_hash=tx)
    sb.add(300, V2, look2, STABLE, 0, tx_hash=tx)
    report = run_scan(sb)
    assert report.labels == {}


# ---------------------------------------------------------------------------
# input validation


def test_unordered_stream_rejected():
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 1_000_000)
    sb.add(99, V2, R2, STABLE, 1_000_000)
    events = sorted(sb.events(), key=lambda e: -e.block_number)
    with pytest.raises(OrderingError):
        scan(events, ChainConfig(chain_id=1), make_registry(), make_prices())


def test_chain_mismatch_rejected():
    sb = StreamBuilder(chain_id=56)
    sb.add(100, V1, R1, STABLE, 1_000_000)
    with pytest.raises(ConfigError):
        scan(sb.events(), ChainConfig(chain_id=1), make_registry(), make_prices())


def test_generator_input_equals_list_input():
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(102, look, V1, STABLE, 5_000_000)
    sb.add(120, V1, look, STABLE, 400_000_000)
    events = sb.events()
    a = scan(events, ChainConfig(chain_id=1), make_registry(), make_prices())
    b = scan(iter(events), ChainConfig(chain_id=1), make_registry(), make_prices())
    assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
        b.to_json_dict(), sort_keys=True
    )


def test_report_json_roundtrip(tmp_path):
    report = run_scan(sibling_stream(shared_tx=True))
    path = tmp_path / "report.json"
    report.write_json(path)
    back = DetectionReport.read_json(path)
    assert back == report
    report.write_json(tmp_path / "again.json")
    assert (tmp_path / "report.json").read_bytes() == (tmp_path / "again.json").read_bytes()


# ---------------------------------------------------------------------------
# full-history confirmation


def test_full_history_upgrades_non_stablecoin_tiny():
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(102, look, V1, AUTH, 10**18)
    sb.add(105, V1, look, STABLE, 200_000_000)
    events = sb.events()
    config = ChainConfig(chain_id=1)
    report = scan(events, config, make_registry(), make_prices())
    (row,) = report.payoffs
    assert not row.confirmed
    unchanged = confirm_payoffs(report)
    assert unchanged == report
    upgraded = confirm_payoffs(
        report, EventStore(events), registry=make_registry(), prices=make_prices()
    )
    (row2,) = upgraded.payoffs
    assert row2.confirmed and row2.via_history
    assert row2.evidence == (events[1].key,)
    assert upgraded.labels[row2.key] == Label.PAYOFF_CONFIRMED
    assert events[1].key not in upgraded.labels


def test_full_history_respects_ordering_and_threshold():
    look = lookalike(R1, 3, 4)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(105, V1, look, STABLE, 200_000_000)
    sb.add(103, look, V1, AUTH, 3 * 10**18)
    sb.add(110, look, V1, AUTH, 10**18)
    sb.add(99, look, V1, AUTH, 10**18)
    events = sb.events()
    config = ChainConfig(chain_id=1)
    report = scan(events, config, make_registry(), make_prices())
    upgraded = confirm_payoffs(
        report, EventStore(events), registry=make_registry(), prices=make_prices()
    )
    (row,) = upgraded.payoffs
    assert not row.confirmed


# ---------------------------------------------------------------------------
# accidental transfers


def typo_of(intended: str) -> str:
    digits = list(intended[2:])
    digits[17] = "0" if digits[17] != "0" else "1"
    return "0x" + "".join(digits)


def test_typo_payment_flagged_accidental():
    typo = typo_of(R1)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(103, V1, typo, STABLE, 300_000_000)
    events = sb.events()
    report = scan(events, ChainConfig(chain_id=1), make_registry(), make_prices())
    flagged = detect_accidental(report, events)
    (row,) = flagged.payoffs
    assert row.key in flagged.accidental
    assert row.edit_distance == 1
    assert flagged.labels[row.key] == Label.ACCIDENTAL
    assert positional_matches(typo, R1) == 39


def test_spender_is_not_accidental():
    typo = typo_of(R1)
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(103, V1, typo, STABLE, 300_000_000)
    sb.add(200, typo, V2, STABLE, 100_000_000)
    events = sb.events()
    report = scan(events, ChainConfig(chain_id=1), make_registry(), make_prices())
    flagged = detect_accidental(report, events)
    assert flagged.accidental == frozenset()
    assert flagged.labels[events[1].key] == Label.PAYOFF_UNCONFIRMED


def test_attack_range_similarity_is_not_accidental():
    look = lookalike(R1, 5, 5)
    assert positional_matches(look, R1) <= 20
    sb = StreamBuilder()
    sb.add(100, V1, R1, STABLE, 50_000_000)
    sb.add(103, V1, look, STABLE, 300_000_000)
    events = sb.events()
    report = scan(events, ChainConfig(chain_id=1), make_registry(), make_prices())
    flagged = detect_accidental(report, events)
    assert flagged.accidental == frozenset()


# ---------------------------------------------------------------------------
# birthday exclusion


def heavy_victim_stream():
    """Victim A pays 1000 distinct recipients, victim B pays 100; both then
    get poisoned. With 2+2 digit thresholds the collision probability for A
    crosses 0.999."""
    config = ChainConfig(chain_id=1, a_min=2, b_min=2)
    sb = StreamBuilder()
    rng = random.Random(8888)
    for i in range(1000):
        sb.add(100 + i, V1, f"0x{rng.getrandbits(160):040x}", STABLE, 20_000_000)
    for i in range(100):
        sb.add(100 + i, V2, f"0x{rng.getrandbits(160):040x}", STABLE, 20_000_000)
    sb.add(1200, V1, R1, STABLE, 50_000_000)
    sb.add(1200, V2, R2, STABLE, 50_000_000)
    sb.add(1202, V1, lookalike(R1, 2, 2), STABLE, 0)
    sb.add(1202, V2, lookalike(R2, 2, 2), STABLE, 0)
    return sb, config


def test_birthday_filter_excludes_heavy_victims():
    sb, config = heavy_victim_stream()
    report = scan(sb.events(), config, make_registry(), make_prices())
    assert report.victim_recipients[V1] == 1001
    assert report.victim_recipients[V2] == 101
    filtered = birthday_filter(report, config)
    assert set(filtered.excluded_victims) == {V1}
    assert filtered.excluded_victims[V1] >= 0.999
    headline = filtered.headline_counts()
    assert headline[Label.ZERO] == 1
    assert report.headline_counts()[Label.ZERO] == 2
    strict = birthday_filter(report, config.with_overrides(birthday_alpha=0.01))
    assert set(strict.excluded_victims) == {V1, V2}


# ---------------------------------------------------------------------------
# sensitivity harness


def test_sensitivity_run_shapes():
    sb = StreamBuilder()
    sb.add(1000, V1, R1, STABLE, 50_000_000)
    sb.add(1050, V1, lookalike(R1, 4, 5), STABLE, 0)
    sb.add(1150, V1, lookalike(R1, 4, 6), STABLE, 0)
    sb.add(1000, V2, R2, STABLE, 50_000_000)
    sb.add(1050, V2, lookalike(R2, 3, 3), STABLE, 0)
    base = ChainConfig(chain_id=1)
    wide = base.with_overrides(window_blocks=200)
    loose = base.with_overrides(b_min=3)
    rows = sensitivity_run(
        sb.events(), [base, wide, loose], make_registry(), make_prices()
    )
    by_cfg = {(r["window_blocks"], r["a_min"], r["b_min"]): r for r in rows}
    assert by_cfg[(100, 3, 4)]["zero_value"] == 1
    assert by_cfg[(200, 3, 4)]["zero_value"] == 2
    assert by_cfg[(100, 3, 3)]["zero_value"] == 2
    again = sensitivity_run(sb.events(), [base, base], make_registry(), make_prices())
    assert again[0] == again[1]


# ---------------------------------------------------------------------------
# reference-detector equality on generated scenarios


def rich_spec(seed: int) -> ScenarioSpec:
    return ScenarioSpec(
        seed=seed,
        n_blocks=900,
        benign_per_block=2,
        n_benign_users=30,
        groups=(
            GroupSpec(
                n_attacks=6,
                strategies=("tiny", "zero", "counterfeit"),
                scores=((3, 4), (4, 5)),
                bundle_size=2,
                sibling_bundles=1,
                payoff_rate=1.0,
                payoff_delay=(2, 120),
                history_upgrades=1,
            ),
            GroupSpec(
                n_attacks=4,
                strategies=("zero",),
                scores=((5, 6),),
                offsets=(30, 80),
                payoff_rate=0.5,
            ),
        ),
        typos=2,
        decoy_payoffs=1,
        contested_payoffs=2,
        contested_winners=(0, 1),
    )


def full_pipeline(events, config, registry, prices):
    report = scan(events, config, registry, prices)
    report = confirm_payoffs(report, EventStore(events), registry=registry, prices=prices)
    return detect_accidental(report, events)


@pytest.mark.parametrize("seed", [0, 7, 23])
def test_scan_matches_reference_and_truth(seed):
    bundle = generate(rich_spec(seed))
    events = list(bundle.events())
    config = bundle.configs[1]
    report = full_pipeline(events, config, bundle.registry, bundle.prices)
    ref = reference_detect(events, config, bundle.registry, bundle.prices)
    assert report.labels == ref.labels
    got_contexts = {
        (c.victim, c.intended, c.lookalike): frozenset(c.evidence) for c in report.contexts
    }
    assert got_contexts == ref.contexts
    assert {p.key for p in report.payoffs if p.confirmed} == ref.confirmed
    assert report.accidental == ref.accidental
    card = score_labels(report.labels, bundle.truth, 1)
    assert card.precision == 1.0 and card.recall == 1.0


def test_window_monotonicity_on_generated_scenario():
    bundle = generate(rich_spec(3))
    events = list(bundle.events())
    config = bundle.configs[1]
    small = scan(events, config, bundle.registry, bundle.prices)
    wide = scan(
        events, config.with_overrides(window_blocks=200), bundle.registry, bundle.prices
    )
    small_poisons = {k for k, v in small.labels.items() if v in Label.POISONS}
    wide_poisons = {k for k, v in wide.labels.items() if v in Label.POISONS}
    assert small_poisons <= wide_poisons
