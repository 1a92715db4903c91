"""Windowed poisoning detection over an ordered transfer stream.

The pipeline: every stablecoin transfer with positive value marks its sender
as a victim and its receiver as an intended counterparty; transfers in the
following window of blocks are probed for lookalike counterparties and
classified as tiny, zero-value, or counterfeit poisonings or as payoff
candidates; transactions containing a detected poisoning have all their
transfers re-evaluated against the full trigger history; payoffs confirm
when a poisoning binding the same victim and lookalike sits strictly
between the intended transfer and the payoff.

scan() is a single pass whose candidate state is pruned to the window; the
first intended transfer per (victim, recipient) pair is retained for the
whole run because it anchors confirmation and the shared-transaction path.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import (
    ChainConfig,
    ConfigError,
    Label,
    OrderingError,
    PriceTable,
    TokenRegistry,
    TransferEvent,
    event_date,
    usd_amount,
)
from .ingest import EventStore
from .similarity import (
    birthday_collision_prob,
    osa_distance,
    positional_matches,
    score,
)

__all__ = [
    "AttackContext",
    "DetectionReport",
    "EventDetail",
    "PayoffRecord",
    "birthday_filter",
    "confirm_payoffs",
    "detect_accidental",
    "scan",
    "sensitivity_run",
]

_RANK = {
    Label.BENIGN: 0,
    Label.INTENDED: 1,
    Label.TINY: 2,
    Label.ZERO: 2,
    Label.COUNTERFEIT: 2,
    Label.PAYOFF_UNCONFIRMED: 3,
    Label.PAYOFF_CONFIRMED: 3,
    Label.ACCIDENTAL: 3,
}


@dataclass(frozen=True, slots=True)
class EventDetail:
    """Snapshot of one labeled or payoff-relevant transfer."""

    key: str
    block_number: int
    timestamp: int
    log_index: int
    tx_hash: str
    token: str
    from_addr: str
    to_addr: str
    value: int
    usd: Decimal | None = None
    initiator: str | None = None
    target: str | None = None
    gas_used: int | None = None
    gas_price: int | None = None

    @classmethod
    def from_event(cls, event: TransferEvent, usd: Decimal | None) -> "EventDetail":
        tx = event.tx
        return cls(
            key=event.key,
            block_number=event.block_number,
            timestamp=event.timestamp,
            log_index=event.log_index,
            tx_hash=event.tx_hash,
            token=event.token,
            from_addr=event.from_addr,
            to_addr=event.to_addr,
            value=event.value,
            usd=usd,
            initiator=tx.initiator if tx else None,
            target=tx.target if tx else None,
            gas_used=tx.gas_used if tx else None,
            gas_price=tx.gas_price if tx else None,
        )

    @property
    def order(self) -> tuple[int, int]:
        return (self.block_number, self.log_index)

    def to_json_dict(self) -> dict:
        return {
            "key": self.key,
            "block_number": self.block_number,
            "timestamp": self.timestamp,
            "log_index": self.log_index,
            "tx_hash": self.tx_hash,
            "token": self.token,
            "from": self.from_addr,
            "to": self.to_addr,
            "value": str(self.value),
            "usd": str(self.usd) if self.usd is not None else None,
            "initiator": self.initiator,
            "target": self.target,
            "gas_used": self.gas_used,
            "gas_price": self.gas_price,
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "EventDetail":
        return cls(
            key=raw["key"],
            block_number=raw["block_number"],
            timestamp=raw["timestamp"],
            log_index=raw["log_index"],
            tx_hash=raw["tx_hash"],
            token=raw["token"],
            from_addr=raw["from"],
            to_addr=raw["to"],
            value=int(raw["value"]),
            usd=Decimal(raw["usd"]) if raw["usd"] is not None else None,
            initiator=raw["initiator"],
            target=raw["target"],
            gas_used=raw["gas_used"],
            gas_price=raw["gas_price"],
        )


@dataclass(frozen=True, slots=True)
class AttackContext:
    """One (victim, intended, lookalike) binding with its evidence."""

    victim: str
    intended: str
    lookalike: str
    a: int
    b: int
    anchor_key: str
    anchor_block: int
    anchor_log_index: int
    via_sibling: bool
    evidence: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "victim": self.victim,
            "intended": self.intended,
            "lookalike": self.lookalike,
            "a": self.a,
            "b": self.b,
            "anchor_key": self.anchor_key,
            "anchor_block": self.anchor_block,
            "anchor_log_index": self.anchor_log_index,
            "via_sibling": self.via_sibling,
            "evidence": list(self.evidence),
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "AttackContext":
        return cls(
            victim=raw["victim"],
            intended=raw["intended"],
            lookalike=raw["lookalike"],
            a=raw["a"],
            b=raw["b"],
            anchor_key=raw["anchor_key"],
            anchor_block=raw["anchor_block"],
            anchor_log_index=raw["anchor_log_index"],
            via_sibling=raw["via_sibling"],
            evidence=tuple(raw["evidence"]),
        )


@dataclass(frozen=True, slots=True)
class PayoffRecord:
    """A victim's positive-value authentic transfer to a lookalike."""

    key: str
    victim: str
    lookalike: str
    intended: str | None
    anchor_key: str | None
    anchor_block: int | None
    anchor_log_index: int | None
    block_number: int
    log_index: int
    token: str
    value: int
    usd: Decimal | None
    confirmed: bool
    via_history: bool
    evidence: tuple[str, ...]
    edit_distance: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "key": self.key,
            "victim": self.victim,
            "lookalike": self.lookalike,
            "intended": self.intended,
            "anchor_key": self.anchor_key,
            "anchor_block": self.anchor_block,
            "anchor_log_index": self.anchor_log_index,
            "block_number": self.block_number,
            "log_index": self.log_index,
            "token": self.token,
            "value": str(self.value),
            "usd": str(self.usd) if self.usd is not None else None,
            "confirmed": self.confirmed,
            "via_history": self.via_history,
            "evidence": list(self.evidence),
            "edit_distance": self.edit_distance,
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "PayoffRecord":
        return cls(
            key=raw["key"],
            victim=raw["victim"],
            lookalike=raw["lookalike"],
            intended=raw["intended"],
            anchor_key=raw["anchor_key"],
            anchor_block=raw["anchor_block"],
            anchor_log_index=raw["anchor_log_index"],
            block_number=raw["block_number"],
            log_index=raw["log_index"],
            token=raw["token"],
            value=int(raw["value"]),
            usd=Decimal(raw["usd"]) if raw["usd"] is not None else None,
            confirmed=raw["confirmed"],
            via_history=raw["via_history"],
            evidence=tuple(raw["evidence"]),
            edit_distance=raw["edit_distance"],
        )


@dataclass(frozen=True)
class DetectionReport:
    """Everything one scan produced, serializable and order-stable."""

    chain_id: int
    config: ChainConfig
    labels: dict[str, str]
    events: dict[str, EventDetail]
    contexts: tuple[AttackContext, ...]
    payoffs: tuple[PayoffRecord, ...]
    victim_recipients: dict[str, int]
    excluded_victims: dict[str, float]
    accidental: frozenset[str]
    unpriced: tuple[str, ...]
    authentic_tokens: frozenset[str]
    counters: dict[str, int]

    @property
    def victims(self) -> tuple[str, ...]:
        return tuple(sorted(self.victim_recipients))

    @property
    def intendeds(self) -> tuple[str, ...]:
        out = {c.intended for c in self.contexts}
        out.update(p.intended for p in self.payoffs if p.intended is not None)
        return tuple(sorted(out))

    @property
    def lookalikes(self) -> tuple[str, ...]:
        out = {c.lookalike for c in self.contexts}
        out.update(p.lookalike for p in self.payoffs)
        return tuple(sorted(out))

    def quarantined_keys(self) -> frozenset[str]:
        """Event keys whose every owning victim is birthday-excluded."""
        if not self.excluded_victims:
            return frozenset()
        owners: dict[str, set[str]] = {}
        for ctx in self.contexts:
            for key in ctx.evidence + (ctx.anchor_key,):
                owners.setdefault(key, set()).add(ctx.victim)
        for row in self.payoffs:
            owners.setdefault(row.key, set()).add(row.victim)
            if row.anchor_key is not None:
                owners.setdefault(row.anchor_key, set()).add(row.victim)
        excluded = set(self.excluded_victims)
        return frozenset(k for k, vs in owners.items() if vs <= excluded)

    def headline_counts(self) -> dict[str, int]:
        """Per-label totals with birthday-excluded victims removed."""
        dropped = self.quarantined_keys()
        out: dict[str, int] = {}
        for key, label in self.labels.items():
            if key not in dropped:
                out[label] = out.get(label, 0) + 1
        return out

    def to_json_dict(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "config": self.config.to_dict(),
            "labels": {k: self.labels[k] for k in sorted(self.labels)},
            "events": {k: self.events[k].to_json_dict() for k in sorted(self.events)},
            "contexts": [c.to_json_dict() for c in self.contexts],
            "payoffs": [p.to_json_dict() for p in self.payoffs],
            "victim_recipients": {
                k: self.victim_recipients[k] for k in sorted(self.victim_recipients)
            },
            "excluded_victims": {
                k: self.excluded_victims[k] for k in sorted(self.excluded_victims)
            },
            "accidental": sorted(self.accidental),
            "unpriced": list(self.unpriced),
            "authentic_tokens": sorted(self.authentic_tokens),
            "counters": {k: self.counters[k] for k in sorted(self.counters)},
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "DetectionReport":
        return cls(
            chain_id=raw["chain_id"],
            config=ChainConfig.from_dict(raw["config"]),
            labels=dict(raw["labels"]),
            events={k: EventDetail.from_json_dict(v) for k, v in raw["events"].items()},
            contexts=tuple(AttackContext.from_json_dict(c) for c in raw["contexts"]),
            payoffs=tuple(PayoffRecord.from_json_dict(p) for p in raw["payoffs"]),
            victim_recipients=dict(raw["victim_recipients"]),
            excluded_victims=dict(raw["excluded_victims"]),
            accidental=frozenset(raw["accidental"]),
            unpriced=tuple(raw["unpriced"]),
            authentic_tokens=frozenset(raw["authentic_tokens"]),
            counters=dict(raw["counters"]),
        )

    def write_json(self, path: str | Path) -> None:
        text = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        Path(path).write_text(text + "\n", encoding="utf-8")

    @classmethod
    def read_json(cls, path: str | Path) -> "DetectionReport":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _resolve_token_sets(
    config: ChainConfig, registry: TokenRegistry
) -> tuple[frozenset[str], frozenset[str]]:
    if config.stablecoins is not None:
        stable = frozenset(config.stablecoins)
    else:
        stable = registry.stablecoins(config.chain_id)
    authentic = registry.authentic_tokens(config.chain_id) | stable
    return stable, authentic


def scan(
    events: Iterable[TransferEvent],
    config: ChainConfig,
    registry: TokenRegistry,
    prices: PriceTable,
) -> DetectionReport:
    """Single-pass detection over one chain's ordered transfer stream."""
    chain = config.chain_id
    m = config.window_blocks
    a_min = config.a_min
    b_min = config.b_min
    d_min = a_min + b_min
    tiny_cut = config.tiny_threshold_usd
    stable_set, auth_set = _resolve_token_sets(config, registry)

    decimals: dict[str, int | None] = {}
    for addr in auth_set:
        ref = registry.token(chain, addr)
        decimals[addr] = ref.decimals if ref is not None else None

    # windowed trigger state; anchors keep the first trigger per pair forever
    anchors: dict[str, dict[str, TransferEvent]] = {}
    active: dict[str, dict[str, tuple[int, int]]] = {}
    recent: deque[tuple[int, str, str]] = deque()
    watch: dict[str, set[str]] = {}

    poison_of: dict[str, str] = {}
    detail_ev: dict[str, TransferEvent] = {}
    usd_map: dict[str, Decimal | None] = {}
    ctx_map: dict[tuple[str, str, str], dict] = {}
    pair_ev: dict[tuple[str, str], list[tuple[tuple[int, int], str]]] = {}
    pair_seen: set[tuple[str, str, str]] = set()
    cands: dict[str, dict] = {}
    unpriced: list[str] = []
    unpriced_seen: set[str] = set()

    n_events = 0
    n_triggers = 0
    n_probes = 0
    n_near = 0
    n_direct = 0
    n_sibling = 0

    def priced(ev: TransferEvent) -> Decimal | None:
        key = ev.key
        if key in usd_map:
            return usd_map[key]
        dec = decimals.get(ev.token)
        price = prices.get_or_none(ev.token, event_date(ev.timestamp))
        usd = usd_amount(ev.value, dec, price) if dec is not None and price is not None else None
        usd_map[key] = usd
        return usd

    def mark_unpriced(key: str) -> None:
        if key not in unpriced_seen:
            unpriced_seen.add(key)
            unpriced.append(key)

    def collect(ev, victim, ref, look, label, a, b, sibling) -> None:
        nonlocal n_direct, n_sibling
        key = ev.key
        poison_of[key] = label
        detail_ev[key] = ev
        ckey = (victim, ref, look)
        ctx = ctx_map.get(ckey)
        if ctx is None:
            anchor = anchors[victim][ref]
            detail_ev.setdefault(anchor.key, anchor)
            ctx = ctx_map[ckey] = {
                "a": a,
                "b": b,
                "anchor": anchor,
                "evidence": {},
                "sibling": sibling,
            }
        if key not in ctx["evidence"]:
            ctx["evidence"][key] = ev.order
            if sibling:
                n_sibling += 1
            else:
                n_direct += 1
        pkey = (victim, look, key)
        if pkey not in pair_seen:
            pair_seen.add(pkey)
            pair_ev.setdefault((victim, look), []).append((ev.order, key))
        watch.setdefault(victim, set()).add(look)

    def add_candidate(ev, victim, look, ref, route1) -> None:
        key = ev.key
        cand = cands.get(key)
        if cand is None:
            cand = cands[key] = {
                "ev": ev,
                "victim": victim,
                "look": look,
                "refs": set(),
                "route1": False,
            }
            detail_ev[key] = ev
        if ref is not None:
            cand["refs"].add(ref)
        if route1:
            cand["route1"] = True

    def consider(ev, victim, look, ref, incoming, sibling) -> bool:
        """Score one candidate pair; returns True when a poisoning was
        collected directly (used for shared-transaction eligibility)."""
        nonlocal n_probes, n_near
        n_probes += 1
        sc = score(look, ref)
        a, b = sc.a, sc.b
        if a < a_min or b < b_min:
            if a + b >= d_min:
                n_near += 1
            return False
        if incoming:
            usd = priced(ev)
            if usd is None:
                mark_unpriced(ev.key)
                return False
            if 0 < usd < tiny_cut:
                collect(ev, victim, ref, look, Label.TINY, a, b, sibling)
                return not sibling
            return False
        if ev.token not in auth_set:
            collect(ev, victim, ref, look, Label.COUNTERFEIT, a, b, sibling)
            return not sibling
        if ev.value == 0:
            collect(ev, victim, ref, look, Label.ZERO, a, b, sibling)
            return not sibling
        add_candidate(ev, victim, look, ref, route1=True)
        return False

    tx_buf: list[TransferEvent] = []
    tx_direct = False

    def expand_tx() -> None:
        if len(tx_buf) > 1:
            for ev in tx_buf:
                blk = ev.block_number
                frm = ev.from_addr
                to = ev.to_addr
                full = anchors.get(frm)
                if full:
                    l2, l41 = to[2], to[41]
                    for ref, anchor in full.items():
                        if (
                            (ref[2] == l2 or ref[41] == l41)
                            and ref != to
                            and anchor.block_number < blk
                        ):
                            consider(ev, frm, to, ref, incoming=False, sibling=True)
                if ev.token in stable_set and ev.value > 0:
                    full = anchors.get(to)
                    if full:
                        l2, l41 = frm[2], frm[41]
                        for ref, anchor in full.items():
                            if (
                                (ref[2] == l2 or ref[41] == l41)
                                and ref != frm
                                and anchor.block_number < blk
                            ):
                                consider(ev, to, frm, ref, incoming=True, sibling=True)
                if ev.token in auth_set and ev.value > 0:
                    marks = watch.get(frm)
                    if marks is not None and to in marks:
                        pair = pair_ev.get((frm, to))
                        if pair and any(o < ev.order for o, _ in pair):
                            add_candidate(ev, frm, to, None, route1=False)

    last_block = -1
    last_li = -1
    cur_tx: str | None = None
    seen_tx: set[str] = set()
    bound0 = 0
    active_get = active.get
    anchors_get = anchors.get
    buf_append = tx_buf.append
    buf_clear = tx_buf.clear
    recent_append = recent.append
    recent_pop = recent.popleft

    for ev in events:
        blk = ev.block_number
        if ev.chain_id != chain:
            raise ConfigError(
                f"event chain_id {ev.chain_id} does not match configured chain {chain}"
            )
        li = ev.log_index
        txh = ev.tx_hash
        if blk == last_block:
            if li <= last_li:
                raise OrderingError(
                    f"log_index {li} not increasing within block {blk}"
                )
            if txh != cur_tx:
                if txh in seen_tx:
                    raise OrderingError(f"transaction {txh} is not contiguous")
                if tx_direct:
                    expand_tx()
                    tx_direct = False
                buf_clear()
                if cur_tx is not None:
                    seen_tx.add(cur_tx)
                cur_tx = txh
        else:
            if blk < last_block:
                raise OrderingError(
                    f"block {blk} after block {last_block} in scan input"
                )
            if tx_direct:
                expand_tx()
                tx_direct = False
            buf_clear()
            if cur_tx is not None:
                seen_tx.add(cur_tx)
            if txh in seen_tx:
                raise OrderingError(f"transaction {txh} is not contiguous")
            cur_tx = txh
            bound = blk - m - 1
            while recent and recent[0][0] < bound:
                nb, av, r = recent_pop()
                cur = av.get(r)
                if cur is not None:
                    if cur[0] == nb:
                        del av[r]
                    elif cur[1] == nb:
                        av[r] = (cur[0], -1)
            bound0 = bound if bound > 0 else 0
            last_block = blk
        last_li = li
        n_events += 1

        frm = ev.from_addr
        to = ev.to_addr
        val = ev.value
        tok = ev.token

        av_frm = active_get(frm)
        if av_frm:
            l2, l41 = to[2], to[41]
            for ref, lbs in av_frm.items():
                if (ref[2] == l2 or ref[41] == l41) and ref != to:
                    # pruning keeps lb1 inside the window, so only the
                    # same-block case needs the second trigger block
                    lb1 = lbs[0]
                    if lb1 < blk or (lb1 == blk and lbs[1] >= bound0):
                        if consider(ev, frm, to, ref, incoming=False, sibling=False):
                            tx_direct = True

        if val > 0 and tok in auth_set:
            if frm in watch and to in watch[frm]:
                add_candidate(ev, frm, to, None, route1=False)
            if tok in stable_set:
                av = active_get(to)
                if av:
                    l2, l41 = frm[2], frm[41]
                    for ref, lbs in av.items():
                        if (ref[2] == l2 or ref[41] == l41) and ref != frm:
                            lb1 = lbs[0]
                            if lb1 < blk or (lb1 == blk and lbs[1] >= bound0):
                                if consider(ev, to, frm, ref, incoming=True, sibling=False):
                                    tx_direct = True
                n_triggers += 1
                full = anchors_get(frm)
                if full is None:
                    anchors[frm] = full = {}
                if to not in full:
                    full[to] = ev
                if av_frm is None:
                    active[frm] = av_frm = {}
                cur = av_frm.get(to)
                if cur is None:
                    av_frm[to] = (blk, -1)
                    recent_append((blk, av_frm, to))
                elif cur[0] != blk:
                    av_frm[to] = (blk, cur[0])
                    recent_append((blk, av_frm, to))

        buf_append(ev)

    if tx_direct:
        expand_tx()
    tx_buf.clear()

    # ------------------------------------------------------------------
    # finalize

    labels: dict[str, str] = dict(poison_of)

    pair_refs: dict[tuple[str, str], set[str]] = {}
    for (victim, ref, look) in ctx_map:
        pair_refs.setdefault((victim, look), set()).add(ref)

    for ctx in ctx_map.values():
        anchor = ctx["anchor"]
        labels.setdefault(anchor.key, Label.INTENDED)

    payoff_rows: list[PayoffRecord] = []
    for key in sorted(cands, key=lambda k: detail_ev[k].order):
        cand = cands[key]
        ev = cand["ev"]
        victim = cand["victim"]
        look = cand["look"]
        refs = set(cand["refs"])
        refs.update(pair_refs.get((victim, look), ()))
        evidence = pair_ev.get((victim, look), [])
        if not cand["route1"] and not any(o < ev.order for o, _ in evidence):
            continue
        victim_anchors = anchors.get(victim, {})
        anchor_events = [victim_anchors[r] for r in refs if r in victim_anchors]
        anchor = min(anchor_events, key=lambda t: t.order) if anchor_events else None
        ev_order = ev.order
        picked: list[str] = []
        if anchor is not None:
            a_order = anchor.order
            picked = [k for (order, k) in evidence if a_order < order < ev_order]
            picked.sort(key=lambda k: detail_ev[k].order)
        confirmed = bool(picked)
        intended = None
        if refs:
            intended = max(sorted(refs), key=lambda r: positional_matches(look, r))
        usd = priced(ev)
        if usd is None:
            mark_unpriced(key)
        if anchor is not None:
            detail_ev.setdefault(anchor.key, anchor)
            labels.setdefault(anchor.key, Label.INTENDED)
        labels[key] = Label.PAYOFF_CONFIRMED if confirmed else Label.PAYOFF_UNCONFIRMED
        payoff_rows.append(
            PayoffRecord(
                key=key,
                victim=victim,
                lookalike=look,
                intended=intended,
                anchor_key=anchor.key if anchor is not None else None,
                anchor_block=anchor.block_number if anchor is not None else None,
                anchor_log_index=anchor.log_index if anchor is not None else None,
                block_number=ev.block_number,
                log_index=ev.log_index,
                token=ev.token,
                value=ev.value,
                usd=usd,
                confirmed=confirmed,
                via_history=False,
                evidence=tuple(picked),
            )
        )

    contexts: list[AttackContext] = []
    for (victim, ref, look) in sorted(ctx_map):
        ctx = ctx_map[(victim, ref, look)]
        anchor = ctx["anchor"]
        evidence = sorted(ctx["evidence"], key=lambda k: ctx["evidence"][k])
        contexts.append(
            AttackContext(
                victim=victim,
                intended=ref,
                lookalike=look,
                a=ctx["a"],
                b=ctx["b"],
                anchor_key=anchor.key,
                anchor_block=anchor.block_number,
                anchor_log_index=anchor.log_index,
                via_sibling=ctx["sibling"],
                evidence=tuple(evidence),
            )
        )

    victim_recipients: dict[str, int] = {}
    for (victim, _, _) in ctx_map:
        victim_recipients[victim] = len(anchors.get(victim, {}))
    for row in payoff_rows:
        victim_recipients.setdefault(row.victim, len(anchors.get(row.victim, {})))

    details: dict[str, EventDetail] = {}
    for key in set(labels) | {r.key for r in payoff_rows}:
        ev = detail_ev[key]
        usd = usd_map.get(key)
        if usd is None and key not in usd_map:
            label = labels.get(key)
            if label == Label.ZERO:
                usd = Decimal("0.000000")
            elif label == Label.COUNTERFEIT:
                usd = None
            else:
                usd = priced(ev)
        details[key] = EventDetail.from_event(ev, usd)

    label_counts: dict[str, int] = {}
    for lab in labels.values():
        label_counts[lab] = label_counts.get(lab, 0) + 1

    counters = {
        "events": n_events,
        "triggers": n_triggers,
        "probes": n_probes,
        "near_misses": n_near,
        "collected_direct": n_direct,
        "collected_sibling": n_sibling,
        "contexts": len(contexts),
        "victims": len(victim_recipients),
        "lookalikes": len(
            {c.lookalike for c in contexts} | {r.lookalike for r in payoff_rows}
        ),
        "tiny": label_counts.get(Label.TINY, 0),
        "zero_value": label_counts.get(Label.ZERO, 0),
        "counterfeit": label_counts.get(Label.COUNTERFEIT, 0),
        "intended": label_counts.get(Label.INTENDED, 0),
        "payoffs_confirmed": label_counts.get(Label.PAYOFF_CONFIRMED, 0),
        "payoffs_unconfirmed": label_counts.get(Label.PAYOFF_UNCONFIRMED, 0),
        "accidental": 0,
        "unpriced": len(unpriced),
        "excluded_victims": 0,
    }

    return DetectionReport(
        chain_id=chain,
        config=config,
        labels=labels,
        events=details,
        contexts=tuple(contexts),
        payoffs=tuple(payoff_rows),
        victim_recipients=victim_recipients,
        excluded_victims={},
        accidental=frozenset(),
        unpriced=tuple(unpriced),
        authentic_tokens=auth_set,
        counters=counters,
    )


def _recount_payoffs(report: DetectionReport) -> dict[str, int]:
    counters = dict(report.counters)
    counters["payoffs_confirmed"] = sum(
        1 for v in report.labels.values() if v == Label.PAYOFF_CONFIRMED
    )
    counters["payoffs_unconfirmed"] = sum(
        1 for v in report.labels.values() if v == Label.PAYOFF_UNCONFIRMED
    )
    counters["accidental"] = len(report.accidental)
    return counters


def confirm_payoffs(
    report: DetectionReport,
    full_history: EventStore | Sequence[TransferEvent] | None = None,
    *,
    registry: TokenRegistry | None = None,
    prices: PriceTable | None = None,
) -> DetectionReport:
    """Re-check unconfirmed payoffs against the victim's entire history.

    Without a history store this is the identity: scan already confirms
    payoffs from windowed evidence. With one, any authentic-token tiny
    transfer (not just stablecoins), zero-value transfer, or counterfeit
    transfer binding (victim, lookalike) strictly between the intended
    transfer and the payoff upgrades the payoff to confirmed.
    """
    if full_history is None:
        return report
    if registry is None or prices is None:
        raise ValueError("full-history confirmation needs registry and prices")
    store = (
        full_history
        if isinstance(full_history, EventStore)
        else EventStore(full_history)
    )
    chain = report.chain_id
    auth_set = report.authentic_tokens
    tiny_cut = report.config.tiny_threshold_usd

    labels = dict(report.labels)
    details = dict(report.events)
    unpriced = list(report.unpriced)
    unpriced_seen = set(unpriced)
    rows: list[PayoffRecord] = []
    for row in report.payoffs:
        if row.confirmed or row.anchor_key is None:
            rows.append(row)
            continue
        lo = (row.anchor_block, row.anchor_log_index)
        hi = (row.block_number, row.log_index)
        victim, look = row.victim, row.lookalike
        hits: list[TransferEvent] = []
        for h in store.involving(look):
            if not lo < h.order < hi:
                continue
            if h.from_addr == look and h.to_addr == victim:
                if h.token in auth_set and h.value > 0:
                    ref = registry.token(chain, h.token)
                    price = prices.get_or_none(h.token, event_date(h.timestamp))
                    if ref is None or price is None:
                        if h.key not in unpriced_seen:
                            unpriced_seen.add(h.key)
                            unpriced.append(h.key)
                        continue
                    usd = usd_amount(h.value, ref.decimals, price)
                    if 0 < usd < tiny_cut:
                        hits.append(h)
                        details.setdefault(h.key, EventDetail.from_event(h, usd))
            elif h.from_addr == victim and h.to_addr == look:
                if h.token not in auth_set:
                    hits.append(h)
                    details.setdefault(h.key, EventDetail.from_event(h, None))
                elif h.value == 0:
                    hits.append(h)
                    details.setdefault(h.key, EventDetail.from_event(h, Decimal("0.000000")))
        if hits:
            hits.sort(key=lambda e: e.order)
            row = replace(
                row,
                confirmed=True,
                via_history=True,
                evidence=tuple(e.key for e in hits),
            )
            labels[row.key] = Label.PAYOFF_CONFIRMED
        rows.append(row)

    out = replace(
        report,
        labels=labels,
        events=details,
        payoffs=tuple(rows),
        unpriced=tuple(unpriced),
    )
    counters = _recount_payoffs(out)
    counters["unpriced"] = len(out.unpriced)
    return replace(out, counters=counters)


def detect_accidental(
    report: DetectionReport, events: Iterable[TransferEvent]
) -> DetectionReport:
    """Flag unconfirmed payoffs that look like typos: the destination shares
    more than the configured positional bound with the intended address and
    never initiated an authentic positive-value transfer itself."""
    auth_set = report.authentic_tokens
    spenders: set[str] = set()
    for ev in events:
        if ev.value > 0 and ev.token in auth_set:
            spenders.add(ev.from_addr)
    bound = report.config.typo_match_bound
    labels = dict(report.labels)
    flagged: set[str] = set()
    rows: list[PayoffRecord] = []
    for row in report.payoffs:
        if (
            not row.confirmed
            and row.intended is not None
            and row.lookalike not in spenders
            and positional_matches(row.lookalike, row.intended) > bound
        ):
            row = replace(row, edit_distance=osa_distance(row.lookalike, row.intended))
            flagged.add(row.key)
            labels[row.key] = Label.ACCIDENTAL
        rows.append(row)
    out = replace(
        report,
        labels=labels,
        payoffs=tuple(rows),
        accidental=frozenset(flagged),
    )
    return replace(out, counters=_recount_payoffs(out))


def birthday_filter(report: DetectionReport, config: ChainConfig) -> DetectionReport:
    """Exclude victims whose counterparty count makes a coincidental
    lookalike collision likelier than the configured threshold."""
    digits = config.a_min + config.b_min
    excluded: dict[str, float] = {}
    for victim in sorted(report.victim_recipients):
        r = report.victim_recipients[victim]
        p = birthday_collision_prob(r, digits=digits)
        if p >= config.birthday_alpha:
            excluded[victim] = p
    counters = dict(report.counters)
    counters["excluded_victims"] = len(excluded)
    return replace(report, excluded_victims=excluded, counters=counters)


def sensitivity_run(
    events: Sequence[TransferEvent],
    configs: Iterable[ChainConfig],
    registry: TokenRegistry,
    prices: PriceTable,
) -> tuple[dict, ...]:
    """Scan the same stream under several configurations and tabulate the
    headline counts for each."""
    events = list(events)
    rows = []
    for config in configs:
        report = scan(events, config, registry, prices)
        c = report.counters
        rows.append(
            {
                "window_blocks": config.window_blocks,
                "a_min": config.a_min,
                "b_min": config.b_min,
                "tiny": c["tiny"],
                "zero_value": c["zero_value"],
                "counterfeit": c["counterfeit"],
                "poisonings": c["tiny"] + c["zero_value"] + c["counterfeit"],
                "lookalikes": c["lookalikes"],
                "victims": c["victims"],
                "payoffs_confirmed": c["payoffs_confirmed"],
                "payoffs_unconfirmed": c["payoffs_unconfirmed"],
            }
        )
    return tuple(rows)
