"""Stratified, seeded samplers for the three KG-derived datasets.

Triple classification mixes 50% real triples with two negative-sampling
strategies (25% each): entity corruption constrained to the source
endpoints' semantic groups, and relation replacement on same-group pairs.
Entity prediction re-emits real triples; link prediction draws random
walks that exclude synonym edges. All three honor a per-stratum plan
keyed by the head concept's canonical semantic group, and all draws come
from per-shard random streams derived from the plan seed, so shard
outputs can be generated in parallel and unioned deterministically.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple

from kgcorpus.graph import KnowledgeGraph, RelationType, Triple
from kgcorpus.util import largest_remainder, split_evenly, stable_seed

PROVENANCE_POSITIVE = "positive"
PROVENANCE_ENTITIES = "negative-strategy-entities"
PROVENANCE_RELATION = "negative-strategy-relation"

_PROVENANCES = (PROVENANCE_POSITIVE, PROVENANCE_ENTITIES, PROVENANCE_RELATION)


class SamplingError(RuntimeError):
    """Raised when a requested dataset cannot be drawn from the graph."""


class TcExample(NamedTuple):
    triple: Triple
    label: bool
    provenance: str
    #: The real triple a negative was derived from (None for positives);
    #: kept so group-preservation checks can audit every emitted example.
    source: Triple | None = None


class Path(NamedTuple):
    """Alternating concept/relation walk; relations never include synonymy."""

    concepts: tuple[str, ...]
    relations: tuple[RelationType, ...]

    @property
    def hops(self) -> int:
        return len(self.relations)


@dataclass
class SamplePlan:
    """Requested sizes plus per-stratum targets for each task.

    Stratum key is the canonical semantic group of a triple's head
    concept; targets are apportioned by largest remainder so they sum to
    the requested size exactly.
    """

    sizes: dict[str, int]
    strata: dict[str, dict[str, int]]
    seed: int
    max_attempts: int = 64
    group_match_intersection: bool = False


@dataclass
class SampleReport:
    """Accounting for one sampler run (aggregated over shards)."""

    requested: int = 0
    emitted: int = 0
    duplicates: int = 0
    stratum_failures: int = 0
    reallocated: int = 0
    provenance_fallbacks: int = 0
    discarded_walks: int = 0
    realized_strata: dict[str, int] = field(default_factory=dict)
    realized_provenance: dict[str, int] = field(default_factory=dict)

    def _bump(self, mapping: dict[str, int], key: str, n: int = 1) -> None:
        mapping[key] = mapping.get(key, 0) + n

    def merge(self, other: "SampleReport") -> None:
        self.requested += other.requested
        self.emitted += other.emitted
        self.duplicates += other.duplicates
        self.stratum_failures += other.stratum_failures
        self.reallocated += other.reallocated
        self.provenance_fallbacks += other.provenance_fallbacks
        self.discarded_walks += other.discarded_walks
        for key, n in other.realized_strata.items():
            self._bump(self.realized_strata, key, n)
        for key, n in other.realized_provenance.items():
            self._bump(self.realized_provenance, key, n)

    def as_dict(self) -> dict[str, object]:
        return {
            "requested": self.requested,
            "emitted": self.emitted,
            "duplicates": self.duplicates,
            "stratum_failures": self.stratum_failures,
            "reallocated": self.reallocated,
            "provenance_fallbacks": self.provenance_fallbacks,
            "discarded_walks": self.discarded_walks,
            "realized_strata": dict(sorted(self.realized_strata.items())),
            "realized_provenance": dict(sorted(self.realized_provenance.items())),
        }


def composition_counts(total: int) -> dict[str, int]:
    """Split a TC request into 50/25/25 by provenance, each within 1 of target."""
    positives = (total + 1) // 2
    rest = total - positives
    entities = (rest + 1) // 2
    return {
        PROVENANCE_POSITIVE: positives,
        PROVENANCE_ENTITIES: entities,
        PROVENANCE_RELATION: rest - entities,
    }


def plan_strata(
    kg: KnowledgeGraph,
    sizes: dict[str, int],
    seed: int = 0,
    max_attempts: int = 64,
    group_match_intersection: bool = False,
) -> SamplePlan:
    """Build per-task stratum targets proportional to group triple shares.

    Self-loop edges are excluded from the shares (they are excluded from
    every sampling pool). A requested size of 0 yields empty targets for
    that task.
    """
    if not kg.frozen:
        raise SamplingError("plan_strata requires a frozen graph")
    shares: dict[str, float] = {}
    for triple in kg.edges:
        if triple.head == triple.tail:
            continue
        group = kg.canonical_group(triple.head)
        shares[group] = shares.get(group, 0.0) + 1.0
    strata: dict[str, dict[str, int]] = {}
    for task, size in sizes.items():
        if size < 0:
            raise SamplingError(f"requested size for {task} is negative")
        if size == 0:
            strata[task] = {}
            continue
        if not shares:
            raise SamplingError("graph has no usable (non-self-loop) triples")
        strata[task] = largest_remainder(size, shares)
    return SamplePlan(
        sizes=dict(sizes),
        strata=strata,
        seed=seed,
        max_attempts=max_attempts,
        group_match_intersection=group_match_intersection,
    )


class _Pools:
    """Sampling pools derived from a frozen graph; self-loops excluded."""

    def __init__(self, kg: KnowledgeGraph, intersection: bool) -> None:
        self.kg = kg
        self.by_stratum: dict[str, list[Triple]] = {}
        self.diff_group: dict[str, list[Triple]] = {}
        self.same_group: dict[str, list[Triple]] = {}
        self.start: dict[str, list[Triple]] = {}
        self.nonsyn_out: dict[str, list[Triple]] = {}
        self.canonical_members: dict[str, list[str]] = {}
        for cui in sorted(kg.concepts):
            self.canonical_members.setdefault(kg.canonical_group(cui), []).append(cui)
        for triple in kg.edges:
            if triple.head == triple.tail:
                continue
            head_concept = kg.concepts[triple.head]
            tail_concept = kg.concepts[triple.tail]
            group = head_concept.canonical_group
            self.by_stratum.setdefault(group, []).append(triple)
            if intersection:
                same = bool(set(head_concept.groups) & set(tail_concept.groups))
            else:
                same = head_concept.canonical_group == tail_concept.canonical_group
            bucket = self.same_group if same else self.diff_group
            bucket.setdefault(group, []).append(triple)
            if triple.relation is not RelationType.SYNONYM:
                self.start.setdefault(group, []).append(triple)
                self.nonsyn_out.setdefault(triple.head, []).append(triple)


def _choice(rng: random.Random, pool: list) -> object:
    return pool[rng.randrange(len(pool))]


def _allocate_cells(
    targets: dict[str, int], plan_targets: dict[str, int]
) -> dict[str, dict[str, int]]:
    """Distribute per-provenance counts over strata, following plan shares."""
    weights = {g: float(n) for g, n in plan_targets.items() if n > 0}
    return {
        provenance: largest_remainder(count, weights) if weights else {}
        for provenance, count in targets.items()
    }


def _shard_rng(seed: int, task: str, shard: int) -> random.Random:
    return random.Random(stable_seed(seed, task, shard))


# -- triple classification ---------------------------------------------


def _draw_positive(pools: _Pools, group: str, rng: random.Random) -> TcExample | None:
    pool = pools.by_stratum.get(group)
    if not pool:
        return None
    return TcExample(_choice(rng, pool), True, PROVENANCE_POSITIVE)


def _draw_entities_negative(
    pools: _Pools, group: str, rng: random.Random, max_attempts: int
) -> TcExample | None:
    """Corrupt both endpoints of a cross-group triple, preserving groups.

    The corrupted triple must be absent from the graph; after exhausting
    replacement attempts the source triple is redrawn.
    """
    pool = pools.diff_group.get(group)
    if not pool:
        return None
    kg = pools.kg
    for _ in range(max_attempts):
        source = _choice(rng, pool)
        head_group = kg.canonical_group(source.head)
        tail_group = kg.canonical_group(source.tail)
        head_pool = pools.canonical_members.get(head_group, [])
        tail_pool = pools.canonical_members.get(tail_group, [])
        if not head_pool or not tail_pool:
            return None
        for _ in range(max_attempts):
            new_head = _choice(rng, head_pool)
            new_tail = _choice(rng, tail_pool)
            if new_head == new_tail:
                continue
            candidate = Triple(new_head, source.relation, new_tail)
            if not kg.contains(candidate):
                return TcExample(candidate, False, PROVENANCE_ENTITIES, source)
    return None


def _draw_relation_negative(
    pools: _Pools, group: str, rng: random.Random, max_attempts: int
) -> TcExample | None:
    """Swap the relation of a same-group triple for one absent from the graph."""
    pool = pools.same_group.get(group)
    if not pool:
        return None
    kg = pools.kg
    alternatives = list(RelationType)
    for _ in range(max_attempts):
        source = _choice(rng, pool)
        candidates = [r for r in alternatives if r is not source.relation]
        rng.shuffle(candidates)
        for relation in candidates:
            candidate = Triple(source.head, relation, source.tail)
            if not kg.contains(candidate):
                return TcExample(candidate, False, PROVENANCE_RELATION, source)
    return None


_TC_DRAWERS = {
    PROVENANCE_POSITIVE: _draw_positive,
    PROVENANCE_ENTITIES: _draw_entities_negative,
    PROVENANCE_RELATION: _draw_relation_negative,
}

# Order in which an unfillable provenance quota falls back to others.
_FALLBACK_ORDER = {
    PROVENANCE_ENTITIES: (PROVENANCE_RELATION, PROVENANCE_POSITIVE),
    PROVENANCE_RELATION: (PROVENANCE_ENTITIES, PROVENANCE_POSITIVE),
    PROVENANCE_POSITIVE: (PROVENANCE_ENTITIES, PROVENANCE_RELATION),
}


def _draw_tc(
    pools: _Pools,
    provenance: str,
    group: str,
    rng: random.Random,
    max_attempts: int,
) -> TcExample | None:
    drawer = _TC_DRAWERS[provenance]
    if provenance == PROVENANCE_POSITIVE:
        return drawer(pools, group, rng)
    return drawer(pools, group, rng, max_attempts)


def _sample_tc_shard(
    pools: _Pools,
    plan: SamplePlan,
    cells: dict[str, dict[str, int]],
    shard: int,
    shards: int,
) -> tuple[list[TcExample], SampleReport]:
    rng = _shard_rng(plan.seed, "tc", shard)
    report = SampleReport()
    out: list[TcExample] = []
    seen: set[tuple[Triple, bool]] = set()
    deficits: dict[str, int] = {p: 0 for p in _PROVENANCES}
    strata = sorted({g for targets in cells.values() for g in targets})

    def emit(example: TcExample, group: str) -> None:
        key = (example.triple, example.label)
        if key in seen:
            report.duplicates += 1
        else:
            seen.add(key)
        report.emitted += 1
        report._bump(report.realized_strata, group)
        report._bump(report.realized_provenance, example.provenance)
        out.append(example)

    for group in strata:
        for provenance in _PROVENANCES:
            target = split_evenly(cells[provenance].get(group, 0), shards)[shard]
            report.requested += target
            misses = 0
            produced = 0
            while produced < target:
                example = _draw_tc(pools, provenance, group, rng, plan.max_attempts)
                if example is None:
                    misses += 1
                    if misses >= 3:  # stratum-level failure: hand rest to other strata
                        report.stratum_failures += 1
                        deficits[provenance] += target - produced
                        break
                    continue
                misses = 0
                emit(example, group)
                produced += 1

    # Reallocate deficits to other strata, round-robin over those still able.
    for provenance in _PROVENANCES:
        remaining = deficits[provenance]
        if not remaining:
            continue
        candidates = list(strata)
        while remaining and candidates:
            progressed = False
            for group in list(candidates):
                if not remaining:
                    break
                example = _draw_tc(pools, provenance, group, rng, plan.max_attempts)
                if example is None:
                    candidates.remove(group)
                    continue
                emit(example, group)
                report.reallocated += 1
                remaining -= 1
                progressed = True
            if not progressed:
                break
        deficits[provenance] = remaining

    # Last resort: fill from other provenances so the output size contract
    # holds even on graphs where a strategy is impossible everywhere.
    for provenance in _PROVENANCES:
        remaining = deficits[provenance]
        if not remaining:
            continue
        for fallback in _FALLBACK_ORDER[provenance]:
            while remaining:
                filled = False
                for group in strata:
                    if not remaining:
                        break
                    example = _draw_tc(pools, fallback, group, rng, plan.max_attempts)
                    if example is None:
                        continue
                    emit(example, group)
                    report.provenance_fallbacks += 1
                    remaining -= 1
                    filled = True
                if not filled:
                    break
            if not remaining:
                break
        if remaining:
            raise SamplingError(
                f"could not draw {remaining} triple-classification examples "
                f"for provenance {provenance}"
            )
    return out, report


def sample_tc(
    kg: KnowledgeGraph, plan: SamplePlan, shards: int = 1, shard: int | None = None
) -> tuple[list[TcExample], SampleReport]:
    """Draw the triple-classification dataset under the stratum plan.

    Returns exactly plan.sizes["tc"] examples with 50/25/25 provenance
    composition (within 1 of each target when the graph permits it) and
    every negative verified absent from the graph. With shards > 1, each
    shard draws from its own random stream seeded by hash(seed, shard);
    passing `shard` restricts output to that shard, and the multiset
    union over all shards equals the single-stream output.
    """
    total = plan.sizes.get("tc", 0)
    report = SampleReport()
    if total == 0:
        return [], report
    pools = _Pools(kg, plan.group_match_intersection)
    cells = _allocate_cells(composition_counts(total), plan.strata["tc"])
    out: list[TcExample] = []
    for index in range(shards) if shard is None else [shard]:
        examples, shard_report = _sample_tc_shard(pools, plan, cells, index, shards)
        out.extend(examples)
        report.merge(shard_report)
    return out, report


# -- entity prediction ---------------------------------------------------


def _shuffled_cycle(pool: list[Triple], count: int, rng: random.Random) -> tuple[list[Triple], int]:
    """Draw `count` items; duplicates appear only after the pool is exhausted."""
    out: list[Triple] = []
    duplicates = 0
    while len(out) < count:
        perm = pool[:]
        rng.shuffle(perm)
        take = min(count - len(out), len(perm))
        if out:  # anything beyond the first pass is a repeat
            duplicates += take
        out.extend(perm[:take])
    return out, duplicates


def sample_ep(
    kg: KnowledgeGraph, plan: SamplePlan, shards: int = 1, shard: int | None = None
) -> tuple[list[Triple], SampleReport]:
    """Draw real triples for entity prediction under the stratum plan.

    Within a shard's stratum, duplicates are permitted only once the
    stratum's distinct triples are exhausted.
    """
    total = plan.sizes.get("ep", 0)
    report = SampleReport()
    if total == 0:
        return [], report
    pools = _Pools(kg, plan.group_match_intersection)
    targets = plan.strata["ep"]
    out: list[Triple] = []
    for index in range(shards) if shard is None else [shard]:
        rng = _shard_rng(plan.seed, "ep", index)
        deficit = 0
        for group in sorted(targets):
            count = split_evenly(targets[group], shards)[index]
            report.requested += count
            pool = pools.by_stratum.get(group)
            if not pool:
                report.stratum_failures += 1
                deficit += count
                continue
            drawn, duplicates = _shuffled_cycle(pool, count, rng)
            out.extend(drawn)
            report.duplicates += duplicates
            report.emitted += count
            report._bump(report.realized_strata, group, count)
        if deficit:
            fallback_groups = [g for g in sorted(targets) if pools.by_stratum.get(g)]
            if not fallback_groups:
                raise SamplingError("no stratum has usable triples for entity prediction")
            extra = largest_remainder(deficit, {g: 1.0 for g in fallback_groups})
            for group, count in extra.items():
                if not count:
                    continue
                drawn, duplicates = _shuffled_cycle(pools.by_stratum[group], count, rng)
                out.extend(drawn)
                report.duplicates += duplicates
                report.emitted += count
                report.reallocated += count
                report._bump(report.realized_strata, group, count)
    return out, report


# -- link prediction paths ------------------------------------------------


def _walk(
    pools: _Pools, start: Triple, target_hops: int, rng: random.Random
) -> Path | None:
    hops = [start]
    current = start.tail
    while len(hops) < target_hops:
        options = pools.nonsyn_out.get(current)
        if not options:
            break
        step = _choice(rng, options)
        hops.append(step)
        current = step.tail
    if len(hops) < 2:
        return None
    return Path(
        concepts=(hops[0].head, *(h.tail for h in hops)),
        relations=tuple(h.relation for h in hops),
    )


def sample_paths(
    kg: KnowledgeGraph,
    plan: SamplePlan,
    max_hops: int = 4,
    shards: int = 1,
    shard: int | None = None,
) -> tuple[list[Path], SampleReport]:
    """Draw link-prediction paths: stratified start, uniform non-synonym walk.

    Each path starts from a stratified non-synonym triple and extends from
    the current tail via uniformly chosen non-synonym outgoing edges until
    a target length drawn uniformly from [2, max_hops] or a dead end;
    walks shorter than 2 hops are discarded and redrawn.
    """
    total = plan.sizes.get("lp", 0)
    report = SampleReport()
    if total == 0:
        return [], report
    if max_hops < 2:
        raise SamplingError("max_hops must be at least 2")
    pools = _Pools(kg, plan.group_match_intersection)
    targets = plan.strata["lp"]
    out: list[Path] = []

    def draw_for_group(group: str, rng: random.Random) -> Path | None:
        pool = pools.start.get(group)
        if not pool:
            return None
        for _ in range(plan.max_attempts):
            target_hops = rng.randint(2, max_hops)
            path = _walk(pools, _choice(rng, pool), target_hops, rng)
            if path is not None:
                return path
            report.discarded_walks += 1
        return None

    for index in range(shards) if shard is None else [shard]:
        rng = _shard_rng(plan.seed, "lp", index)
        deficit = 0
        for group in sorted(targets):
            count = split_evenly(targets[group], shards)[index]
            report.requested += count
            produced = 0
            while produced < count:
                path = draw_for_group(group, rng)
                if path is None:
                    report.stratum_failures += 1
                    deficit += count - produced
                    break
                out.append(path)
                report.emitted += 1
                report._bump(report.realized_strata, group)
                produced += 1
        if deficit:
            candidates = sorted(targets)
            while deficit and candidates:
                progressed = False
                for group in list(candidates):
                    if not deficit:
                        break
                    path = draw_for_group(group, rng)
                    if path is None:
                        candidates.remove(group)
                        continue
                    out.append(path)
                    report.emitted += 1
                    report.reallocated += 1
                    report._bump(report.realized_strata, group)
                    deficit -= 1
                    progressed = True
                if not progressed:
                    break
            if deficit:
                raise SamplingError(
                    "graph has no non-synonym 2-hop path; cannot build the path dataset"
                )
    return out, report
