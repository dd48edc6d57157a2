"""Desk-scale simulator of the staged provability-enumerator constructions:
mock theory streams, tautological consequence, implication-chain
reachability, the X/Y sets, the h trigger machines and g output schedules
(three variants), the witness-comparison predicate on traces, and checkers
for the trace-level claim analogs.

Variants:
  H0G0  plain predicate; after the switch the tail emits xi_t unless its
        negation landed in X u Y (or everything, at a box-bot world).
  H1G1  witness-comparison predicate; after the switch: X ascending, then
        Y in descending code order, then the full xi tail.
  HG2   trigger watches only "~S(j) is a t.c."; after the switch: X u Y,
        then for every t and s < m the position m+k+mt+s carries the
        (m-s-1)-fold negation of xi_t.

Self-reference is staged away: prg<c> / prgr<c> atoms are opaque in all
tautological-consequence checks and are only read against the finished
trace by the claim checkers.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional

from . import decide as decide_mod
from . import semantics
from .syntax import (
    BOT,
    TOP,
    CapacityError,
    Formula,
    Imp,
    Var,
    box,
    code,
    decode,
    formula_at,
    formula_index,
    imp,
    is_tautology,
    neg,
    parse,
    render,
    strip_negs,
    var,
)


class SimError(ValueError):
    pass


class InsufficientHorizon(SimError):
    pass


class Variant(Enum):
    H0G0 = "H0G0"
    H1G1 = "H1G1"
    HG2 = "HG2"


VARIANT_LOGIC = {
    Variant.H0G0: decide_mod.Logic.MN,
    Variant.H1G1: decide_mod.Logic.MNP,
    Variant.HG2: decide_mod.Logic.MND,
}

VARIANT_FRAME_PROPERTIES = {
    Variant.H0G0: (),
    Variant.H1G1: ("P",),
    Variant.HG2: ("D",),
}


def s_atom(j: int) -> Formula:
    if j < 1:
        raise SimError("s-atoms are indexed from 1")
    return var(f"s{j}")


def s_index(f: Formula) -> Optional[int]:
    if isinstance(f, Var) and f.name.startswith("s") and f.name[1:].isdigit():
        tail = f.name[1:]
        if tail and tail[0] != "0":
            return int(tail)
    return None


def pr_atom(f: Formula, rosser: bool) -> Formula:
    return var(("prgr" if rosser else "prg") + str(code(f)))


def pr_reference(f: Formula) -> Optional[tuple[bool, Optional[Formula]]]:
    """(is_rosser, referenced formula) when f is a prg/prgr atom."""
    if not isinstance(f, Var):
        return None
    name = f.name
    for stem, rosser in (("prgr", True), ("prg", False)):
        if name.startswith(stem) and name[len(stem) :].isdigit():
            digits = name[len(stem) :]
            if digits == "0" or digits[0] != "0":
                return rosser, decode(int(digits))
    return None


# ---------------------------------------------------------------------------
# Theory streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoryStream:
    """Replayable mock proof stream: at most one proved formula per stage."""

    events: tuple[tuple[int, Formula], ...]

    def __post_init__(self):
        stages = [s for s, _ in self.events]
        if stages != sorted(stages) or len(set(stages)) != len(stages):
            raise SimError("events must be stage-sorted, one per stage")
        if stages and stages[0] < 0:
            raise SimError("negative stage")

    def event_at(self, stage: int) -> Optional[Formula]:
        for s, f in self.events:
            if s == stage:
                return f
            if s > stage:
                return None
        return None

    def pool_at(self, stage: int) -> tuple[Formula, ...]:
        """P_{T,m}: everything proved at stages <= m."""
        return tuple(f for s, f in self.events if s <= stage)

    def version_at(self, stage: int) -> int:
        return sum(1 for s, _ in self.events if s <= stage)


def stream_from_events(events: Iterable[tuple[int, Formula]]) -> TheoryStream:
    return TheoryStream(tuple(sorted(events)))


# ---------------------------------------------------------------------------
# Model registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelRegistry:
    """Finite prefix of the countermodel enumeration: pairwise-disjoint
    world ids from 1 upward, each world carrying its model's satisfaction."""

    models: tuple[semantics.MNModel, ...]
    ids: tuple[tuple[int, ...], ...]  # global ids per model, in world order

    def __post_init__(self):
        seen: set[int] = set()
        for model, ids in zip(self.models, self.ids):
            if len(ids) != len(model.frame.worlds):
                raise SimError("one global id per world required")
            for j in ids:
                if j < 1 or j in seen:
                    raise SimError("world ids must be unique and nonzero")
                seen.add(j)

    @property
    def world_ids(self) -> tuple[int, ...]:
        return tuple(sorted(j for ids in self.ids for j in ids))

    def locate(self, j: int) -> tuple[int, int]:
        for mi, ids in enumerate(self.ids):
            if j in ids:
                return mi, ids.index(j)
        raise SimError(f"world {j} is not in the registry")

    def model_of(self, j: int) -> tuple[semantics.MNModel, int]:
        mi, li = self.locate(j)
        return self.models[mi], li

    def neighborhood_ids(self, j: int) -> tuple[tuple[int, ...], ...]:
        """Minimal neighborhoods of j as tuples of global ids."""
        model, li = self.model_of(j)
        mi = self.locate(j)[0]
        ids = self.ids[mi]
        out = []
        for mask in model.frame.minimal_neighborhoods(li):
            out.append(tuple(ids[x] for x in range(len(ids)) if mask >> x & 1))
        return tuple(out)

    def validate_for(self, variant: Variant) -> None:
        for prop in VARIANT_FRAME_PROPERTIES[variant]:
            for model in self.models:
                if not semantics.frame_property(model.frame, prop):
                    raise SimError(
                        f"registry model violates the {prop} frame property "
                        f"required by {variant.value}"
                    )


def registry_from_models(models: Iterable[semantics.MNModel]) -> ModelRegistry:
    models = tuple(models)
    ids = []
    next_id = 1
    renamed = []
    for m in models:
        n = len(m.frame.worlds)
        gids = tuple(range(next_id, next_id + n))
        next_id += n
        frame = semantics.MNFrame(
            tuple(str(j) for j in gids), m.frame.kind, m.frame.rows
        )
        renamed.append(semantics.MNModel(frame, m.valuation))
        ids.append(gids)
    return ModelRegistry(tuple(renamed), tuple(ids))


_default_registry_cache: dict[tuple[Variant, int], ModelRegistry] = {}


def default_registry(variant: Variant, count: int = 8) -> ModelRegistry:
    """Registry harvested from the decision procedure: countermodels of the
    first `count` unprovable formulas of the variant's logic."""
    key = (variant, count)
    got = _default_registry_cache.get(key)
    if got is not None:
        return got
    logic = VARIANT_LOGIC[variant]
    models = []
    t = 0
    while len(models) < count:
        f = formula_at(t)
        t += 1
        if f.size > 6:
            continue
        cert = decide_mod.decide(logic, f)
        if cert.verdict != decide_mod.UNPROVABLE:
            continue
        m, _ = cert.countermodel  # type: ignore[misc]
        models.append(
            semantics.MNModel(semantics.to_antichain(m.frame), m.valuation)
        )
    registry = registry_from_models(models)
    registry.validate_for(variant)
    _default_registry_cache[key] = registry
    return registry


# ---------------------------------------------------------------------------
# Tautological consequence and implication-chain reachability
# ---------------------------------------------------------------------------

def _conjunction(pool: tuple[Formula, ...]) -> Formula:
    if not pool:
        return TOP
    acc = pool[0]
    for f in pool[1:]:
        acc = neg(imp(acc, neg(f)))
    return acc


_tc_cache: dict[tuple, bool] = {}


def is_tc(pool: Iterable[Formula], f: Formula) -> bool:
    """f is a tautological consequence of the pool (boxes and indexed atoms
    opaque; empty pool behaves as the true constant)."""
    pool = tuple(pool)
    key = (pool, f)
    got = _tc_cache.get(key)
    if got is None:
        got = is_tautology(imp(_conjunction(pool), f))
        _tc_cache[key] = got
    return got


def leads_to(pool: Iterable[Formula], f: Formula, r: Formula) -> bool:
    """Chain reachability: a sequence f = x0, ..., xk = r with each
    implication x_i -> x_{i+1} present verbatim in the pool (k = 0 allowed)."""
    return r in reachable_from(tuple(pool), (f,))


def reachable_from(pool: tuple[Formula, ...], sources: Iterable[Formula]) -> set[Formula]:
    edges: dict[Formula, list[Formula]] = {}
    for psi in pool:
        if isinstance(psi, Imp):
            edges.setdefault(psi.left, []).append(psi.right)
    seen: set[Formula] = set()
    frontier = list(sources)
    while frontier:
        x = frontier.pop()
        if x in seen:
            continue
        seen.add(x)
        frontier.extend(edges.get(x, ()))
    return seen


# ---------------------------------------------------------------------------
# X and Y sets
# ---------------------------------------------------------------------------

def x_set(pool: tuple[Formula, ...], m: int) -> frozenset[Formula]:
    """X_m: formulas with code <= m chain-reachable from a pool member."""
    if m < 0:
        return frozenset()
    reach = reachable_from(pool, pool)
    return frozenset(f for f in reach if code(f) <= m)


def _world_reach(pool: tuple[Formula, ...], j: int) -> set[Formula]:
    return reachable_from(pool, (s_atom(j),))


def y_set_universal(
    pool: tuple[Formula, ...], m: int, registry: ModelRegistry, j: int
) -> frozenset[Formula]:
    """Y_{j,m}: formulas with code <= m reached from S(l) for every l in
    some neighborhood of j (checked on minimal neighborhoods)."""
    if m < 0:
        return frozenset()
    out: set[Formula] = set()
    for v_ids in registry.neighborhood_ids(j):
        common: Optional[set[Formula]] = None
        for l in v_ids:
            r = _world_reach(pool, l)
            common = r if common is None else common & r
            if not common:
                break
        if common:
            out.update(common)
    return frozenset(f for f in out if code(f) <= m)


def y_set_choice(
    pool: tuple[Formula, ...], m: int, registry: ModelRegistry, i: int
) -> frozenset[Formula]:
    """The choice-function Y: formulas reached from S(c(U)) for all related
    U under some choice function, which is equivalent to: every minimal
    neighborhood contains a world whose S-atom reaches the formula."""
    if m < 0:
        return frozenset()
    neighborhoods = registry.neighborhood_ids(i)
    if not neighborhoods:
        raise SimError(
            f"world {i} has no neighborhoods; the choice-function Y set "
            "degenerates (registry must satisfy the D property)"
        )
    common: Optional[set[Formula]] = None
    for v_ids in neighborhoods:
        union: set[Formula] = set()
        for l in v_ids:
            union |= _world_reach(pool, l)
        common = union if common is None else common & union
        if not common:
            return frozenset()
    assert common is not None
    return frozenset(f for f in common if code(f) <= m)


def compute_xy(
    variant: Variant,
    stream: TheoryStream,
    registry: ModelRegistry,
    m: int,
    i: int,
) -> tuple[frozenset[Formula], frozenset[Formula]]:
    """The (X, Y) pair at index m for target world i.  Callers pass the
    paper's index: the triggers use the current stage, the output schedules
    use switch-1."""
    pool = stream.pool_at(m) if m >= 0 else ()
    x = x_set(pool, m)
    if variant is Variant.HG2:
        return x, y_set_choice(pool, m, registry, i)
    return x, y_set_universal(pool, m, registry, i)


def enumerate_choice_functions(
    n: int, cap: int = 1_000_000
) -> list[dict[int, int]]:
    """All choice functions on the nonempty subsets of an n-world set,
    as maps mask -> chosen world index.  Worlds beyond 6 (or a blown
    product cap) must use sample_choice_functions instead."""
    if n > 6:
        raise CapacityError("choice-function enumeration capped at 6 worlds")
    total = 1
    masks = list(range(1, 1 << n))
    for v in masks:
        total *= bin(v).count("1")
        if total > cap:
            raise CapacityError("choice-function count exceeds cap")
    out: list[dict[int, int]] = [{}]
    for v in masks:
        members = [x for x in range(n) if v >> x & 1]
        out = [dict(c, **{v: x}) for c in out for x in members]
    return out


def sample_choice_functions(n: int, count: int, seed: int = 0) -> list[dict[int, int]]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        c = {}
        for v in range(1, 1 << n):
            members = [x for x in range(n) if v >> x & 1]
            c[v] = rng.choice(members)
        out.append(c)
    return out


def y_set_choice_oracle(
    pool: tuple[Formula, ...], m: int, registry: ModelRegistry, i: int
) -> frozenset[Formula]:
    """Literal choice-function Y, by enumerating every choice function and
    every related subset; test oracle for y_set_choice."""
    if m < 0:
        return frozenset()
    model, li = registry.model_of(i)
    mi = registry.locate(i)[0]
    ids = registry.ids[mi]
    n = len(ids)
    related = [v for v in range(1, 1 << n) if model.frame.relates(li, v)]
    reach = {l: _world_reach(pool, l) for l in ids}
    candidates = set()
    for r in reach.values():
        candidates |= r
    out = set()
    for f in candidates:
        if code(f) > m:
            continue
        for c in enumerate_choice_functions(n):
            if all(f in reach[ids[c[v]]] for v in related):
                out.add(f)
                break
    return frozenset(out)


# ---------------------------------------------------------------------------
# The h machines
# ---------------------------------------------------------------------------

class _TriggerTables:
    """Per-pool-version trigger data for one (variant, stream, registry).

    For a fixed pool the trigger condition at stage m reduces to:
      - disjunct 1 (all variants): ~S(j) is a t.c. of the pool;
      - disjunct 2 (H0G0 with prg atoms, H1G1 with prgr atoms): some
        referenced formula phi has S(j) -> ~PR(phi) as a t.c., ~phi is not
        chain-reachable into X u Y_j, and m >= code(~phi).
    """

    def __init__(self, variant: Variant, stream: TheoryStream, registry: ModelRegistry):
        self.variant = variant
        self.stream = stream
        self.registry = registry
        self.cache: dict[tuple[Formula, ...], dict] = {}

    def tables_for(self, pool: tuple[Formula, ...]) -> dict:
        got = self.cache.get(pool)
        if got is not None:
            return got
        registry_ids = self.registry.world_ids
        d1 = {}
        for j in registry_ids:
            d1[j] = is_tc(pool, neg(s_atom(j)))
        # s-atoms mentioned beyond the registry: the paper's unbounded scan
        # could fire there; we log the divergence instead of following it.
        mentioned = set()
        for psi in pool:
            for atom in _formula_atoms(psi):
                sj = s_index(atom)
                if sj is not None and sj not in registry_ids:
                    mentioned.add(sj)
        beyond = sorted(j for j in mentioned if is_tc(pool, neg(s_atom(j))))
        d2: dict[int, int] = {}
        want_rosser = self.variant is Variant.H1G1
        if self.variant in (Variant.H0G0, Variant.H1G1):
            refs = []
            for psi in pool:
                for atom in _formula_atoms(psi):
                    ref = pr_reference(atom)
                    if ref is not None and ref[0] == want_rosser and ref[1] is not None:
                        refs.append((atom, ref[1]))
            for j in registry_ids:
                best: Optional[int] = None
                for atom, phi in refs:
                    if not is_tc(pool, imp(s_atom(j), neg(atom))):
                        continue
                    nphi = neg(phi)
                    if nphi in reachable_from(pool, pool):
                        continue
                    if nphi in y_set_universal(pool, code(nphi), self.registry, j):
                        continue
                    c = code(nphi)
                    if best is None or c < best:
                        best = c
                if best is not None:
                    d2[j] = best
        tables = {"sat": _pool_satisfiable(pool), "d1": d1, "d2": d2, "beyond": beyond}
        self.cache[pool] = tables
        return tables

    def fire_at(self, m: int) -> tuple[Optional[int], Optional[str]]:
        """(winning j, divergence note) for a trigger evaluated at stage m."""
        pool = self.stream.pool_at(m)
        t = self.tables_for(pool)
        winner = None
        for j in self.registry.world_ids:
            if t["d1"][j] or t["d2"].get(j, m + 1) <= m:
                winner = j
                break
        note = None
        if t["beyond"]:
            j2 = t["beyond"][0]
            if winner is None or j2 < winner:
                note = (
                    f"stage {m}: ~s{j2} is a t.c. but {j2} is outside the "
                    "registry; the unbounded construction would jump there"
                )
        return winner, note

    def fire_in_interval(self, start: int, end: Optional[int]) -> tuple[Optional[int], Optional[int], Optional[str]]:
        """(stage, j, divergence) for the first trigger with the pool fixed
        at its value from `start`, searching stages [start, end)."""
        pool = self.stream.pool_at(start)
        t = self.tables_for(pool)
        best_stage: Optional[int] = None
        best_j: Optional[int] = None
        for j in self.registry.world_ids:
            stage: Optional[int] = None
            if t["d1"][j]:
                stage = start
            elif j in t["d2"]:
                stage = max(start, t["d2"][j])
            if stage is None or (end is not None and stage >= end):
                continue
            if best_stage is None or stage < best_stage or (stage == best_stage and j < best_j):
                best_stage, best_j = stage, j
        note = None
        if t["beyond"] and (best_stage is None or best_stage >= start):
            j2 = t["beyond"][0]
            if best_j is None or (best_stage == start and j2 < best_j) or best_stage is None or best_stage > start:
                if best_j is None or j2 < best_j or best_stage > start:
                    note = (
                        f"stage {start}: ~s{j2} is a t.c. but {j2} is outside "
                        "the registry; the unbounded construction would jump there"
                    )
        return best_stage, best_j, note


def _formula_atoms(f: Formula) -> list[Formula]:
    from .syntax import prop_atoms

    return prop_atoms(f)


def _pool_satisfiable(pool: tuple[Formula, ...]) -> bool:
    from .syntax import is_satisfiable

    return is_satisfiable(list(pool))


@dataclass(frozen=True)
class SimState:
    variant: Variant
    stage: int
    h_value: int
    switch_stage: Optional[int]
    box_bot: Optional[bool] = None
    x_switch: Optional[frozenset] = None
    y_switch: Optional[frozenset] = None
    divergences: tuple[str, ...] = ()


def initial_state(variant: Variant) -> SimState:
    return SimState(variant, 0, 0, None)


def step_h(state: SimState, stream: TheoryStream, registry: ModelRegistry) -> SimState:
    """Advance the h machine by one stage: h(stage+1) from h(stage)."""
    if state.h_value != 0:
        return replace(state, stage=state.stage + 1)
    tables = _TriggerTables(state.variant, stream, registry)
    j, note = tables.fire_at(state.stage)
    divergences = state.divergences
    if note is not None and note not in divergences:
        divergences = divergences + (note,)
    if j is None:
        return replace(state, stage=state.stage + 1, divergences=divergences)
    return replace(
        state,
        stage=state.stage + 1,
        h_value=j,
        switch_stage=state.stage,
        divergences=divergences,
    )


def find_switch(
    variant: Variant, stream: TheoryStream, registry: ModelRegistry
) -> tuple[Optional[int], Optional[int], tuple[str, ...]]:
    """(switch stage m, world i, divergences): the first stage whose
    trigger fires, computed interval-by-interval over pool versions."""
    tables = _TriggerTables(variant, stream, registry)
    stages = sorted({s for s, _ in stream.events})
    starts = [0] + [s for s in stages if s > 0]
    divergences: list[str] = []
    for idx, start in enumerate(starts):
        end = starts[idx + 1] if idx + 1 < len(starts) else None
        stage, j, note = tables.fire_in_interval(start, end)
        if note is not None and note not in divergences:
            divergences.append(note)
        if stage is not None:
            return stage, j, tuple(divergences)
    return None, None, tuple(divergences)


# ---------------------------------------------------------------------------
# The g machines
# ---------------------------------------------------------------------------

@dataclass
class GTrace:
    """Stage-indexed outputs; None is the no-emission marker."""

    entries: list[Optional[Formula]]
    switch_stage: Optional[int]

    def __len__(self) -> int:
        return len(self.entries)

    def first_index(self, f: Formula) -> Optional[int]:
        for i, e in enumerate(self.entries):
            if e is f:
                return i
        return None


def run(
    variant: Variant,
    stream: TheoryStream,
    registry: ModelRegistry,
    horizon: int,
) -> tuple[SimState, GTrace]:
    """Run the paired h/g machines to the horizon (positions 0..horizon-1)."""
    registry.validate_for(variant)
    switch, i, divergences = find_switch(variant, stream, registry)
    if switch is not None and switch >= horizon:
        switch, i = None, None
    entries: list[Optional[Formula]] = []
    limit = horizon if switch is None else switch
    entries = [None] * limit
    for s, f in stream.events:
        if s < limit:
            entries[s] = f
    if switch is None:
        state = SimState(variant, horizon, 0, None, divergences=divergences)
        return state, GTrace(entries, None)
    assert i is not None
    m = switch
    model, li = registry.model_of(i)
    x, y = compute_xy(variant, stream, registry, m - 1, i)
    box_bot: Optional[bool] = None
    if variant is Variant.H0G0:
        box_bot = semantics.satisfies(model, model.frame.worlds[li], box(BOT))
        xy = x | y
        t = 0
        while len(entries) < horizon:
            xi = formula_at(t)
            if box_bot or neg(xi) not in xy:
                entries.append(xi)
            else:
                entries.append(None)
            t += 1
    elif variant is Variant.H1G1:
        seq = sorted(x, key=code) + sorted(y, key=code, reverse=True)
        for f in seq:
            if len(entries) >= horizon:
                break
            entries.append(f)
        t = 0
        while len(entries) < horizon:
            entries.append(formula_at(t))
            t += 1
    else:
        chi = sorted(x | y, key=code)
        for f in chi:
            if len(entries) >= horizon:
                break
            entries.append(f)
        k = len(chi)
        if m == 0:
            while len(entries) < horizon:
                entries.append(None)
        else:
            t = 0
            while len(entries) < horizon:
                tower = [formula_at(t)]
                for _ in range(m - 1):
                    tower.append(neg(tower[-1]))
                # position m+k+mt+s carries the (m-s-1)-fold negation
                for s in range(m):
                    if len(entries) >= horizon:
                        break
                    entries.append(tower[m - s - 1])
                t += 1
    state = SimState(
        variant,
        horizon,
        i,
        switch,
        box_bot=box_bot,
        x_switch=x,
        y_switch=y,
        divergences=divergences,
    )
    return state, GTrace(entries, switch)


def run_g(
    variant: Variant, stream: TheoryStream, registry: ModelRegistry, horizon: int
) -> GTrace:
    return run(variant, stream, registry, horizon)[1]


# ---------------------------------------------------------------------------
# Trace predicates
# ---------------------------------------------------------------------------

def rosser_holds(trace: GTrace, f: Formula) -> bool:
    """The witness-comparison predicate on the trace: f appears, strictly
    before any appearance of ~f."""
    nf = neg(f)
    for e in trace.entries:
        if e is f:
            return True
        if e is nf:
            return False
    raise InsufficientHorizon(
        f"neither {render(f)} nor its negation appears within the horizon"
    )


def emitted_ever(state: SimState, trace: GTrace, f: Formula) -> bool:
    """Whether the infinite H0G0 trace ever emits f (decidable once f's
    tail slot lies within the horizon)."""
    if trace.first_index(f) is not None:
        return True
    if state.switch_stage is None:
        raise InsufficientHorizon("no switch within the horizon")
    slot = state.switch_stage + formula_index(f)
    if len(trace.entries) > slot:
        return False
    raise InsufficientHorizon(
        f"tail slot of {render(f)} at {slot} is beyond the horizon"
    )


def suggested_horizon(
    variant: Variant,
    stream: TheoryStream,
    registry: ModelRegistry,
    window: tuple[Formula, ...],
) -> int:
    """A horizon large enough to settle every claim instance on the window."""
    switch, i, _ = find_switch(variant, stream, registry)
    base = max([s for s, _ in stream.events], default=0) + 16
    if switch is None:
        return base
    m = switch
    x, y = compute_xy(variant, stream, registry, m - 1, i)  # type: ignore[arg-type]
    if variant is Variant.H0G0:
        need = max((formula_index(f) for f in window), default=0)
        return max(base, m + need + 2)
    if variant is Variant.H1G1:
        need = max((formula_index(neg(f)) for f in window), default=0)
        return max(base, m + len(x) + len(y) + need + 2)
    k = len(x | y)
    worst = 0
    for f in window:
        for g in (f, neg(f)):
            core, u = strip_negs(g)
            carrier = core
            for _ in range(max(0, u - (m - 1))):
                carrier = neg(carrier)
            worst = max(worst, formula_index(carrier))
    return max(base, m + k + m * (worst + 1) + 2)


# ---------------------------------------------------------------------------
# Claim checkers
# ---------------------------------------------------------------------------

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"


@dataclass(frozen=True)
class ClaimCheck:
    claim: str
    formula: Optional[Formula]
    status: str
    detail: str = ""


@dataclass(frozen=True)
class Report:
    variant: Variant
    checks: tuple[ClaimCheck, ...]
    benign: bool
    switch_stage: Optional[int]
    h_value: int
    divergences: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not any(c.status == FAIL for c in self.checks)

    def render(self) -> str:
        lines = [f"variant {self.variant.value}"]
        if self.switch_stage is None:
            lines.append("switch none")
        else:
            lines.append(f"switch {self.switch_stage} world {self.h_value}")
        lines.append(f"benign {'yes' if self.benign else 'no'}")
        for d in self.divergences:
            lines.append(f"divergence {d}")
        for c in self.checks:
            name = render(c.formula) if c.formula is not None else "-"
            line = f"CHECK {c.claim} {name} {c.status}"
            if c.detail:
                line += f"  # {c.detail}"
            lines.append(line)
        lines.append("RESULT " + (PASS if self.passed else FAIL))
        return "\n".join(lines) + "\n"


def _code_violating_events(stream: TheoryStream, switch: Optional[int]) -> list[tuple[int, Formula]]:
    limit = switch if switch is not None else len(stream.events) and max(s for s, _ in stream.events) + 1
    out = []
    for s, f in stream.events:
        if switch is not None and s >= switch:
            continue
        if code(f) > s:
            out.append((s, f))
    return out


def scenario_benign(stream: TheoryStream, state: SimState) -> bool:
    """Benign = every pool up to the switch is propositionally satisfiable
    and the trigger scan never had to ignore an out-of-registry jump."""
    if state.divergences:
        return False
    last = state.switch_stage if state.switch_stage is not None else state.stage
    pools = {stream.pool_at(s) for s, _ in stream.events if s <= last}
    pools.add(stream.pool_at(last))
    return all(_pool_satisfiable(p) for p in pools)


def check_claims(
    variant: Variant,
    trace: GTrace,
    state: SimState,
    window: tuple[Formula, ...],
    stream: TheoryStream,
) -> Report:
    checks: list[ClaimCheck] = []
    benign = scenario_benign(stream, state)
    switch = state.switch_stage

    # Procedure-1 fidelity: before the switch the trace mirrors the stream.
    limit = switch if switch is not None else len(trace.entries)
    fid = all(
        trace.entries[s] is stream.event_at(s) for s in range(min(limit, len(trace.entries)))
    )
    checks.append(ClaimCheck("PROC1", None, PASS if fid else FAIL))
    # h lock: the state never reports a switch without a value, or a value
    # change (the machine writes h once; replaying step_h is the real test).
    lock_ok = (state.h_value == 0) == (switch is None)
    checks.append(ClaimCheck("HLOCK", None, PASS if lock_ok else FAIL))

    if switch is None:
        for f in window:
            claim = {"H0G0": "CL2", "H1G1": "PCL2", "HG2": "DCL3"}[variant.value]
            checks.append(ClaimCheck(claim, f, SKIP, "no switch"))
        return Report(variant, tuple(checks), benign, switch, state.h_value, state.divergences)

    xy = (state.x_switch or frozenset()) | (state.y_switch or frozenset())
    touched = _code_violating_events(stream, switch)

    def code_violated(f: Formula) -> bool:
        return any(ev is f or ev is neg(f) for _, ev in touched)

    if variant is Variant.H0G0:
        for f in window:
            if state.box_bot:
                checks.append(ClaimCheck("CL2", f, SKIP, "world satisfies box-bot"))
                continue
            try:
                expected = neg(f) in xy
                actual = not emitted_ever(state, trace, f)
                checks.append(ClaimCheck("CL2", f, PASS if expected == actual else FAIL))
            except InsufficientHorizon as e:
                checks.append(ClaimCheck("CL2", f, SKIP, str(e)))
    elif variant is Variant.H1G1:
        for f in window:
            if code_violated(f):
                checks.append(ClaimCheck("PCL2", f, SKIP, "code-violating event touches formula"))
                continue
            try:
                expected = neg(f) in xy
                actual = not rosser_holds(trace, f)
                checks.append(ClaimCheck("PCL2", f, PASS if expected == actual else FAIL))
            except InsufficientHorizon as e:
                checks.append(ClaimCheck("PCL2", f, SKIP, str(e)))
    else:
        for f in window:
            both = f in xy and neg(f) in xy
            checks.append(ClaimCheck("DCL2", f, PASS if not both else FAIL))
        for f in window:
            if code_violated(f):
                checks.append(ClaimCheck("DCL3", f, SKIP, "code-violating event touches formula"))
                continue
            _, u = strip_negs(f)
            if u > switch - 2:
                checks.append(
                    ClaimCheck("DCL3", f, SKIP, f"negation depth {u} needs switch >= {u + 2}")
                )
                continue
            try:
                expected = f in xy
                actual = rosser_holds(trace, f)
                checks.append(ClaimCheck("DCL3", f, PASS if expected == actual else FAIL))
            except InsufficientHorizon as e:
                checks.append(ClaimCheck("DCL3", f, SKIP, str(e)))
        for f in window:
            try:
                both = rosser_holds(trace, f) and rosser_holds(trace, neg(f))
                checks.append(ClaimCheck("DCL5", f, PASS if not both else FAIL))
            except InsufficientHorizon as e:
                checks.append(ClaimCheck("DCL5", f, SKIP, str(e)))
    return Report(variant, tuple(checks), benign, switch, state.h_value, state.divergences)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    variant: Variant
    stream: TheoryStream
    registry: ModelRegistry
    horizon: Optional[int]
    window: tuple[Formula, ...]


def run_scenario(sc: Scenario) -> tuple[SimState, GTrace, Report]:
    horizon = sc.horizon
    if horizon is None:
        horizon = suggested_horizon(sc.variant, sc.stream, sc.registry, sc.window)
    state, trace = run(sc.variant, sc.stream, sc.registry, horizon)
    report = check_claims(sc.variant, trace, state, sc.window, sc.stream)
    return state, trace, report


def parse_scenario(text: str, base_dir: str = ".") -> Scenario:
    import os

    variant: Optional[Variant] = None
    seed: Optional[int] = None
    events: list[tuple[int, Formula]] = []
    registry_paths: list[str] = []
    horizon: Optional[int] = None
    window: list[Formula] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        # Whole-line comments only: formulas may contain #t / #f.
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        head, rest = parts[0], parts[1] if len(parts) > 1 else ""
        if head == "variant":
            variant = Variant(rest.strip())
        elif head == "seed":
            seed = int(rest)
        elif head == "at":
            stage_text, kw, formula_text = rest.split(None, 2)
            if kw != "prove":
                raise SimError(f"line {lineno}: expected 'at <stage> prove <formula>'")
            events.append((int(stage_text), parse(formula_text)))
        elif head == "registry":
            registry_paths.extend(rest.split())
        elif head == "horizon":
            horizon = int(rest)
        elif head == "window":
            window.append(parse(rest))
        else:
            raise SimError(f"line {lineno}: unknown scenario record {head!r}")
    if variant is None:
        raise SimError("scenario must declare a variant")
    if registry_paths:
        models = []
        for path in registry_paths:
            with open(os.path.join(base_dir, path)) as fh:
                models.append(semantics.parse_model(fh.read()))
        registry = registry_from_models(models)
    else:
        registry = default_registry(variant)
    if seed is not None:
        if events:
            raise SimError("a scenario is seeded or scripted, not both")
        generated = generate_scenario(variant, seed, registry)
        if not window:
            window = list(generated.window)
        return Scenario(variant, generated.stream, registry, horizon, tuple(window))
    stream = stream_from_events(events)
    if not window:
        window = [s_atom(1), neg(s_atom(1)), var("a"), TOP]
    return Scenario(variant, stream, registry, horizon, tuple(window))


def generate_scenario(
    variant: Variant, seed: int, registry: Optional[ModelRegistry] = None
) -> Scenario:
    """Seeded benign scenario: a satisfiable positive pool of implication
    chains feeding a neighborhood of the target world, then one switch
    event; every pool stays satisfiable and events never emit a window
    formula or its negation."""
    if registry is None:
        registry = default_registry(variant)
    rng = random.Random(seed)
    ids = registry.world_ids
    # Prefer a target with neighborhoods; H0G0 claims skip box-bot worlds.
    candidates = [j for j in ids if registry.neighborhood_ids(j)]
    target = rng.choice(candidates or list(ids))
    targets = [var("a"), var("b"), var("c"), TOP]
    events: list[Formula] = []
    v_sets = registry.neighborhood_ids(target)
    if v_sets:
        v = rng.choice(v_sets)
        goal = rng.choice(targets[:2])
        for l in v:
            events.append(imp(s_atom(l), goal))
        if rng.random() < 0.7:
            events.append(imp(goal, rng.choice([t for t in targets if t is not goal])))
    for _ in range(rng.randrange(0, 3)):
        j = rng.choice(list(ids))
        events.append(imp(s_atom(j), rng.choice(targets)))
    if rng.random() < 0.6:
        events.append(rng.choice(targets[:3]))
    rng.shuffle(events)
    stream_events = []
    stage = 2
    for f in events:
        stage += rng.randrange(1, 4)
        stream_events.append((stage, f))
    switch_at = stage + rng.randrange(4, 16)
    stream_events.append((switch_at, neg(s_atom(target))))
    stream = stream_from_events(stream_events)
    window = [var("a"), neg(var("a")), var("b"), s_atom(target), TOP, BOT]
    extra = rng.choice(list(ids))
    window.append(s_atom(extra))
    # dedupe, preserving order
    seen: set[int] = set()
    window = [f for f in window if not (id(f) in seen or seen.add(id(f)))]
    return Scenario(variant, stream, registry, None, tuple(window))
