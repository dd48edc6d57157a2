"""Decision procedure for the six logics via the finite-frame-property
construction: enumerate the maximal consistent selections over a formula's
closure, eliminate the ones no consistent frame world can realize, and read
a countermodel off the survivors.  PROVABLE verdicts carry a replayable
elimination trace; UNPROVABLE verdicts carry a self-verifying countermodel.

A brute-force enumerator over small monotone frames serves as an
independent oracle; it re-implements satisfaction directly on bit-coded
frames (vectorized) instead of going through the semantics module.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from . import semantics
from .syntax import (
    BOT,
    Box,
    CapacityError,
    ClosureSet,
    Formula,
    Imp,
    Var,
    box,
    closure,
    negdual,
    render,
    truth_column,
)

PAIR_CAP = 24


class DecideError(ValueError):
    pass


class Logic(Enum):
    MN = "MN"
    MNF = "MNF"
    MNP = "MNP"
    MNPF = "MNPF"
    MND = "MND"
    MNDF = "MNDF"

    @property
    def has_f(self) -> bool:
        return self in (Logic.MNF, Logic.MNPF, Logic.MNDF)

    @property
    def has_p(self) -> bool:
        return self in (Logic.MNP, Logic.MNPF)

    @property
    def has_d(self) -> bool:
        return self in (Logic.MND, Logic.MNDF)

    @property
    def frame_properties(self) -> tuple[str, ...]:
        props = []
        if self.has_f:
            props.append("transitive")
        if self.has_p:
            props.append("P")
        if self.has_d:
            props.append("D")
        return tuple(props)


# Proper theory inclusions, smaller logic first.
LOGIC_INCLUSIONS = (
    (Logic.MN, Logic.MNF),
    (Logic.MN, Logic.MNP),
    (Logic.MNP, Logic.MND),
    (Logic.MNF, Logic.MNPF),
    (Logic.MNP, Logic.MNPF),
    (Logic.MND, Logic.MNDF),
    (Logic.MNF, Logic.MNDF),
)


@dataclass(frozen=True)
class Atom:
    """A maximal consistent selection over a closure: exactly one of each
    dual pair, propositionally consistent with boxes read as opaque."""

    closure: ClosureSet
    bits: int

    def has_index(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def __contains__(self, f: Formula) -> bool:
        i = self.closure.index.get(f)
        return i is not None and self.has_index(i)

    def formulas(self) -> tuple[Formula, ...]:
        return tuple(
            f for i, f in enumerate(self.closure.formulas) if self.bits >> i & 1
        )

    def __repr__(self) -> str:
        return "Atom{" + ", ".join(render(f) for f in self.formulas()) + "}"


def atoms(c: ClosureSet) -> tuple[Atom, ...]:
    """All atoms of the closure, ascending by bitset.

    Every assignment of the closure's propositional atoms (variables and
    boxed members) induces exactly one atom, and every atom arises this
    way, so the pool is enumerated by assignments rather than by filtering
    2^pairs candidate bitsets.
    """
    if len(c.pairs) > PAIR_CAP:
        raise CapacityError(
            f"closure has {len(c.pairs)} dual pairs; cap is {PAIR_CAP}"
        )
    prop_atoms = [f for f in c.formulas if isinstance(f, (Var, Box))]
    atom_index = {f: i for i, f in enumerate(prop_atoms)}
    rows = 1 << len(prop_atoms)
    columns = [truth_column(f, atom_index) for f in c.formulas]
    out = set()
    for a in range(rows):
        bits = 0
        for j, col in enumerate(columns):
            if col >> a & 1:
                bits |= 1 << j
        out.add(bits)
    return tuple(Atom(c, b) for b in sorted(out))


RULE_NEC = "E-Nec"
RULE_RM = "E-RM"
RULE_RM_F = "E-RM-F"
RULE_P = "E-P"
RULE_D = "E-D"
RULE_D_F = "E-D-F"


@dataclass(frozen=True)
class TraceStep:
    atom_bits: int
    rule: str
    witnesses: tuple[Formula, ...]


def _rules_enabled(logic: Logic) -> tuple[str, ...]:
    rules = [RULE_NEC, RULE_RM]
    if logic.has_f:
        rules.append(RULE_RM_F)
    if logic.has_p:
        rules.append(RULE_P)
    if logic.has_d:
        rules.append(RULE_D)
        if logic.has_f:
            rules.append(RULE_D_F)
    return tuple(rules)


def _firing_rule(
    logic: Logic,
    c: ClosureSet,
    bits: int,
    all_mask: int,
    support: list[int],
) -> Optional[tuple[str, tuple[Formula, ...]]]:
    """First enabled rule firing on the atom, scanning rules in their fixed
    order and witnesses in ascending closure order.

    support[i] = union of survivor bitsets containing closure formula i, so
    a pair {i, j} occurs in some survivor iff support[i] has bit j.
    """
    boxed_in = [bi for bi in c.boxed if bits >> bi & 1]
    boxed_out = [bi for bi in c.boxed if not bits >> bi & 1]
    fs = c.formulas

    for bi in boxed_out:  # E-Nec: ~[]C in x, C in every survivor
        ci = c.index[fs[bi].inner]  # type: ignore[union-attr]
        if all_mask >> ci & 1:
            return RULE_NEC, (fs[bi].inner,)  # type: ignore[union-attr]

    for bd in boxed_in:  # E-RM: []D, ~[]C in x, no survivor with {D, ~C}
        di = c.index[fs[bd].inner]  # type: ignore[union-attr]
        for bc in boxed_out:
            dci = c.dual[c.index[fs[bc].inner]]  # type: ignore[union-attr]
            if not support[di] >> dci & 1:
                return RULE_RM, (fs[bd].inner, fs[bc].inner)  # type: ignore[union-attr]

    if logic.has_f:
        for bd in boxed_in:  # E-RM-F: no survivor with {[]D, ~C}
            for bc in boxed_out:
                dci = c.dual[c.index[fs[bc].inner]]  # type: ignore[union-attr]
                if not support[bd] >> dci & 1:
                    return RULE_RM_F, (fs[bd].inner, fs[bc].inner)  # type: ignore[union-attr]

    if logic.has_p:
        if bits >> c.index[box(BOT)] & 1:
            return RULE_P, ()

    if logic.has_d:
        for bd in boxed_in:  # E-D: []D, []E in x, no survivor with {D, E}
            di = c.index[fs[bd].inner]  # type: ignore[union-attr]
            for be in boxed_in:
                ei = c.index[fs[be].inner]  # type: ignore[union-attr]
                if not support[di] >> ei & 1:
                    return RULE_D, (fs[bd].inner, fs[be].inner)  # type: ignore[union-attr]
        if logic.has_f:
            for bd in boxed_in:  # E-D-F: no survivor with {[]D, E}
                for be in boxed_in:
                    ei = c.index[fs[be].inner]  # type: ignore[union-attr]
                    if not support[bd] >> ei & 1:
                        return RULE_D_F, (fs[bd].inner, fs[be].inner)  # type: ignore[union-attr]
    return None


def eliminate_with_trace(
    logic: Logic, pool: Iterable[Atom]
) -> tuple[tuple[Atom, ...], tuple[TraceStep, ...]]:
    """Greatest fixpoint of the elimination rules over the pool.

    Atoms are scanned in ascending bitset order and the rule premises of a
    pass are evaluated against the pass-start survivor set; the premises
    only strengthen as atoms die, so the recorded trace replays against the
    exact step-by-step survivor sets and the fixpoint is order-independent.
    """
    pool = sorted(pool, key=lambda a: a.bits)
    if not pool:
        return (), ()
    c = pool[0].closure
    alive = {a.bits: a for a in pool}
    trace: list[TraceStep] = []
    changed = True
    while changed:
        changed = False
        survivors = sorted(alive)
        all_mask = (1 << len(c)) - 1
        support = [0] * len(c)
        for b in survivors:
            all_mask &= b
            for i in range(len(c)):
                if b >> i & 1:
                    support[i] |= b
        for b in survivors:
            fired = _firing_rule(logic, c, b, all_mask, support)
            if fired is not None:
                rule, witnesses = fired
                trace.append(TraceStep(b, rule, witnesses))
                del alive[b]
                changed = True
    survivors = tuple(alive[b] for b in sorted(alive))
    return survivors, tuple(trace)


def eliminate(logic: Logic, pool: Iterable[Atom]) -> tuple[Atom, ...]:
    return eliminate_with_trace(logic, pool)[0]


# ---------------------------------------------------------------------------
# Canonical model
# ---------------------------------------------------------------------------

def canonical_model(
    logic: Logic, surviving: tuple[Atom, ...]
) -> tuple[semantics.MNModel, dict[int, str]]:
    """The finite model over the surviving atoms, with the relation read in
    transversal form: x < V iff V is nonempty and for every []B in x, V
    meets the set of survivors containing B (and, for the transitive
    logics, also the set containing []B)."""
    if not surviving:
        raise DecideError(
            "internal error: no surviving atoms; the closure is globally inconsistent"
        )
    c = surviving[0].closure
    worlds = tuple(f"w{i}" for i in range(len(surviving)))
    names = {a.bits: worlds[i] for i, a in enumerate(surviving)}
    member_mask = [0] * len(c)
    for i, a in enumerate(surviving):
        for j in range(len(c)):
            if a.bits >> j & 1:
                member_mask[j] |= 1 << i
    generators = []
    for a in surviving:
        gens = []
        for bi in c.boxed:
            if a.bits >> bi & 1:
                inner_i = c.index[c.formulas[bi].inner]  # type: ignore[union-attr]
                gens.append(member_mask[inner_i])
                if logic.has_f:
                    gens.append(member_mask[bi])
        generators.append(gens)
    frame = semantics.frame_from_generators(worlds, generators)
    valuation = {
        f.name: member_mask[i]
        for i, f in enumerate(c.formulas)
        if isinstance(f, Var)
    }
    return semantics.model(frame, valuation), names


def truth_lemma_audit(
    m: semantics.MNModel, surviving: tuple[Atom, ...], names: dict[int, str]
) -> None:
    """Assert the truth lemma: membership equals satisfaction for every
    surviving atom and closure member."""
    if not surviving:
        return
    c = surviving[0].closure
    memo: dict[int, int] = {}
    for j, f in enumerate(c.formulas):
        sat = semantics.extension(m, f, memo)
        for i, a in enumerate(surviving):
            if bool(sat >> i & 1) != bool(a.bits >> j & 1):
                raise DecideError(
                    f"truth lemma violated at {names[a.bits]} for {render(f)}"
                )


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

PROVABLE = "PROVABLE"
UNPROVABLE = "UNPROVABLE"


@dataclass(frozen=True)
class Certificate:
    verdict: str
    logic: Logic
    formula: Formula
    countermodel: Optional[tuple[semantics.MNModel, str]]
    elimination_trace: tuple[TraceStep, ...]


def decide(logic: Logic, a: Formula) -> Certificate:
    c = closure(a)
    pool = atoms(c)
    surviving, trace = eliminate_with_trace(logic, pool)
    m, names = canonical_model(logic, surviving)
    truth_lemma_audit(m, surviving, names)
    nd = c.index[negdual(a)]
    ai = c.index[a]
    refuters = [x for x in surviving if x.bits >> nd & 1]
    # Maximality makes the two formulations interchangeable; keep both live.
    assert (not refuters) == all(x.bits >> ai & 1 for x in surviving)
    if refuters:
        world = names[refuters[0].bits]
        return Certificate(UNPROVABLE, logic, a, (m, world), trace)
    return Certificate(PROVABLE, logic, a, None, trace)


def verify_certificate(cert: Certificate) -> bool:
    """Re-check a certificate from scratch; False on any failure."""
    try:
        if cert.verdict == UNPROVABLE:
            if cert.countermodel is None:
                return False
            m, world = cert.countermodel
            for prop in cert.logic.frame_properties:
                if not semantics.frame_property(m.frame, prop):
                    return False
            return not semantics.satisfies(m, world, cert.formula)
        if cert.verdict != PROVABLE:
            return False
        c = closure(cert.formula)
        alive = {a.bits: a for a in atoms(c)}
        enabled = _rules_enabled(cert.logic)
        for step in cert.elimination_trace:
            if step.rule not in enabled:
                return False
            if step.atom_bits not in alive:
                return False
            if not _check_premise(cert.logic, c, step, sorted(alive)):
                return False
            del alive[step.atom_bits]
        ai = c.index[cert.formula]
        return all(b >> ai & 1 for b in alive)
    except Exception:
        return False


def _check_premise(logic: Logic, c: ClosureSet, step: TraceStep, survivors: list[int]) -> bool:
    bits = step.atom_bits
    w = step.witnesses

    def pair_in_some(i: int, j: int) -> bool:
        return any(b >> i & 1 and b >> j & 1 for b in survivors)

    if step.rule == RULE_NEC:
        (cf,) = w
        bi = c.index.get(box(cf))
        if bi is None or bits >> bi & 1:
            return False
        ci = c.index[cf]
        return all(b >> ci & 1 for b in survivors)
    if step.rule in (RULE_RM, RULE_RM_F):
        d, cf = w
        bd, bc = c.index.get(box(d)), c.index.get(box(cf))
        if bd is None or bc is None:
            return False
        if not bits >> bd & 1 or bits >> bc & 1:
            return False
        dci = c.dual[c.index[cf]]
        left = c.index[d] if step.rule == RULE_RM else bd
        return not pair_in_some(left, dci)
    if step.rule == RULE_P:
        bb = c.index[box(BOT)]
        return bool(bits >> bb & 1)
    if step.rule in (RULE_D, RULE_D_F):
        d, e = w
        bd, be = c.index.get(box(d)), c.index.get(box(e))
        if bd is None or be is None:
            return False
        if not (bits >> bd & 1 and bits >> be & 1):
            return False
        left = c.index[d] if step.rule == RULE_D else bd
        return not pair_in_some(left, c.index[e])
    return False


# ---------------------------------------------------------------------------
# Brute-force countermodel search (independent oracle)
# ---------------------------------------------------------------------------

def _upward_closed_rows(n: int) -> list[int]:
    """All upward-closed families of nonempty subsets of an n-set, as
    bitfields with bit (v-1) marking subset mask v."""
    full = (1 << n) - 1
    rows = []
    for r in range(1 << full):
        ok = True
        for v in range(1, full + 1):
            if r >> (v - 1) & 1:
                for i in range(n):
                    if not v >> i & 1 and not r >> ((v | 1 << i) - 1) & 1:
                        ok = False
                        break
                if not ok:
                    break
        if ok:
            rows.append(r)
    return rows


def _row_minimal_sets(n: int, row: int) -> tuple[int, ...]:
    full = (1 << n) - 1
    present = [v for v in range(1, full + 1) if row >> (v - 1) & 1]
    return semantics.minimalize(present)


_frame_cache: dict[tuple, tuple] = {}


def _frames_for(n: int, logic: Logic) -> tuple[np.ndarray, dict[int, tuple[int, ...]]]:
    """Array of frames (rows per world) passing the logic's frame
    properties, plus the row -> minimal-sets table."""
    key = (n, logic.frame_properties)
    got = _frame_cache.get(key)
    if got is not None:
        return got
    rows = _upward_closed_rows(n)
    min_sets = {r: _row_minimal_sets(n, r) for r in rows}
    full = (1 << n) - 1
    frames = [f for f in itertools.product(rows, repeat=n)]
    if "P" in logic.frame_properties:
        frames = [f for f in frames if all(r != 0 for r in f)]
    if "D" in logic.frame_properties:
        def d_ok(f):
            for r in f:
                for v in range(1, full + 1):
                    comp = full & ~v
                    a = r >> (v - 1) & 1
                    b = r >> (comp - 1) & 1 if comp else 0
                    if not (a or b):
                        return False
            return True
        frames = [f for f in frames if d_ok(f)]
    if "transitive" in logic.frame_properties:
        def t_ok(f):
            for x in range(n):
                for v in min_sets[f[x]]:
                    members = [i for i in range(n) if v >> i & 1]
                    fams = [min_sets[f[y]] for y in members]
                    if any(not fam for fam in fams):
                        continue
                    for pick in itertools.product(*fams):
                        union = 0
                        for u in pick:
                            union |= u
                        if not f[x] >> (union - 1) & 1:
                            return False
            return True
        frames = [f for f in frames if t_ok(f)]
    arr = np.array(frames, dtype=np.int64).reshape(len(frames), n)
    _frame_cache[key] = (arr, min_sets)
    return arr, min_sets  # type: ignore[return-value]


def _avoid_table(n: int) -> np.ndarray:
    """avoid[s] = bitfield of nonempty subsets disjoint from s."""
    full = (1 << n) - 1
    table = []
    for s in range(full + 1):
        bits = 0
        for v in range(1, full + 1):
            if v & s == 0:
                bits |= 1 << (v - 1)
        table.append(bits)
    return np.array(table, dtype=np.int64)


def _vector_extension(
    f: Formula, frames: np.ndarray, vals: dict[str, np.ndarray], n: int, avoid: np.ndarray
) -> np.ndarray:
    full = (1 << n) - 1
    memo: dict[int, np.ndarray] = {}

    def ext(node: Formula) -> np.ndarray:
        got = memo.get(id(node))
        if got is not None:
            return got
        if node is BOT:
            out = np.zeros((1, 1), dtype=np.int64)
        elif isinstance(node, Var):
            out = vals.get(node.name)
            if out is None:
                out = np.zeros((1, 1), dtype=np.int64)
        elif isinstance(node, Box):
            inner = ext(node.inner)
            av = avoid[inner]
            out = np.zeros(np.broadcast_shapes(av.shape, (frames.shape[0], 1)), dtype=np.int64)
            for x in range(n):
                bit = (frames[:, x : x + 1] & av) == 0
                out |= bit.astype(np.int64) << x
        else:
            assert isinstance(node, Imp)
            out = (ext(node.left) ^ full) | ext(node.right)
        memo[id(node)] = out
        return out

    return ext(f)


def brute_force_countermodel(
    logic: Logic, a: Formula, max_worlds: int, samples: int = 2000
) -> Optional[tuple[semantics.MNModel, str]]:
    """First refuting (model, world) over monotone frames of the logic's
    class, exhaustive up to 3 worlds, seeded sampling beyond."""
    names = semantics.formula_variables(a)
    if len(names) > 3:
        raise CapacityError("brute force supports at most 3 variables")
    for n in range(1, min(max_worlds, 3) + 1):
        found = _exhaustive_refutation(logic, a, n, names)
        if found is not None:
            return found
    for n in range(4, max_worlds + 1):
        found = _sampled_refutation(logic, a, n, names, samples)
        if found is not None:
            return found
    return None


def _exhaustive_refutation(
    logic: Logic, a: Formula, n: int, names: list[str]
) -> Optional[tuple[semantics.MNModel, str]]:
    frames, min_sets = _frames_for(n, logic)
    if frames.shape[0] == 0:
        return None
    full = (1 << n) - 1
    k = len(names)
    count = (full + 1) ** k
    assignments = np.arange(count, dtype=np.int64)
    vals: dict[str, np.ndarray] = {}
    for i, name in enumerate(names):
        # First variable most significant, matching itertools.product order.
        shift = (full + 1) ** (k - 1 - i)
        vals[name] = ((assignments // shift) % (full + 1)).reshape(1, count)
    avoid = _avoid_table(n)
    value = _vector_extension(a, frames, vals, n, avoid)
    value = np.broadcast_to(value, (frames.shape[0], count))
    bad = np.argwhere(value != full)
    if bad.size == 0:
        return None
    fi, ai = int(bad[0][0]), int(bad[0][1])
    world_bits = int(value[fi, ai])
    world = next(x for x in range(n) if not world_bits >> x & 1)
    worlds = tuple("abc"[:n])
    rows = tuple(min_sets[int(r)] for r in frames[fi])
    frame = semantics.MNFrame(worlds, "antichain", rows)
    valuation = {
        name: int((ai // (full + 1) ** (k - 1 - i)) % (full + 1))
        for i, name in enumerate(names)
    }
    return semantics.model(frame, valuation), worlds[world]


def _sampled_refutation(
    logic: Logic, a: Formula, n: int, names: list[str], samples: int
) -> Optional[tuple[semantics.MNModel, str]]:
    rng = random.Random(0x5EED ^ n)
    full = (1 << n) - 1
    worlds = tuple(f"w{i}" for i in range(n))
    for _ in range(samples):
        neighborhoods = {}
        for w in worlds:
            gens = [rng.randint(1, full) for _ in range(rng.randint(0, 3))]
            neighborhoods[w] = gens
        frame = semantics.frame_from_minimal(worlds, neighborhoods)
        if not all(semantics.frame_property(frame, p) for p in logic.frame_properties):
            continue
        masks = [rng.randint(0, full) for _ in names]
        m = semantics.model(frame, dict(zip(names, masks)))
        ext = semantics.extension(m, a)
        if ext != full:
            x = next(i for i in range(n) if not ext >> i & 1)
            return m, worlds[x]
    return None


# ---------------------------------------------------------------------------
# Certificate serialization
# ---------------------------------------------------------------------------

def render_certificate(cert: Certificate) -> str:
    lines = [
        f"logic {cert.logic.value}",
        f"formula {render(cert.formula)}",
        f"verdict {cert.verdict}",
    ]
    if cert.countermodel is not None:
        m, world = cert.countermodel
        lines.append(f"world {world}")
        lines.append(semantics.render_model(m).rstrip("\n"))
    for step in cert.elimination_trace:
        ws = " ".join(render(w) for w in step.witnesses)
        entry = f"elim {step.atom_bits:x} {step.rule}"
        lines.append(entry + (" " + ws if ws else ""))
    return "\n".join(lines) + "\n"
