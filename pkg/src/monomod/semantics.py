"""MN-frames and models: satisfaction, frame-property checks, frame validity,
and the conversion to and from monotonic neighborhood frames.

A frame's relation x < V (x related to the nonempty world-subset V, upward
closed in V) is stored in one of two forms, per frame:

  * ``antichain``: rows[x] lists the inclusion-minimal related subsets; the
    relation is their upward closure.  This is the user-facing form.
  * ``transversal``: rows[x] lists generator sets, and x < V holds iff V is
    nonempty and meets every generator.  Canonical models built by the
    decision procedure use this form; property checks on it are polynomial,
    which matters because those frames can have hundreds of worlds.

World subsets are int bitmasks over the frame's world order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .syntax import (
    BOT,
    Box,
    CapacityError,
    Formula,
    FormulaError,
    Imp,
    Var,
    box,
    parse,
)

WORLD_CAP = 4096
_POWERSET_CAP = 16  # |W| bound for operations that enumerate all subsets
_CHOICE_CAP = 1_000_000  # antichain transitivity check: choice-product bound
_TRANSVERSAL_CAP = 100_000


class SemanticsError(ValueError):
    pass


def _bits_of(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def minimalize(masks: Iterable[int]) -> tuple[int, ...]:
    """Inclusion-minimal members, ascending, deduplicated."""
    unique = sorted(set(masks), key=lambda m: (bin(m).count("1"), m))
    out: list[int] = []
    for m in unique:
        if not any(k & ~m == 0 for k in out):
            out.append(m)
    return tuple(sorted(out))


@dataclass(frozen=True)
class MNFrame:
    worlds: tuple[str, ...]
    kind: str  # "antichain" | "transversal"
    rows: tuple[tuple[int, ...], ...]
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.worlds:
            raise SemanticsError("frame needs a nonempty world set")
        if len(self.worlds) > WORLD_CAP:
            raise CapacityError(f"{len(self.worlds)} worlds exceed cap {WORLD_CAP}")
        if len(set(self.worlds)) != len(self.worlds):
            raise SemanticsError("duplicate world ids")
        if self.kind not in ("antichain", "transversal"):
            raise SemanticsError(f"unknown relation kind {self.kind!r}")
        if len(self.rows) != len(self.worlds):
            raise SemanticsError("one relation row per world required")
        full = self.full
        for row in self.rows:
            for m in row:
                if m & ~full:
                    raise SemanticsError("neighborhood outside the world set")
                if self.kind == "antichain" and m == 0:
                    raise SemanticsError("empty related subset")
        self._index.update({w: i for i, w in enumerate(self.worlds)})

    @property
    def n(self) -> int:
        return len(self.worlds)

    @property
    def full(self) -> int:
        return (1 << len(self.worlds)) - 1

    def world_index(self, world: str) -> int:
        try:
            return self._index[world]
        except KeyError:
            raise SemanticsError(f"unknown world id {world!r}") from None

    def relates(self, x: int, v: int) -> bool:
        """x < V for the world at index x and subset mask v."""
        if v == 0:
            return False
        row = self.rows[x]
        if self.kind == "antichain":
            return any(m & ~v == 0 for m in row)
        return all(t & v for t in row)

    def box_holds(self, x: int, sat: int) -> bool:
        """Every related subset of x meets the world set `sat`."""
        row = self.rows[x]
        if self.kind == "antichain":
            return all(m & sat for m in row)
        if not row:
            return sat == self.full
        return any(t & ~sat == 0 for t in row)

    def has_neighborhood(self, x: int) -> bool:
        row = self.rows[x]
        if self.kind == "antichain":
            return bool(row)
        return all(t != 0 for t in row)

    def minimal_neighborhoods(self, x: int) -> tuple[int, ...]:
        if self.kind == "antichain":
            return self.rows[x]
        return _minimal_transversals(self.rows[x], self.full)


def frame_from_minimal(worlds: Iterable[str], neighborhoods: dict[str, Iterable[int]]) -> MNFrame:
    worlds = tuple(worlds)
    rows = tuple(minimalize(neighborhoods.get(w, ())) for w in worlds)
    return MNFrame(worlds, "antichain", rows)


def frame_from_generators(worlds: Iterable[str], generators: Iterable[Iterable[int]]) -> MNFrame:
    """Transversal-form frame: x < V iff V is nonempty and meets every
    generator of x.  Generators are reduced to their minimal members."""
    worlds = tuple(worlds)
    rows = []
    for gens in generators:
        gens = set(gens)
        if 0 in gens:
            rows.append((0,))  # one empty generator kills all neighborhoods
        else:
            rows.append(minimalize(gens))
    return MNFrame(worlds, "transversal", tuple(rows))


def _minimal_transversals(gens: tuple[int, ...], full: int, cap: int = _TRANSVERSAL_CAP) -> tuple[int, ...]:
    if any(g == 0 for g in gens):
        return ()
    if not gens:
        return tuple(1 << i for i in range(full.bit_length()))

    def hit(remaining: tuple[int, ...]) -> list[int]:
        if not remaining:
            return [0]
        g = min(remaining, key=lambda m: bin(m).count("1"))
        out = []
        for w in _bits_of(g):
            bit = 1 << w
            rest = tuple(h for h in remaining if not h & bit)
            for t in hit(rest):
                out.append(t | bit)
            if len(out) > cap:
                raise CapacityError("minimal-transversal enumeration exceeds cap")
        return out

    return minimalize(hit(tuple(sorted(set(gens)))))


def to_antichain(frame: MNFrame) -> MNFrame:
    """Equivalent antichain-form frame (may be expensive; capped)."""
    if frame.kind == "antichain":
        return frame
    rows = tuple(_minimal_transversals(row, frame.full) for row in frame.rows)
    return MNFrame(frame.worlds, "antichain", rows)


# ---------------------------------------------------------------------------
# Models and satisfaction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MNModel:
    frame: MNFrame
    valuation: tuple[tuple[str, int], ...]  # (variable name, world mask)

    def __post_init__(self):
        full = self.frame.full
        names = [v for v, _ in self.valuation]
        if names != sorted(names) or len(set(names)) != len(names):
            raise SemanticsError("valuation must be sorted and duplicate-free")
        for _, m in self.valuation:
            if m & ~full:
                raise SemanticsError("valuation mentions worlds outside the frame")

    def var_mask(self, name: str) -> int:
        for v, m in self.valuation:
            if v == name:
                return m
        return 0


def model(frame: MNFrame, valuation: dict[str, int]) -> MNModel:
    return MNModel(frame, tuple(sorted(valuation.items())))


def extension(m: MNModel, f: Formula, memo: Optional[dict[int, int]] = None) -> int:
    """World mask of f's extension in m."""
    fr = m.frame
    full = fr.full
    if memo is None:
        memo = {}

    def ext(node: Formula) -> int:
        got = memo.get(id(node))
        if got is not None:
            return got
        if node is BOT:
            val = 0
        elif isinstance(node, Var):
            val = m.var_mask(node.name)
        elif isinstance(node, Imp):
            val = (~ext(node.left) | ext(node.right)) & full
        else:
            assert isinstance(node, Box)
            inner = ext(node.inner)
            val = 0
            for x in range(fr.n):
                if fr.box_holds(x, inner):
                    val |= 1 << x
        memo[id(node)] = val
        return val

    return ext(f)


def satisfies(m: MNModel, world: str, f: Formula) -> bool:
    x = m.frame.world_index(world)
    return bool(extension(m, f) >> x & 1)


# ---------------------------------------------------------------------------
# Frame properties (Transitive / P / D) and frame validity
# ---------------------------------------------------------------------------

PROPERTIES = ("transitive", "P", "D")


def frame_property(frame: MNFrame, prop: str) -> bool:
    if prop == "P":
        return all(frame.has_neighborhood(x) for x in range(frame.n))
    if prop == "D":
        return _property_d(frame)
    if prop == "transitive":
        return _property_transitive(frame)
    raise SemanticsError(f"unknown frame property {prop!r}")


def _property_d(frame: MNFrame) -> bool:
    full = frame.full
    if frame.kind == "transversal":
        # x < V or x < W\V for all V  iff  generators pairwise intersect
        # (and none is empty, so x < W always holds).
        for row in (frame.rows[x] for x in range(frame.n)):
            for t in row:
                if t == 0:
                    return False
            for a, b in itertools.combinations(row, 2):
                if a & b == 0:
                    return False
        return True
    if frame.n > _POWERSET_CAP:
        raise CapacityError(
            f"D-property check enumerates subsets; {frame.n} worlds exceed cap {_POWERSET_CAP}"
        )
    for x in range(frame.n):
        for v in range(full + 1):
            if not (frame.relates(x, v) or frame.relates(x, full & ~v)):
                return False
    return True


def _property_transitive(frame: MNFrame) -> bool:
    if frame.kind == "transversal":
        return _transitive_transversal(frame)
    return _transitive_antichain(frame)


def _transitive_antichain(frame: MNFrame) -> bool:
    # A violation with arbitrary (V, {U_y}) shrinks to minimal V and minimal
    # U_y, so only antichain members need enumerating.
    for x in range(frame.n):
        for v in frame.rows[x]:
            members = _bits_of(v)
            fams = [frame.rows[y] for y in members]
            if any(not fam for fam in fams):
                continue
            count = 1
            for fam in fams:
                count *= len(fam)
                if count > _CHOICE_CAP:
                    raise CapacityError("transitivity check: choice product exceeds cap")
            for pick in itertools.product(*fams):
                union = 0
                for u in pick:
                    union |= u
                if not frame.relates(x, union):
                    return False
    return True


def _transitive_transversal(frame: MNFrame) -> bool:
    # Violation iff for some x and generator T of x the set
    # Z_T = {y | y has neighborhoods and some neighborhood of y avoids T}
    # contains a related subset of x, i.e. meets every generator of x.
    for x in range(frame.n):
        gens = frame.rows[x]
        for t in gens:
            z = 0
            for y in range(frame.n):
                row = frame.rows[y]
                if not row:
                    has_avoiding = frame.full & ~t != 0
                elif any(g == 0 for g in row):
                    has_avoiding = False
                else:
                    has_avoiding = not frame.box_holds(y, t)
                if has_avoiding:
                    z |= 1 << y
            if z and all(g & z for g in gens):
                return False
    return True


def formula_variables(f: Formula) -> list[str]:
    out: set[str] = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Imp):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Box):
            stack.append(node.inner)
    return sorted(out)


def valid_in_frame(frame: MNFrame, f: Formula) -> bool:
    """True iff f holds at every world under every valuation of its
    variables (other variables cannot affect satisfaction)."""
    names = formula_variables(f)
    if frame.n * len(names) > 20:
        raise CapacityError("frame validity check too large: |W| * vars > 20")
    full = frame.full
    for masks in itertools.product(range(full + 1), repeat=len(names)):
        m = MNModel(frame, tuple(sorted(zip(names, masks))))
        if extension(m, f) != full:
            return False
    return True


# ---------------------------------------------------------------------------
# Monotonic neighborhood frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NeighborhoodFrame:
    worlds: tuple[str, ...]
    delta: tuple[int, ...]  # indexed by subset mask; delta[v] is a world mask

    def __post_init__(self):
        n = len(self.worlds)
        if n == 0:
            raise SemanticsError("neighborhood frame needs worlds")
        if n > _POWERSET_CAP:
            raise CapacityError(f"neighborhood frames capped at {_POWERSET_CAP} worlds")
        if len(self.delta) != 1 << n:
            raise SemanticsError("delta table must cover the full powerset")
        if self.delta[0] != 0:
            raise SemanticsError("delta(empty set) must be empty")
        full = (1 << n) - 1
        for v in range(full + 1):
            if self.delta[v] & ~full:
                raise SemanticsError("delta value outside the world set")
            for i in range(n):
                if not v >> i & 1 and self.delta[v] & ~self.delta[v | 1 << i]:
                    raise SemanticsError("non-monotone delta rejected")


def to_neighborhood(frame: MNFrame) -> NeighborhoodFrame:
    if frame.n > _POWERSET_CAP:
        raise CapacityError(f"conversion capped at {_POWERSET_CAP} worlds")
    full = frame.full
    delta = []
    for v in range(full + 1):
        d = 0
        for x in range(frame.n):
            if frame.relates(x, v):
                d |= 1 << x
        delta.append(d)
    return NeighborhoodFrame(frame.worlds, tuple(delta))


def from_neighborhood(nf: NeighborhoodFrame) -> MNFrame:
    n = len(nf.worlds)
    rows = []
    for x in range(n):
        related = [v for v in range(1 << n) if nf.delta[v] >> x & 1]
        rows.append(minimalize(related))
    return MNFrame(nf.worlds, "antichain", tuple(rows))


def neighborhood_extension(nf: NeighborhoodFrame, valuation: dict[str, int], f: Formula) -> int:
    """Delta-side evaluation: v(<>A) = delta(v(A)), so v([]A) is the
    complement of delta applied to the complement of v(A)."""
    full = (1 << len(nf.worlds)) - 1

    def ext(node: Formula) -> int:
        if node is BOT:
            return 0
        if isinstance(node, Var):
            return valuation.get(node.name, 0)
        if isinstance(node, Imp):
            return (~ext(node.left) | ext(node.right)) & full
        assert isinstance(node, Box)
        return full & ~nf.delta[full & ~ext(node.inner)]

    return ext(f)


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------

def _mask_names(worlds: tuple[str, ...], mask: int) -> str:
    return " ".join(worlds[i] for i in _bits_of(mask))


def render_model(m: MNModel) -> str:
    fr = to_antichain(m.frame)
    lines = ["worlds " + " ".join(fr.worlds)]
    for x, w in enumerate(fr.worlds):
        for mask in fr.rows[x]:
            lines.append(f"rel {w} : " + _mask_names(fr.worlds, mask))
    for name, mask in m.valuation:
        lines.append(f"val {name} : " + _mask_names(fr.worlds, mask))
    return "\n".join(lines) + "\n"


def render_frame(fr: MNFrame) -> str:
    return render_model(MNModel(fr, ()))


def parse_model(text: str) -> MNModel:
    worlds: Optional[tuple[str, ...]] = None
    rel: dict[str, list[int]] = {}
    val: dict[str, int] = {}
    index: dict[str, int] = {}

    def mask_of(names: list[str], lineno: int) -> int:
        m = 0
        for name in names:
            if name not in index:
                raise SemanticsError(f"line {lineno}: unknown world {name!r}")
            m |= 1 << index[name]
        return m

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "worlds":
            if worlds is not None:
                raise SemanticsError(f"line {lineno}: duplicate worlds line")
            if len(parts) < 2:
                raise SemanticsError(f"line {lineno}: empty world list")
            worlds = tuple(parts[1:])
            index = {w: i for i, w in enumerate(worlds)}
            rel = {w: [] for w in worlds}
        elif parts[0] in ("rel", "val"):
            if worlds is None:
                raise SemanticsError(f"line {lineno}: worlds line must come first")
            if ":" not in parts:
                raise SemanticsError(f"line {lineno}: missing ':'")
            sep = parts.index(":")
            head, members = parts[1:sep], parts[sep + 1 :]
            if len(head) != 1:
                raise SemanticsError(f"line {lineno}: expected one name before ':'")
            mask = mask_of(members, lineno)
            if parts[0] == "rel":
                if head[0] not in index:
                    raise SemanticsError(f"line {lineno}: unknown world {head[0]!r}")
                if mask == 0:
                    raise SemanticsError(f"line {lineno}: empty related subset")
                rel[head[0]].append(mask)
            else:
                val[head[0]] = val.get(head[0], 0) | mask
        else:
            raise SemanticsError(f"line {lineno}: unknown record {parts[0]!r}")
    if worlds is None:
        raise SemanticsError("missing worlds line")
    frame = frame_from_minimal(worlds, rel)
    return model(frame, val)


def parse_frame(text: str) -> MNFrame:
    return parse_model(text).frame


def parse_formula_file(text: str) -> Formula:
    return parse(text.strip())
