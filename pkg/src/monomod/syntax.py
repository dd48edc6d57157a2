"""Modal formula ASTs, parser/printer, the dual operator, subformula closure,
and a size-monotone Godel codec.

The stored AST is always in primitive form: Var, Bot, Imp, Box.  Everything
else (#t, ~, &, |, <>) is parse-time sugar.  Nodes are hash-consed, so
structural equality is pointer equality and deep formulas (long negation
spines produced by the enumerator machinery) stay cheap to compare.
"""
from __future__ import annotations

import re
from typing import Iterator, Optional


class FormulaError(ValueError):
    """Malformed formula-level input."""


class ParseError(FormulaError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class CapacityError(FormulaError):
    """Input exceeds a documented desk-scale cap."""


# ---------------------------------------------------------------------------
# AST (interned)
# ---------------------------------------------------------------------------

class Formula:
    """Base class; instances are interned, compare by identity."""

    __slots__ = ("size",)
    size: int


class Var(Formula):
    __slots__ = ("name",)

    def __repr__(self) -> str:
        return render(self)


class BotF(Formula):
    __slots__ = ()

    def __repr__(self) -> str:
        return "#f"


class Imp(Formula):
    __slots__ = ("left", "right")

    def __repr__(self) -> str:
        return render(self)


class Box(Formula):
    __slots__ = ("inner",)

    def __repr__(self) -> str:
        return render(self)


_intern: dict[tuple, Formula] = {}

_IDENT_RE = re.compile(r"[a-z][a-z0-9_]*\Z")


def var(name: str) -> Var:
    key = ("v", name)
    node = _intern.get(key)
    if node is None:
        if not _IDENT_RE.match(name):
            raise FormulaError(f"invalid variable name {name!r}")
        node = Var.__new__(Var)
        node.name = name
        node.size = 1
        _intern[key] = node
    return node  # type: ignore[return-value]


def _mk_bot() -> BotF:
    node = BotF.__new__(BotF)
    node.size = 1
    return node


BOT: BotF = _intern.setdefault(("bot",), _mk_bot())  # type: ignore[assignment]


def imp(left: Formula, right: Formula) -> Imp:
    key = ("i", id(left), id(right))
    node = _intern.get(key)
    if node is None:
        node = Imp.__new__(Imp)
        node.left = left
        node.right = right
        node.size = left.size + right.size + 1
        _intern[key] = node
    return node  # type: ignore[return-value]


def box(inner: Formula) -> Box:
    key = ("b", id(inner))
    node = _intern.get(key)
    if node is None:
        node = Box.__new__(Box)
        node.inner = inner
        node.size = inner.size + 1
        _intern[key] = node
    return node  # type: ignore[return-value]


def neg(f: Formula) -> Imp:
    return imp(f, BOT)


TOP: Imp = imp(BOT, BOT)


def conj(a: Formula, b: Formula) -> Formula:
    return neg(imp(a, neg(b)))


def disj(a: Formula, b: Formula) -> Formula:
    return imp(neg(a), b)


def diamond(a: Formula) -> Formula:
    return neg(box(neg(a)))


def is_neg(f: Formula) -> bool:
    return isinstance(f, Imp) and f.right is BOT


def strip_negs(f: Formula) -> tuple[Formula, int]:
    """Delete all leading negations; returns (core, count)."""
    k = 0
    while is_neg(f):
        f = f.left  # type: ignore[union-attr]
        k += 1
    return f, k


def negdual(f: Formula) -> Formula:
    """The ~ dual: strips one negation if present, else negates."""
    if is_neg(f):
        return f.left  # type: ignore[union-attr]
    return neg(f)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<arrow>->)"
    r"|(?P<box>\[\])"
    r"|(?P<dia><>)"
    r"|(?P<true>\#t)"
    r"|(?P<false>\#f)"
    r"|(?P<ident>[a-z][a-z0-9_]*)"
    r"|(?P<punct>[~!&|()])"
)


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unknown token {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.group(), m.start()))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def offset(self) -> int:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][1]
        return len(self.text)

    def take(self, expected: Optional[str] = None) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.offset())
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, found {tok!r}", self.offset())
        self.pos += 1
        return tok

    def form(self) -> Formula:
        node = self.unary()
        while self.peek() in ("&", "|"):
            op = self.take()
            rhs = self.unary()
            node = conj(node, rhs) if op == "&" else disj(node, rhs)
        if self.peek() == "->":
            self.take()
            node = imp(node, self.form())
        return node

    def unary(self) -> Formula:
        # Prefix operators interleave freely: ~[]~p is legal.
        prefixes = []
        while self.peek() in ("~", "!", "[]", "<>"):
            prefixes.append(self.take())
        node = self.atom()
        for op in reversed(prefixes):
            if op in ("~", "!"):
                node = neg(node)
            elif op == "[]":
                node = box(node)
            else:
                node = diamond(node)
        return node

    def atom(self) -> Formula:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.offset())
        if tok == "(":
            self.take()
            node = self.form()
            self.take(")")
            return node
        if tok == "#t":
            self.take()
            return TOP
        if tok == "#f":
            self.take()
            return BOT
        if _IDENT_RE.match(tok):
            self.take()
            return var(tok)
        raise ParseError(f"unexpected token {tok!r}", self.offset())


def parse(text: str) -> Formula:
    p = _Parser(text)
    node = p.form()
    if p.peek() is not None:
        raise ParseError(f"trailing input {p.peek()!r}", p.offset())
    return node


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

# Contexts, loosest to tightest binding position.
_CTX_FORM, _CTX_SUM, _CTX_UNARY = 0, 1, 2


def render(f: Formula) -> str:
    return _render(f, _CTX_FORM)


def _render(f: Formula, ctx: int) -> str:
    # Long pure-negation spines are rendered iteratively to keep recursion
    # depth bounded by the non-negation depth of the formula.
    prefix = []
    while True:
        if f is BOT:
            return "".join(prefix) + "#f"
        if f is TOP:
            return "".join(prefix) + "#t"
        if isinstance(f, Var):
            return "".join(prefix) + f.name
        if isinstance(f, Box):
            return "".join(prefix) + "[]" + _render(f.inner, _CTX_UNARY)
        assert isinstance(f, Imp)
        if f.right is BOT:
            g = f.left
            if isinstance(g, Box) and is_neg(g.inner):
                # <>X  ==  ~[]~X
                return "".join(prefix) + "<>" + _render(g.inner.left, _CTX_UNARY)
            if isinstance(g, Imp) and is_neg(g.right):
                # X & Y  ==  ~(X -> ~Y)
                s = _render(g.left, _CTX_SUM) + " & " + _render(g.right.left, _CTX_UNARY)
                if ctx >= _CTX_UNARY or prefix:
                    s = "(" + s + ")"
                return "".join(prefix) + s
            prefix.append("~")
            f = g
            continue
        if is_neg(f.left):
            # X | Y  ==  ~X -> Y
            s = _render(f.left.left, _CTX_SUM) + " | " + _render(f.right, _CTX_UNARY)
            if ctx >= _CTX_UNARY or prefix:
                s = "(" + s + ")"
            return "".join(prefix) + s
        s = _render(f.left, _CTX_SUM) + " -> " + _render(f.right, _CTX_FORM)
        if ctx >= _CTX_SUM or prefix:
            s = "(" + s + ")"
        return "".join(prefix) + s


# ---------------------------------------------------------------------------
# Subformulas and the closure
# ---------------------------------------------------------------------------

def subformulas(f: Formula) -> list[Formula]:
    """All subformulas of f (including f), each once."""
    seen: dict[int, Formula] = {}
    stack = [f]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen[id(node)] = node
        if isinstance(node, Imp):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Box):
            stack.append(node.inner)
    return list(seen.values())


_CONSTANT_SIX = None


def _constant_six() -> tuple[Formula, ...]:
    global _CONSTANT_SIX
    if _CONSTANT_SIX is None:
        bb = box(BOT)
        bt = box(TOP)
        _CONSTANT_SIX = (bb, neg(bb), bt, neg(bt), TOP, BOT)
    return _CONSTANT_SIX


class ClosureSet:
    """The closure of a formula: its subformulas, their duals, and the six
    fixed constants, deduplicated and ordered by ascending code."""

    __slots__ = ("source", "formulas", "index", "dual", "boxed", "pairs")

    def __init__(self, source: Formula, members: set[Formula]):
        self.source = source
        self.formulas: tuple[Formula, ...] = tuple(sorted(members, key=code))
        self.index: dict[Formula, int] = {f: i for i, f in enumerate(self.formulas)}
        self.dual: tuple[int, ...] = tuple(
            self.index[negdual(f)] for f in self.formulas
        )
        self.boxed: tuple[int, ...] = tuple(
            i for i, f in enumerate(self.formulas) if isinstance(f, Box)
        )
        pairs = {frozenset((i, d)) for i, d in enumerate(self.dual)}
        self.pairs: tuple[frozenset, ...] = tuple(sorted(pairs, key=min))

    def __len__(self) -> int:
        return len(self.formulas)

    def __contains__(self, f: Formula) -> bool:
        return f in self.index

    def __iter__(self) -> Iterator[Formula]:
        return iter(self.formulas)


def closure(a: Formula) -> ClosureSet:
    subs = subformulas(a)
    members = set(subs)
    members.update(negdual(b) for b in subs)
    members.update(_constant_six())
    return ClosureSet(a, members)


# ---------------------------------------------------------------------------
# Godel codec
#
# Formulas encode to a self-delimiting bit string read as a natural number
# with a leading 1.  Codes strictly grow with the encoding length, so every
# proper subformula has a smaller code and code(~f) > code(f).  Prefix-free
# tags, tuned so the atom families s<k> / prg<k> / prgr<k> and small
# combinations of them land early in the enumeration:
#
#   00   s-atom      payload gamma(k)        variable "s<k>", k >= 1
#   01   Imp         payload bits(l) bits(r)
#   100  Bot
#   101  Box         payload bits(inner)
#   110  variable    payload gamma(value)    bijective base-37 name value
#   1110 prg-atom    payload gamma(k + 1)    variable "prg<k>"
#   1111 prgr-atom   payload gamma(k + 1)    variable "prgr<k>"
# ---------------------------------------------------------------------------

_S_RE = re.compile(r"s([1-9][0-9]*)\Z")
_PRG_RE = re.compile(r"prg(0|[1-9][0-9]*)\Z")
_PRGR_RE = re.compile(r"prgr(0|[1-9][0-9]*)\Z")

_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789_"
_CHAR_VAL = {c: i + 1 for i, c in enumerate(_ALPHABET)}


def _name_value(name: str) -> int:
    v = 0
    for c in name:
        v = v * 37 + _CHAR_VAL[c]
    return v


def _value_name(v: int) -> str:
    chars = []
    while v > 0:
        d = (v - 1) % 37 + 1
        chars.append(_ALPHABET[d - 1])
        v = (v - d) // 37
    return "".join(reversed(chars))


def _gamma(n: int) -> str:
    b = bin(n)[2:]
    return "0" * (len(b) - 1) + b


_code_cache: dict[int, int] = {}


def _bits(f: Formula) -> str:
    out: list[str] = []
    stack: list = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, str):
            out.append(node)
            continue
        if node is BOT:
            out.append("100")
        elif isinstance(node, Var):
            m = _S_RE.match(node.name)
            if m:
                out.append("00" + _gamma(int(m.group(1))))
                continue
            m = _PRG_RE.match(node.name)
            if m:
                out.append("1110" + _gamma(int(m.group(1)) + 1))
                continue
            m = _PRGR_RE.match(node.name)
            if m:
                out.append("1111" + _gamma(int(m.group(1)) + 1))
                continue
            out.append("110" + _gamma(_name_value(node.name)))
        elif isinstance(node, Imp):
            out.append("01")
            stack.append(node.right)
            stack.append(node.left)
        else:
            assert isinstance(node, Box)
            out.append("101")
            stack.append(node.inner)
    return "".join(out)


def code(f: Formula) -> int:
    """Injective, size-monotone Godel number of f."""
    c = _code_cache.get(id(f))
    if c is None:
        c = int("1" + _bits(f), 2)
        _code_cache[id(f)] = c
    return c


class _BitReader:
    __slots__ = ("s", "pos")

    def __init__(self, s: str):
        self.s = s
        self.pos = 0

    def read(self, n: int) -> Optional[str]:
        if self.pos + n > len(self.s):
            return None
        chunk = self.s[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def gamma(self) -> Optional[int]:
        zeros = 0
        while True:
            b = self.read(1)
            if b is None:
                return None
            if b == "1":
                break
            zeros += 1
        tail = self.read(zeros)
        if tail is None:
            return None
        return int("1" + tail, 2)


def _decode_bits(r: _BitReader) -> Optional[Formula]:
    # Iterative descent: pending holds incomplete Imp/Box constructors.
    pending: list = []
    while True:
        node: Optional[Formula] = None
        t = r.read(2)
        if t is None:
            return None
        if t == "00":
            k = r.gamma()
            if k is None:
                return None
            node = var(f"s{k}")
        elif t == "01":
            pending.append(("imp0",))
            continue
        else:
            b = r.read(1)
            if b is None:
                return None
            t3 = t + b
            if t3 == "100":
                node = BOT
            elif t3 == "101":
                pending.append(("box",))
                continue
            elif t3 == "110":
                v = r.gamma()
                if v is None:
                    return None
                name = _value_name(v)
                if name[0] not in "abcdefghijklmnopqrstuvwxyz":
                    return None
                if _S_RE.match(name) or _PRG_RE.match(name) or _PRGR_RE.match(name):
                    return None  # non-canonical: dedicated tag exists
                node = var(name)
            else:
                b2 = r.read(1)
                if b2 is None:
                    return None
                k = r.gamma()
                if k is None:
                    return None
                node = var(("prgr" if b2 == "1" else "prg") + str(k - 1))
        # Reduce completed constructors.
        while pending:
            top = pending[-1]
            if top[0] == "box":
                pending.pop()
                node = box(node)
            elif top[0] == "imp0":
                pending[-1] = ("imp1", node)
                break
            else:
                pending.pop()
                node = imp(top[1], node)
        else:
            return node


def decode(n: int) -> Optional[Formula]:
    """Inverse of code; None on non-codes."""
    if n < 1:
        return None
    bits = bin(n)[2:]
    r = _BitReader(bits[1:])
    f = _decode_bits(r)
    if f is None or r.pos != len(r.s):
        return None
    return f


_enum_cache: list[Formula] = []
_enum_next_code = 1


def _extend_enumeration(limit_code: int) -> None:
    global _enum_next_code
    while _enum_next_code <= limit_code:
        f = decode(_enum_next_code)
        if f is not None:
            _enum_cache.append(f)
        _enum_next_code += 1


def formulas_upto_code(m: int) -> list[Formula]:
    """The set F_m: all formulas with code <= m, ascending."""
    _extend_enumeration(m)
    # _enum_cache is ascending by code; binary search not worth it here.
    return [f for f in _enum_cache if code(f) <= m]


def enumerate_formulas() -> Iterator[Formula]:
    """The repetition-free enumeration of all formulas by ascending code."""
    t = 0
    while True:
        while t >= len(_enum_cache):
            _extend_enumeration(_enum_next_code + 4096)
        yield _enum_cache[t]
        t += 1


def formula_at(t: int) -> Formula:
    """The t-th formula (0-based) of the ascending-code enumeration."""
    while t >= len(_enum_cache):
        _extend_enumeration(_enum_next_code + 4096)
    return _enum_cache[t]


def formula_index(f: Formula) -> int:
    """Position of f in the ascending-code enumeration."""
    c = code(f)
    _extend_enumeration(c)
    lo, hi = 0, len(_enum_cache)
    while lo < hi:
        mid = (lo + hi) // 2
        if code(_enum_cache[mid]) < c:
            lo = mid + 1
        else:
            hi = mid
    if lo >= len(_enum_cache) or _enum_cache[lo] is not f:
        raise FormulaError("formula not found in enumeration")
    return lo


# ---------------------------------------------------------------------------
# Propositional abstraction (boxed subformulas and variables become atoms)
# ---------------------------------------------------------------------------

def prop_atoms(f: Formula) -> list[Formula]:
    """Propositionally atomic constituents of f in first-visit order."""
    seen: set[int] = set()
    out: list[Formula] = []

    def walk(node: Formula) -> None:
        if isinstance(node, (Var, Box)):
            if id(node) not in seen:
                seen.add(id(node))
                out.append(node)
        elif isinstance(node, Imp):
            walk(node.left)
            walk(node.right)

    walk(f)
    return out


def abstract(f: Formula, pool: Optional[dict[Formula, Formula]] = None) -> Formula:
    """The injection into propositional formulas: each distinct variable or
    boxed subformula maps to a fresh opaque atom a1, a2, ..."""
    if pool is None:
        pool = {}

    def walk(node: Formula) -> Formula:
        if node is BOT:
            return BOT
        if isinstance(node, (Var, Box)):
            atom = pool.get(node)
            if atom is None:
                atom = var(f"a{len(pool) + 1}")
                pool[node] = atom
            return atom
        assert isinstance(node, Imp)
        return imp(walk(node.left), walk(node.right))

    return walk(f)


_atom_pattern_cache: dict[tuple[int, int], int] = {}


def _atom_pattern(rows: int, i: int) -> int:
    """Truth column of atom i over `rows` assignments (bit j of assignment
    index selects atom j)."""
    pat = _atom_pattern_cache.get((rows, i))
    if pat is None:
        block = 1 << i
        period = block << 1
        unit = ((1 << block) - 1) << block
        reps = rows // period
        pat = unit * (((1 << (period * reps)) - 1) // ((1 << period) - 1))
        _atom_pattern_cache[(rows, i)] = pat
    return pat


def truth_column(f: Formula, atom_index: dict[Formula, int]) -> int:
    """Truth table of f as a bit column over 2^k assignments; assignment a
    sets atom i true iff bit i of a is set."""
    rows = 1 << len(atom_index)
    full = (1 << rows) - 1
    memo: dict[int, int] = {}

    def col(node: Formula) -> int:
        if node is BOT:
            return 0
        c = memo.get(id(node))
        if c is not None:
            return c
        i = atom_index.get(node)
        if i is not None:
            c = _atom_pattern(rows, i)
        else:
            assert isinstance(node, Imp)
            c = (~col(node.left) | col(node.right)) & full
        memo[id(node)] = c
        return c

    return col(f)


def is_tautology(f: Formula, atom_cap: int = 20) -> bool:
    """Decide propositional validity of f via its abstraction."""
    atoms = prop_atoms(f)
    if len(atoms) > atom_cap:
        raise CapacityError(f"{len(atoms)} atoms exceed the cap of {atom_cap}")
    atom_index = {a: i for i, a in enumerate(atoms)}
    rows = 1 << len(atoms)
    return truth_column(f, atom_index) == (1 << rows) - 1


def is_satisfiable(fs: list[Formula], atom_cap: int = 20) -> bool:
    """Joint propositional satisfiability of a finite formula set."""
    atoms: list[Formula] = []
    seen: set[int] = set()
    for f in fs:
        for a in prop_atoms(f):
            if id(a) not in seen:
                seen.add(id(a))
                atoms.append(a)
    if len(atoms) > atom_cap:
        raise CapacityError(f"{len(atoms)} atoms exceed the cap of {atom_cap}")
    atom_index = {a: i for i, a in enumerate(atoms)}
    rows = 1 << len(atoms)
    acc = (1 << rows) - 1
    for f in fs:
        acc &= truth_column(f, atom_index)
        if acc == 0:
            return False
    return True
