"""Proof-script checker for the six Hilbert systems.

A script is a header ``logic: <NAME>`` followed by numbered lines
``n. <formula> ; <justification>`` with justifications

    taut | axP | axD | ax4 | mp i j | nec i | rm i

Axiom schemata are matched structurally against the canonical desugared
shapes, so every substitution instance is accepted and no uniform
substitution rule is needed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .decide import Logic
from .syntax import (
    BOT,
    Box,
    Formula,
    FormulaError,
    Imp,
    box,
    imp,
    is_neg,
    is_tautology,
    neg,
    parse,
    render,
)

TAUT_ATOM_CAP = 20


@dataclass(frozen=True)
class ProofLine:
    number: int
    formula: Formula
    justification: tuple  # ("taut",) | ("axP",) | ... | ("mp", i, j) | ...


@dataclass(frozen=True)
class ProofScript:
    logic: Logic
    lines: tuple[ProofLine, ...]

    @property
    def conclusion(self) -> Formula:
        return self.lines[-1].formula


@dataclass(frozen=True)
class ProofResult:
    ok: bool
    line: Optional[int] = None
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.ok


def _match_ax_p(f: Formula) -> bool:
    # ~[]#f
    return is_neg(f) and isinstance(f.left, Box) and f.left.inner is BOT  # type: ignore[union-attr]


def _match_ax_d(f: Formula) -> bool:
    # ~([]A & []~A) desugars to ~~([]A -> ~[]~A)
    if not (is_neg(f) and is_neg(f.left)):  # type: ignore[union-attr]
        return False
    g = f.left.left  # type: ignore[union-attr]
    if not (isinstance(g, Imp) and isinstance(g.left, Box) and is_neg(g.right)):
        return False
    h = g.right.left
    if not isinstance(h, Box):
        return False
    return h.inner is neg(g.left.inner)


def _match_ax_4(f: Formula) -> bool:
    # []A -> [][]A
    return (
        isinstance(f, Imp)
        and isinstance(f.left, Box)
        and isinstance(f.right, Box)
        and isinstance(f.right.inner, Box)
        and f.right.inner.inner is f.left.inner
    )


def check_proof(script: ProofScript) -> ProofResult:
    logic = script.logic
    by_number: dict[int, Formula] = {}

    def fail(line: ProofLine, reason: str) -> ProofResult:
        return ProofResult(False, line.number, reason)

    for line in script.lines:
        just = line.justification
        kind = just[0]
        for ref in just[1:]:
            if ref not in by_number:
                return fail(line, f"cites line {ref}, which does not precede it")
        if kind == "taut":
            if not is_tautology(line.formula, TAUT_ATOM_CAP):
                return fail(line, "not a tautology")
        elif kind == "axP":
            if not logic.has_p:
                return fail(line, f"axiom P not available in {logic.value}")
            if not _match_ax_p(line.formula):
                return fail(line, "not of the form ~[]#f")
        elif kind == "axD":
            if not logic.has_d:
                return fail(line, f"axiom D not available in {logic.value}")
            if not _match_ax_d(line.formula):
                return fail(line, "not an instance of ~([]A & []~A)")
        elif kind == "ax4":
            if not logic.has_f:
                return fail(line, f"axiom 4 not available in {logic.value}")
            if not _match_ax_4(line.formula):
                return fail(line, "not an instance of []A -> [][]A")
        elif kind == "mp":
            i, j = just[1], just[2]
            if by_number[j] is not imp(by_number[i], line.formula):
                return fail(line, f"line {j} is not (line {i} -> this line)")
        elif kind == "nec":
            (i,) = just[1:]
            if line.formula is not box(by_number[i]):
                return fail(line, f"this line is not []-of line {i}")
        elif kind == "rm":
            (i,) = just[1:]
            premise = by_number[i]
            if not isinstance(premise, Imp):
                return fail(line, f"line {i} is not an implication")
            want = imp(box(premise.left), box(premise.right))
            if line.formula is not want:
                return fail(line, f"this line is not []-monotone image of line {i}")
        else:
            return fail(line, f"unknown justification {kind!r}")
        by_number[line.number] = line.formula
    return ProofResult(True)


# ---------------------------------------------------------------------------
# Script text format
# ---------------------------------------------------------------------------

_LINE_RE = re.compile(r"(\d+)\.\s*(.*?)\s*;\s*(.*)\Z")
_JUST_RE = re.compile(
    r"(?:(taut|axP|axD|ax4)|mp\s+(\d+)\s+(\d+)|nec\s+(\d+)|rm\s+(\d+))\Z"
)


class ScriptError(FormulaError):
    pass


def parse_script(text: str) -> ProofScript:
    logic: Optional[Logic] = None
    lines: list[ProofLine] = []
    seen: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        # Whole-line comments only: formulas may contain #t / #f.
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("logic:"):
            name = stripped[len("logic:") :].strip()
            try:
                logic = Logic(name)
            except ValueError:
                raise ScriptError(f"line {lineno}: unknown logic {name!r}") from None
            continue
        m = _LINE_RE.match(stripped)
        if m is None:
            raise ScriptError(f"line {lineno}: expected 'n. <formula> ; <justification>'")
        number = int(m.group(1))
        if number in seen:
            raise ScriptError(f"line {lineno}: duplicate line number {number}")
        seen.add(number)
        formula = parse(m.group(2))
        jm = _JUST_RE.match(m.group(3).strip())
        if jm is None:
            raise ScriptError(f"line {lineno}: bad justification {m.group(3)!r}")
        if jm.group(1):
            just: tuple = (jm.group(1),)
        elif jm.group(2):
            just = ("mp", int(jm.group(2)), int(jm.group(3)))
        elif jm.group(4):
            just = ("nec", int(jm.group(4)))
        else:
            just = ("rm", int(jm.group(5)))
        for ref in just[1:]:
            if ref >= number:
                raise ScriptError(
                    f"line {lineno}: cited line {ref} does not strictly precede {number}"
                )
        lines.append(ProofLine(number, formula, just))
    if logic is None:
        raise ScriptError("missing 'logic:' header")
    if not lines:
        raise ScriptError("empty proof")
    return ProofScript(logic, tuple(lines))


def render_script(script: ProofScript) -> str:
    out = [f"logic: {script.logic.value}"]
    for line in script.lines:
        j = line.justification
        jtext = j[0] if len(j) == 1 else j[0] + " " + " ".join(str(x) for x in j[1:])
        out.append(f"{line.number}. {render(line.formula)} ; {jtext}")
    return "\n".join(out) + "\n"
