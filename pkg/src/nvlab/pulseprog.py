"""Pulse-sequence DSL: parser, timing compiler, and builtin sequences.

Grammar (one statement per line, `;` also separates; `#` starts a comment)::

    program    : statement*
    statement  : pulse | wait | repeat
    pulse      : "pulse" expr "on" ("m-1" | "m+1" | "sym") "phase" ("X" | "Y" | expr)
    wait       : "wait" expr
    repeat     : "repeat" (INT | "N") "{" statement* "}"
    expr       : term (("+" | "-") term)*
    term       : factor (("*" | "/") factor)*
    factor     : NUMBER | PINUM | "pi" | "tau" | "N" | "(" expr ")" | "-" factor

PINUM is a number glued to pi ("3pi", "0.5pi"), so the usual angle spellings
pi, pi/2, pi/4, 3pi/2 all parse.  `tau` is the total free-evolution time and
`N` the sequence order; both are bound at compile time.  Literal-only
subexpressions fold during parsing, symbolic ones at compile.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .spincore import (
    PulseSpec,
    TRANSITION_MINUS,
    TRANSITION_PLUS,
    TRANSITION_SYM,
)

SYMBOLS = ("tau", "N", "pi")


class PulseSyntaxError(ValueError):
    """Parse failure with source position."""

    def __init__(self, message, line, col):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class CompileError(ValueError):
    """Timing or symbol failure while compiling a program."""


# --- AST ------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Sym, BinOp]


@dataclass(frozen=True)
class Pulse:
    angle: Expr
    transition: str
    axis_phase: Expr


@dataclass(frozen=True)
class Wait:
    duration: Expr


@dataclass(frozen=True)
class Repeat:
    count: Union[int, str]  # literal or the symbol "N"
    body: tuple


Statement = Union[Pulse, Wait, Repeat]


@dataclass(frozen=True)
class ProgramAST:
    statements: tuple


@dataclass(frozen=True)
class TimedInstruction:
    """One compiled step: an instantaneous pulse or a delay.

    `start` is the absolute time (s) the instruction begins; pulses have zero
    duration and carry a PulseSpec.
    """

    kind: str  # "pulse" | "delay"
    start: float
    duration: float = 0.0
    pulse: PulseSpec | None = None


# --- Lexer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<sep>[\n;]+)
  | (?P<trans>m-1|m\+1)
  | (?P<pinum>(\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?pi\b)
  | (?P<number>(\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}()+\-*/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(text):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PulseSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        raw = m.group()
        if kind not in ("ws", "comment"):
            if kind == "sep":
                if tokens and tokens[-1].kind != "sep":
                    tokens.append(_Token("sep", ";", line, col))
            else:
                tokens.append(_Token(kind, raw, line, col))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            col = len(raw) - raw.rfind("\n")
        else:
            col += len(raw)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


# --- Parser ---------------------------------------------------------------

class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def _advance(self):
        tok = self.tok
        self.i += 1
        return tok

    def _fail(self, expected):
        tok = self.tok
        got = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise PulseSyntaxError(f"expected {expected}, got {got}", tok.line, tok.col)

    def _expect_name(self, word):
        if self.tok.kind == "name" and self.tok.text == word:
            return self._advance()
        self._fail(f"'{word}'")

    def _expect_punct(self, ch):
        if self.tok.kind == "punct" and self.tok.text == ch:
            return self._advance()
        self._fail(f"'{ch}'")

    def _skip_seps(self):
        while self.tok.kind == "sep":
            self._advance()

    def parse_program(self):
        stmts = self._statements(stop="eof")
        if self.tok.kind != "eof":
            self._fail("statement")
        return ProgramAST(tuple(stmts))

    def _statements(self, stop):
        stmts = []
        self._skip_seps()
        while self.tok.kind != "eof" and not (
            stop == "}" and self.tok.kind == "punct" and self.tok.text == "}"
        ):
            stmts.append(self._statement())
            if self.tok.kind == "sep":
                self._skip_seps()
            elif self.tok.kind != "eof" and not (
                self.tok.kind == "punct" and self.tok.text == "}"
            ):
                self._fail("end of statement")
        return stmts

    def _statement(self):
        tok = self.tok
        if tok.kind == "name" and tok.text == "pulse":
            return self._pulse()
        if tok.kind == "name" and tok.text == "wait":
            self._advance()
            return Wait(self._expr())
        if tok.kind == "name" and tok.text == "repeat":
            return self._repeat()
        self._fail("'pulse', 'wait' or 'repeat'")

    def _pulse(self):
        self._expect_name("pulse")
        angle = self._expr()
        self._expect_name("on")
        tok = self.tok
        if tok.kind == "trans":
            transition = self._advance().text
        elif tok.kind == "name" and tok.text == "sym":
            self._advance()
            transition = TRANSITION_SYM
        else:
            self._fail("'m-1', 'm+1' or 'sym'")
        self._expect_name("phase")
        tok = self.tok
        if tok.kind == "name" and tok.text == "X":
            self._advance()
            phase: Expr = Num(0.0)
        elif tok.kind == "name" and tok.text == "Y":
            self._advance()
            phase = BinOp("/", Sym("pi"), Num(2.0))
        else:
            phase = self._expr()
        return Pulse(angle, transition, phase)

    def _repeat(self):
        self._expect_name("repeat")
        tok = self.tok
        if tok.kind == "number":
            self._advance()
            count: Union[int, str] = int(float(tok.text))
            if count < 1 or count != float(tok.text):
                raise PulseSyntaxError("repeat count must be a positive integer",
                                       tok.line, tok.col)
        elif tok.kind == "name" and tok.text == "N":
            self._advance()
            count = "N"
        else:
            self._fail("integer or 'N'")
        self._expect_punct("{")
        body = self._statements(stop="}")
        self._expect_punct("}")
        if not body:
            raise PulseSyntaxError("repeat body must not be empty", tok.line, tok.col)
        return Repeat(count, tuple(body))

    def _expr(self):
        node = self._term()
        while self.tok.kind == "punct" and self.tok.text in "+-":
            op = self._advance().text
            node = _fold(BinOp(op, node, self._term()), self.tok)
        return node

    def _term(self):
        node = self._factor()
        while self.tok.kind == "punct" and self.tok.text in "*/":
            op = self._advance().text
            node = _fold(BinOp(op, node, self._factor()), self.tok)
        return node

    def _factor(self):
        tok = self.tok
        if tok.kind == "number":
            self._advance()
            return Num(float(tok.text))
        if tok.kind == "pinum":
            self._advance()
            coeff = float(tok.text[:-2])
            return BinOp("*", Num(coeff), Sym("pi"))
        if tok.kind == "name":
            if tok.text in SYMBOLS:
                self._advance()
                return Sym(tok.text)
            raise PulseSyntaxError(f"unknown symbol {tok.text!r}", tok.line, tok.col)
        if tok.kind == "punct" and tok.text == "(":
            self._advance()
            node = self._expr()
            self._expect_punct(")")
            return node
        if tok.kind == "punct" and tok.text == "-":
            self._advance()
            return _fold(BinOp("-", Num(0.0), self._factor()), tok)
        self._fail("number, symbol or '('")


def _fold(node, tok):
    """Collapse literal-only BinOps; surfaces division by zero at parse time."""
    if isinstance(node, BinOp) and isinstance(node.left, Num) and isinstance(node.right, Num):
        if node.op == "/" and node.right.value == 0.0:
            raise PulseSyntaxError("division by zero in constant expression",
                                   tok.line, tok.col)
        return Num(_apply(node.op, node.left.value, node.right.value))
    return node


def _apply(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b


def parse_pseq(text: str) -> ProgramAST:
    """Parse DSL source into a ProgramAST; raises PulseSyntaxError on failure."""
    return _Parser(_lex(text)).parse_program()


# --- Printer --------------------------------------------------------------

def _format_expr(node, parent_prec=0):
    if isinstance(node, Num):
        v = node.value
        return str(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)
    if isinstance(node, Sym):
        return node.name
    prec = 1 if node.op in "+-" else 2
    left = _format_expr(node.left, prec)
    right = _format_expr(node.right, prec + 1)
    if node.op == "*" and isinstance(node.left, Num) and node.right == Sym("pi"):
        v = node.left.value
        if v == int(v) and v > 0:
            return f"{int(v)}pi"
    text = f"{left} {node.op} {right}" if prec == 1 else f"{left}{node.op}{right}"
    return f"({text})" if prec < parent_prec else text


def _format_phase(node):
    if node == Num(0.0):
        return "X"
    if node == BinOp("/", Sym("pi"), Num(2.0)):
        return "Y"
    return _format_expr(node)


def print_program(ast: ProgramAST) -> str:
    """Render an AST back to DSL source; parse(print(ast)) == ast."""
    lines = []

    def emit(stmts, indent):
        pad = "    " * indent
        for s in stmts:
            if isinstance(s, Pulse):
                lines.append(f"{pad}pulse {_format_expr(s.angle)} on {s.transition} "
                             f"phase {_format_phase(s.axis_phase)}")
            elif isinstance(s, Wait):
                lines.append(f"{pad}wait {_format_expr(s.duration)}")
            else:
                lines.append(f"{pad}repeat {s.count} {{")
                emit(s.body, indent + 1)
                lines.append(f"{pad}}}")

    emit(ast.statements, 0)
    return "\n".join(lines) + "\n"


# --- Compiler -------------------------------------------------------------

def _eval_expr(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Sym):
        if node.name not in env:
            raise CompileError(f"unbound symbol {node.name!r}")
        return env[node.name]
    a = _eval_expr(node.left, env)
    b = _eval_expr(node.right, env)
    if node.op == "/" and b == 0.0:
        raise CompileError("division by zero")
    return _apply(node.op, a, b)


def _flatten(stmts, env, out):
    for s in stmts:
        if isinstance(s, Repeat):
            count = s.count
            if count == "N":
                count = int(env["N"])
            for _ in range(count):
                _flatten(s.body, env, out)
        else:
            out.append(s)


def compile_program(ast: ProgramAST, tau: float, n: int = 1) -> list[TimedInstruction]:
    """Expand repeats, bind tau and N, and assign absolute times.

    Validates that the delays sum to tau within 1e-15 relative (compensated
    summation); the sub-tolerance residual is folded into the last delay so
    the exported delays sum to tau exactly.
    """
    if tau <= 0:
        raise CompileError("tau must be positive")
    if n < 1:
        raise CompileError("N must be >= 1")
    env = {"tau": float(tau), "N": float(n), "pi": math.pi}
    flat: list = []
    _flatten(ast.statements, env, flat)

    delays = []
    steps = []
    for s in flat:
        if isinstance(s, Wait):
            d = _eval_expr(s.duration, env)
            if d < 0:
                raise CompileError(f"negative delay {d:g} s")
            delays.append(d)
            steps.append(("delay", d))
        else:
            angle = _eval_expr(s.angle, env)
            phase = _eval_expr(s.axis_phase, env)
            steps.append(("pulse", PulseSpec(s.transition, angle, phase)))

    total = math.fsum(delays)
    if abs(total - tau) > 1e-15 * abs(tau):
        raise CompileError(
            f"total delay {total:.9e} s does not match tau {tau:.9e} s")
    residual = tau - total

    out = []
    t = 0.0
    last_delay = None
    for kind, payload in steps:
        if kind == "delay":
            out.append(TimedInstruction("delay", start=t, duration=payload))
            last_delay = len(out) - 1
            t += payload
        else:
            out.append(TimedInstruction("pulse", start=t, pulse=payload))
    if residual != 0.0 and last_delay is not None:
        old = out[last_delay]
        out[last_delay] = TimedInstruction("delay", start=old.start,
                                           duration=old.duration + residual)
    return out


def instructions_to_json(program: list[TimedInstruction]) -> list[dict]:
    """Timed instructions as plain dicts (times in seconds, angles in rad)."""
    rows = []
    for ins in program:
        if ins.kind == "delay":
            rows.append({"kind": "delay", "start_s": ins.start,
                         "duration_s": ins.duration})
        else:
            rows.append({"kind": "pulse", "start_s": ins.start,
                         "transition": ins.pulse.transition,
                         "angle_rad": ins.pulse.angle,
                         "axis_phase_rad": ins.pulse.axis_phase})
    return rows


# --- Builtin sequences ----------------------------------------------------

_PI = Sym("pi")
_TAU = Sym("tau")
_HALF_PI = BinOp("/", _PI, Num(2.0))
_X = Num(0.0)
_Y = _HALF_PI

BUILTIN_KINDS = ("ramsey", "hahn", "te_zero_field", "t_ramsey", "te_field",
                 "cpmg", "tcpmg")


def _p(angle, transition, phase=_X):
    return Pulse(angle, transition, phase)


def _triple_block():
    """Composite pi(-1) pi(+1) pi(-1): swaps the |+1> and |-1> populations."""
    return (_p(_PI, TRANSITION_MINUS), _p(_PI, TRANSITION_PLUS),
            _p(_PI, TRANSITION_MINUS))


def _angle_expr(value):
    """Symbolic spelling for the common readout angles, literal otherwise."""
    if value == math.pi / 2:
        return _HALF_PI
    if value == 3 * math.pi / 2:
        return BinOp("/", BinOp("*", Num(3.0), _PI), Num(2.0))
    if value == math.pi:
        return _PI
    return Num(value)


def builtin(kind: str, n: int = 1, readout_angle: float | None = None) -> ProgramAST:
    """Canonical AST for one of the sequences used in the experiments.

    tcpmg(N) places 2N triple-echo blocks at the CPMG-2N positions
    (2k-1)*tau/4N; cpmg(N) places N X-phase pi pulses at (2k-1)*tau/2N framed
    by Y-phase pi/2 and 3pi/2 pulses.  One triple block moves the coherence
    from the (0,-1) to the (0,+1) subspace, so the odd-block sequences
    (t_ramsey, te_field) read out on m+1.  readout_angle overrides the final
    pulse angle (rad); defaults keep traces bright at zero phase except for
    t_ramsey/te_field whose pi/2 readout makes zero accumulated phase dark.
    """
    if kind not in BUILTIN_KINDS:
        raise ValueError(f"unknown builtin kind {kind!r}")
    if n < 1:
        raise ValueError("N must be >= 1")

    if kind == "ramsey":
        close = _angle_expr(readout_angle) if readout_angle else _HALF_PI
        stmts = (_p(_HALF_PI, TRANSITION_MINUS), Wait(_TAU),
                 _p(close, TRANSITION_MINUS))
    elif kind == "hahn":
        close = _angle_expr(readout_angle) if readout_angle else _angle_expr(3 * math.pi / 2)
        half = BinOp("/", _TAU, Num(2.0))
        stmts = (_p(_HALF_PI, TRANSITION_MINUS, _Y), Wait(half),
                 _p(_PI, TRANSITION_MINUS), Wait(half),
                 _p(close, TRANSITION_MINUS, _Y))
    elif kind == "te_zero_field":
        close = _angle_expr(readout_angle) if readout_angle else _angle_expr(3 * math.pi / 4)
        quarter = BinOp("/", _PI, Num(4.0))
        half = BinOp("/", _TAU, Num(2.0))
        stmts = (_p(quarter, TRANSITION_SYM), Wait(half),
                 _p(_PI, TRANSITION_SYM), Wait(half),
                 _p(close, TRANSITION_SYM))
    elif kind in ("t_ramsey", "te_field"):
        close = _angle_expr(readout_angle) if readout_angle else _HALF_PI
        half = BinOp("/", _TAU, Num(2.0))
        stmts = (_p(_HALF_PI, TRANSITION_MINUS), Wait(half),
                 *_triple_block(), Wait(half),
                 _p(close, TRANSITION_PLUS))
    elif kind == "cpmg":
        close = _angle_expr(readout_angle) if readout_angle else _angle_expr(3 * math.pi / 2)
        gap = BinOp("/", _TAU, Num(2.0 * n))
        cell = (Wait(gap), _p(_PI, TRANSITION_MINUS), Wait(gap))
        stmts = (_p(_HALF_PI, TRANSITION_MINUS, _Y), Repeat(n, cell),
                 _p(close, TRANSITION_MINUS, _Y))
    else:  # tcpmg
        close = _angle_expr(readout_angle) if readout_angle else _angle_expr(3 * math.pi / 2)
        gap = BinOp("/", _TAU, Num(4.0 * n))
        cell = (Wait(gap), *_triple_block(), Wait(gap))
        stmts = (_p(_HALF_PI, TRANSITION_MINUS), Repeat(2 * n, cell),
                 _p(close, TRANSITION_MINUS))
    return ProgramAST(stmts)
