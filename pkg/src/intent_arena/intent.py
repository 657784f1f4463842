"""Intent strings to goal specs.

Grammar (case-insensitive, whitespace-tolerant)::

    intent     := "reduce" "total" "power" "by" amount ("while" constraint ("and" constraint)*)?
    amount     := NUMBER "%" | NUMBER ("W" | "mW")
    constraint := "rate" "of" "user" INDEX ">=" NUMBER ("kbps" | "bps")

NUMBER is a non-negative decimal with a dot as separator; INDEX is a
1-based user number. Amounts are kept as exact decimals in W and bit/s.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

from .game import AbsoluteSaving, GoalSpec, PowerSaving, RelativeSaving


class IntentError(ValueError):
    """Parse diagnostic: position, expected tokens and the offending lexeme."""

    def __init__(self, text: str, offset: int, expected, lexeme: str, message: str = ""):
        self.text = text
        self.offset = offset
        self.byte_offset = len(text[:offset].encode("utf-8"))
        self.expected = tuple(sorted(expected))
        self.lexeme = lexeme
        detail = message or f"expected {' or '.join(self.expected)}"
        found = repr(lexeme) if lexeme else "end of input"
        super().__init__(f"byte {self.byte_offset}: {detail}, found {found}")


@dataclass(frozen=True)
class _Tok:
    kind: str  # WORD, NUMBER, SYM, END
    text: str
    offset: int


_TOKEN = re.compile(r"(?P<ws>\s+)|(?P<num>[0-9]+(?:\.[0-9]+)?)|(?P<word>[A-Za-z]+)|(?P<sym>>=|%)")


def _lex(text: str) -> list:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            toks.append(_Tok("BAD", text[pos], pos))
            return toks
        if m.lastgroup == "num":
            toks.append(_Tok("NUMBER", m.group(), pos))
        elif m.lastgroup == "word":
            toks.append(_Tok("WORD", m.group().lower(), pos))
        elif m.lastgroup == "sym":
            toks.append(_Tok("SYM", m.group(), pos))
        pos = m.end()
    toks.append(_Tok("END", "", len(text)))
    return toks


@dataclass(frozen=True)
class IntentSpec:
    """A parsed intent. ``floors_bps`` maps 1-based user numbers to floors in bit/s."""

    saving: PowerSaving
    floors_bps: tuple = ()  # ((user, Decimal bps), ...) sorted by user
    raw: str = field(default="", compare=False)

    def floor_map(self) -> dict:
        return dict(self.floors_bps)

    def to_goal(self, num_users: int, max_rounds: int, base_floors_bps=None) -> GoalSpec:
        """Resolve against a K-user network; users without an override keep ``base_floors_bps``."""
        floors = [0.0] * num_users if base_floors_bps is None else [float(f) for f in base_floors_bps]
        if len(floors) != num_users:
            raise ValueError(f"{len(floors)} base floors for {num_users} users")
        for user, bps in self.floors_bps:
            if user > num_users:
                raise ValueError(f"intent names user {user} but the network has {num_users} users")
            floors[user - 1] = float(bps)
        return GoalSpec(self.saving, tuple(floors), max_rounds)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected, message: str = "", tok: Optional[_Tok] = None):
        tok = tok or self.tok
        raise IntentError(self.text, tok.offset, expected, tok.text, message)

    def word(self, *words: str) -> str:
        if self.tok.kind == "WORD" and self.tok.text in words:
            w = self.tok.text
            self.i += 1
            return w
        self.fail([f'"{w}"' for w in words])

    def sym(self, s: str) -> None:
        if self.tok.kind == "SYM" and self.tok.text == s:
            self.i += 1
            return
        self.fail([f'"{s}"'])

    def number(self) -> tuple:
        tok = self.tok
        if tok.kind != "NUMBER":
            self.fail(["NUMBER"])
        self.i += 1
        if self.tok.kind == "BAD" and self.tok.text == ",":
            self.fail(["unit"], "decimal separator must be '.'")
        return Decimal(tok.text), tok

    def intent(self) -> IntentSpec:
        for w in ("reduce", "total", "power", "by"):
            self.word(w)
        saving = self.amount()
        floors = {}
        if self.tok.kind == "WORD" and self.tok.text == "while":
            self.i += 1
            self.constraint(floors)
            while self.tok.kind == "WORD" and self.tok.text == "and":
                self.i += 1
                self.constraint(floors)
        if self.tok.kind != "END":
            self.fail(['"and"', "end of input"] if floors else ['"while"', "end of input"])
        return IntentSpec(saving, tuple(sorted(floors.items())), self.text)

    def amount(self) -> PowerSaving:
        value, tok = self.number()
        if self.tok.kind == "SYM" and self.tok.text == "%":
            self.i += 1
            if value > 100:
                self.fail(["NUMBER <= 100"], "percentage above 100", tok)
            return RelativeSaving(value / 100)
        unit = self.word("w", "mw")
        return AbsoluteSaving(value if unit == "w" else value / 1000)

    def constraint(self, floors: dict) -> None:
        for w in ("rate", "of", "user"):
            self.word(w)
        tok = self.tok
        if tok.kind != "NUMBER" or not tok.text.isdigit():
            self.fail(["INDEX"])
        user = int(tok.text)
        if user < 1:
            self.fail(["INDEX >= 1"], "user numbers start at 1")
        if user in floors:
            self.fail(["INDEX"], f"user {user} constrained twice")
        self.i += 1
        self.sym(">=")
        value, _ = self.number()
        unit = self.word("kbps", "bps")
        floors[user] = value * 1000 if unit == "kbps" else value


def parse_intent(text: str) -> IntentSpec:
    """Parse an intent string; raises :class:`IntentError` with a position on bad input."""
    if not isinstance(text, str):
        raise TypeError("intent must be a string")
    return _Parser(text).intent()


def _dec(d: Decimal) -> str:
    return format(d.normalize(), "f")


def format_intent(spec: IntentSpec) -> str:
    """Canonical one-line form; floors are listed in user order, in kbps."""
    if isinstance(spec.saving, RelativeSaving):
        head = f"reduce total power by {_dec(spec.saving.fraction * 100)}%"
    else:
        head = f"reduce total power by {_dec(spec.saving.watts)} W"
    clauses = [f"rate of user {u} >= {_dec(Decimal(bps) / 1000)} kbps" for u, bps in sorted(spec.floors_bps)]
    if clauses:
        return head + " while " + " and ".join(clauses)
    return head
