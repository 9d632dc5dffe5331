"""Tokenizer for the policy language.

Brace-delimited, indentation-free; `#` starts a comment running to end of
line. Positions are 1-based (line, col) and every token records where it
starts so diagnostics can point at source.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import PolicySyntaxError

KEYWORDS = {
    "def", "if", "elif", "else", "for", "in", "return",
    "and", "or", "not", "true", "false", "none",
}

# Longest first so `==` wins over `=`.
OPERATORS = [
    "==", "!=", "<=", ">=",
    "{", "}", "(", ")", "[", "]",
    ",", ":", ".", "+", "-", "*", "/", "%", "<", ">", "=",
]

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\", "r": "\r"}

_ASCII_LETTERS = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
_ASCII_DIGITS = frozenset("0123456789")


def _is_name_start(ch: str) -> bool:
    return ch in _ASCII_LETTERS or ch == "_"


def _is_name_part(ch: str) -> bool:
    return ch in _ASCII_LETTERS or ch in _ASCII_DIGITS or ch == "_"


@dataclass(frozen=True)
class Token:
    kind: str  # NAME KW INT FLOAT STRING OP EOF
    value: str | int | float
    line: int
    col: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        return f"`{self.value}`"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(source)

    def advance(count: int = 1) -> None:
        nonlocal i, line, col
        for _ in range(count):
            if i < n and source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance()
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                advance()
            continue
        start_line, start_col = line, col
        if _is_name_start(ch):
            j = i
            while j < n and _is_name_part(source[j]):
                j += 1
            word = source[i:j]
            kind = "KW" if word in KEYWORDS else "NAME"
            tokens.append(Token(kind, word, start_line, start_col))
            advance(j - i)
            continue
        if ch in _ASCII_DIGITS:
            j = i
            while j < n and source[j] in _ASCII_DIGITS:
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1] in _ASCII_DIGITS:
                is_float = True
                j += 1
                while j < n and source[j] in _ASCII_DIGITS:
                    j += 1
            text = source[i:j]
            if is_float:
                tokens.append(Token("FLOAT", float(text), start_line, start_col))
            else:
                tokens.append(Token("INT", int(text), start_line, start_col))
            advance(j - i)
            continue
        if ch == '"':
            advance()
            parts: list[str] = []
            while True:
                if i >= n or source[i] == "\n":
                    raise PolicySyntaxError("unterminated string literal", start_line, start_col)
                c = source[i]
                if c == '"':
                    advance()
                    break
                if c == "\\":
                    advance()
                    if i >= n:
                        raise PolicySyntaxError("unterminated string literal", start_line, start_col)
                    esc = source[i]
                    if esc not in _ESCAPES:
                        raise PolicySyntaxError(f"invalid escape sequence \\{esc}", line, col - 1)
                    parts.append(_ESCAPES[esc])
                    advance()
                    continue
                parts.append(c)
                advance()
            tokens.append(Token("STRING", "".join(parts), start_line, start_col))
            continue
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token("OP", op, start_line, start_col))
                advance(len(op))
                break
        else:
            raise PolicySyntaxError(f"unexpected character {ch!r}", start_line, start_col)

    tokens.append(Token("EOF", "", line, col))
    return tokens
