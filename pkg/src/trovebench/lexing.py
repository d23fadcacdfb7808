"""Lightweight lexer shared by program-complexity scoring and tool-call detection.

Deliberately grammar-light: comments are dropped, every string literal is a
single token, and everything else splits into identifiers, numbers, and
operator/punctuation tokens.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(
    r"""
      (?P<comment>\#[^\n]*)
    | (?P<string>
        [rbufRBUF]{0,2}
        (?: '''(?:[^\\]|\\.)*?'''
          | \"\"\"(?:[^\\]|\\.)*?\"\"\"
          | '(?:[^'\\\n]|\\.)*'
          | "(?:[^"\\\n]|\\.)*"
        )
      )
    | (?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+)
    | (?P<name>[A-Za-z_]\w*)
    | (?P<op>
        \*\*=? | //=? | <<=? | >>=? | <= | >= | == | != | -> | :=
      | [+\-*/%@&|^=<>] =?
      | [~:;,.()\[\]{}]
      )
    """,
    re.VERBOSE,
)


def tokenize_source(source: str) -> list[str]:
    """All lexical tokens of ``source`` except comments and whitespace."""
    tokens: list[str] = []
    for match in _TOKEN_RE.finditer(source):
        if match.lastgroup == "comment":
            continue
        tokens.append(match.group())
    return tokens


def called_names(source: str) -> set[str]:
    """Identifiers used with call syntax, i.e. a name directly followed by ``(``.

    Definitions (``def name(...)`` / ``class name(...)``) do not count as calls.
    """
    tokens = tokenize_source(source)
    names: set[str] = set()
    for i, tok in enumerate(tokens[:-1]):
        if not re.fullmatch(r"[A-Za-z_]\w*", tok):
            continue
        if tokens[i + 1] != "(":
            continue
        if i > 0 and tokens[i - 1] in ("def", "class"):
            continue
        names.add(tok)
    return names
