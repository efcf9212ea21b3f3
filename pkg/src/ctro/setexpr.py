"""Set-algebra expression language over named certificate stores.

Grammar:
    expr := term (('|' | '-') term)*
    term := atom ('&' atom)*
    atom := IDENT | '(' expr ')'
    IDENT = double-quoted string or a run of [A-Za-z0-9_.-]

'&' binds tighter than '|' and '-'; '|' and '-' are left-associative at
equal precedence.  Note the identifier charset includes '-', so the
difference operator needs surrounding whitespace ("A - B"); "A-B" is a
single identifier.
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple, Union

from .certs import CertBlob, CertFingerprint, DistinctStore


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnboundIdentifier(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unbound identifier: {self.name}"


@dataclass(frozen=True)
class Name:
    value: str


@dataclass(frozen=True)
class Op:
    kind: str  # '&', '|' or '-'
    left: "SetExpr"
    right: "SetExpr"


SetExpr = Union[Name, Op]

_IDENT_CHARS = set(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_.-"
)


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    """Returns (kind, value, offset) triples; kinds: ident, op, lparen, rparen."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "&|":
            tokens.append(("op", c, i))
            i += 1
        elif c == "(":
            tokens.append(("lparen", c, i))
            i += 1
        elif c == ")":
            tokens.append(("rparen", c, i))
            i += 1
        elif c == '"':
            start = i
            i += 1
            out = []
            while i < n and text[i] != '"':
                if text[i] == "\\" and i + 1 < n and text[i + 1] in '\\"':
                    out.append(text[i + 1])
                    i += 2
                else:
                    out.append(text[i])
                    i += 1
            if i >= n:
                raise ParseError("unterminated string", start)
            i += 1
            tokens.append(("ident", "".join(out), start))
        elif c in _IDENT_CHARS:
            start = i
            while i < n and text[i] in _IDENT_CHARS:
                i += 1
            word = text[start:i]
            if word == "-":
                tokens.append(("op", "-", start))
            else:
                tokens.append(("ident", word, start))
        else:
            raise ParseError(f"unexpected character {c!r}", i)
    return tokens


class _Parser:
    def __init__(self, tokens, text_len: int):
        self.tokens = tokens
        self.pos = 0
        self.text_len = text_len

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _error_offset(self) -> int:
        # for unexpected end of input, anchor the error at the last token
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][2]
        if self.tokens:
            return self.tokens[-1][2]
        return self.text_len

    def parse_expr(self) -> SetExpr:
        node = self.parse_term()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in "|-":
                self.pos += 1
                node = Op(tok[1], node, self.parse_term())
            else:
                return node

    def parse_term(self) -> SetExpr:
        node = self.parse_atom()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] == "&":
                self.pos += 1
                node = Op("&", node, self.parse_atom())
            else:
                return node

    def parse_atom(self) -> SetExpr:
        tok = self._peek()
        if tok is None:
            raise ParseError("expected identifier or '('", self._error_offset())
        kind, value, offset = tok
        if kind == "ident":
            self.pos += 1
            return Name(value)
        if kind == "lparen":
            self.pos += 1
            node = self.parse_expr()
            closing = self._peek()
            if closing is None or closing[0] != "rparen":
                raise ParseError("expected ')'", self._error_offset())
            self.pos += 1
            return node
        raise ParseError(f"unexpected token {value!r}", offset)


def parse_setexpr(text: str) -> SetExpr:
    tokens = _tokenize(text)
    parser = _Parser(tokens, len(text))
    node = parser.parse_expr()
    trailing = parser._peek()
    if trailing is not None:
        raise ParseError(f"unexpected token {trailing[1]!r}", trailing[2])
    return node


def identifiers(expr: SetExpr) -> List[str]:
    """Identifier names in first-appearance order."""
    seen: List[str] = []

    def walk(node):
        if isinstance(node, Name):
            if node.value not in seen:
                seen.append(node.value)
        else:
            walk(node.left)
            walk(node.right)

    walk(expr)
    return seen


def eval_setexpr(expr: SetExpr, env: Mapping[str, DistinctStore]) -> DistinctStore:
    """Standard set semantics over fingerprints.

    The result carries a blob for each member where any bound operand
    store has one.
    """
    blob_sources: Dict[CertFingerprint, CertBlob] = {}

    def members(node) -> frozenset:
        if isinstance(node, Name):
            if node.value not in env:
                raise UnboundIdentifier(node.value)
            store = env[node.value]
            blob_sources.update(store.blobs)
            return store.members
        left, right = members(node.left), members(node.right)
        if node.kind == "&":
            return left & right
        if node.kind == "|":
            return left | right
        return left - right

    result = members(expr)
    blobs = {f: blob_sources[f] for f in result if f in blob_sources}
    return DistinctStore(members=result, blobs=blobs)
