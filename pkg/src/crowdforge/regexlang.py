"""Restricted regular-expression dialect with guaranteed linear-time matching.

Supported constructs: literals, escapes, ``.``, character classes with
ranges and negation, anchors ``^``/``$``, quantifiers ``* + ? {m} {m,}
{m,n}``, alternation, and plain/non-capturing groups. Backreferences,
lookaround, and flags are rejected: they either break the linear-time
guarantee or are not needed for submission constraints.

Patterns compile to a Thompson NFA; matching simulates state sets with a
memoized transition table, so time is O(|value|) for a fixed pattern no
matter what the input looks like. Matching is whole-string (unanchored
patterns are implicitly anchored).

Semantics deliberately track Python's ``re`` for the shared subset
(Unicode ``\\w``/``\\d``/``\\s``, ``.`` excludes newline) so the stdlib
engine can serve as a differential-testing oracle.
"""

from __future__ import annotations

from functools import lru_cache

MAX_NFA_STATES = 20_000
_MEMO_CAP = 50_000  # transition-table entries per compiled pattern


class RegexError(ValueError):
    """Pattern rejected at compile time."""

    code = "regex-invalid"

    def __init__(self, message: str, pos: int | None = None):
        if pos is not None:
            message = f"{message} at position {pos}"
        super().__init__(message)
        self.pos = pos


class RegexUnsupportedError(RegexError):
    """Syntactically valid construct outside the linear-time dialect."""

    code = "regex-unsupported"


class RegexTooLargeError(RegexError):
    code = "regex-too-large"


# ---------------------------------------------------------------------------
# Character tests


def _cat_digit(ch: str) -> bool:
    return ch.isdecimal()


def _cat_word(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def _cat_space(ch: str) -> bool:
    return ch.isspace()


_CATEGORIES = {"d": _cat_digit, "w": _cat_word, "s": _cat_space}

_CONTROL_ESCAPES = {
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "f": "\f",
    "v": "\v",
    "a": "\a",
    "0": "\0",
}


def _test_literal(ch: str):
    def test(c: str, _ch=ch) -> bool:
        return c == _ch

    return test


def _test_dot(c: str) -> bool:
    return c != "\n"


def _test_category(letter: str, negated: bool):
    fn = _CATEGORIES[letter.lower()]
    if negated:
        return lambda c: not fn(c)
    return fn


def _test_class(negated: bool, chars: frozenset, ranges: tuple, cats: tuple):
    def test(c: str) -> bool:
        hit = c in chars
        if not hit:
            for lo, hi in ranges:
                if lo <= c <= hi:
                    hit = True
                    break
        if not hit:
            for letter, cat_negated in cats:
                if _CATEGORIES[letter.lower()](c) != cat_negated:
                    hit = True
                    break
        return hit != negated

    return test


# ---------------------------------------------------------------------------
# Parser: pattern text -> AST


class _Node:
    pass


class _Empty(_Node):
    pass


class _Char(_Node):
    def __init__(self, test):
        self.test = test


class _Anchor(_Node):
    def __init__(self, kind: str):
        self.kind = kind  # "^" | "$"


class _Concat(_Node):
    def __init__(self, items):
        self.items = items


class _Alt(_Node):
    def __init__(self, branches):
        self.branches = branches


class _Repeat(_Node):
    def __init__(self, item, lo: int, hi: int | None):
        self.item = item
        self.lo = lo
        self.hi = hi  # None = unbounded


class _Parser:
    def __init__(self, pattern: str):
        self.p = pattern
        self.i = 0

    def peek(self) -> str:
        return self.p[self.i] if self.i < len(self.p) else ""

    def take(self) -> str:
        ch = self.p[self.i]
        self.i += 1
        return ch

    def parse(self) -> _Node:
        node = self.alternation()
        if self.i < len(self.p):  # stray ')' is the only way to stop early
            raise RegexError("unbalanced parenthesis", self.i)
        return node

    def alternation(self) -> _Node:
        branches = [self.sequence()]
        while self.peek() == "|":
            self.take()
            branches.append(self.sequence())
        if len(branches) == 1:
            return branches[0]
        return _Alt(branches)

    def sequence(self) -> _Node:
        items: list[_Node] = []
        while self.i < len(self.p) and self.peek() not in "|)":
            items.append(self.term())
        if not items:
            return _Empty()
        if len(items) == 1:
            return items[0]
        return _Concat(items)

    def term(self) -> _Node:
        atom = self.atom()
        quant = self.quantifier()
        if quant is None:
            return atom
        if isinstance(atom, _Anchor):
            raise RegexError("nothing to repeat", self.i)
        lo, hi = quant
        if self.quantifier() is not None:
            raise RegexError("multiple repeat", self.i)
        return _Repeat(atom, lo, hi)

    def quantifier(self) -> tuple[int, int | None] | None:
        ch = self.peek()
        if ch == "*":
            self.take()
            return (0, None)
        if ch == "+":
            self.take()
            return (1, None)
        if ch == "?":
            self.take()
            return (0, 1)
        if ch == "{":
            saved = self.i
            parsed = self._brace_quantifier()
            if parsed is None:
                self.i = saved  # literal '{', not a quantifier
                return None
            lo, hi = parsed
            if hi is not None and lo > hi:
                raise RegexError("min repeat greater than max repeat", saved)
            return (lo, hi)
        return None

    def _brace_quantifier(self) -> tuple[int, int | None] | None:
        # Mirrors re: a malformed brace expression is a literal '{'.
        self.take()  # '{'
        lo_digits = self._digits()
        if self.peek() == "}":
            if lo_digits == "":
                return None
            self.take()
            n = int(lo_digits)
            return (n, n)
        if self.peek() != ",":
            return None
        self.take()
        hi_digits = self._digits()
        if self.peek() != "}":
            return None
        self.take()
        lo = int(lo_digits) if lo_digits else 0
        hi = int(hi_digits) if hi_digits else None
        return (lo, hi)

    def _digits(self) -> str:
        out = []
        while self.peek().isdigit():
            out.append(self.take())
        return "".join(out)

    def atom(self) -> _Node:
        ch = self.peek()
        if ch == "":
            raise RegexError("unexpected end of pattern", self.i)
        if ch in "*+?":
            raise RegexError("nothing to repeat", self.i)
        if ch == "(":
            return self.group()
        if ch == "[":
            return self.char_class()
        if ch == ".":
            self.take()
            return _Char(_test_dot)
        if ch == "^":
            self.take()
            return _Anchor("^")
        if ch == "$":
            self.take()
            return _Anchor("$")
        if ch == "\\":
            return self.escape()
        self.take()
        return _Char(_test_literal(ch))

    def group(self) -> _Node:
        start = self.i
        self.take()  # '('
        if self.peek() == "?":
            self.take()
            if self.peek() == ":":
                self.take()  # non-capturing group: same semantics here
            else:
                raise RegexUnsupportedError(
                    "lookaround, flags, and named groups are not supported",
                    start,
                )
        node = self.alternation()
        if self.peek() != ")":
            raise RegexError("missing ), unterminated subpattern", start)
        self.take()
        return node

    def escape(self) -> _Node:
        start = self.i
        self.take()  # backslash
        if self.i >= len(self.p):
            raise RegexError("bad escape (end of pattern)", start)
        ch = self.take()
        if ch in "dDwWsS":
            return _Char(_test_category(ch, ch.isupper()))
        if ch in "bBAZ" or ch.isdigit() and ch != "0":
            raise RegexUnsupportedError(
                f"escape \\{ch} (backreferences and zero-width assertions "
                "beyond ^/$ are not supported)",
                start,
            )
        literal = self._escaped_literal(ch, start)
        return _Char(_test_literal(literal))

    def _escaped_literal(self, ch: str, start: int) -> str:
        if ch in _CONTROL_ESCAPES:
            return _CONTROL_ESCAPES[ch]
        if ch == "x":
            return chr(self._hex(2, start))
        if ch == "u":
            return chr(self._hex(4, start))
        if ch.isalnum():
            raise RegexError(f"bad escape \\{ch}", start)
        return ch

    def _hex(self, n: int, start: int) -> int:
        digits = self.p[self.i : self.i + n]
        if len(digits) < n or any(c not in "0123456789abcdefABCDEF" for c in digits):
            raise RegexError("incomplete hex escape", start)
        self.i += n
        return int(digits, 16)

    def char_class(self) -> _Node:
        start = self.i
        self.take()  # '['
        negated = False
        if self.peek() == "^":
            negated = True
            self.take()
        chars: set[str] = set()
        ranges: list[tuple[str, str]] = []
        cats: list[tuple[str, bool]] = []
        first = True
        while True:
            if self.i >= len(self.p):
                raise RegexError("unterminated character set", start)
            ch = self.peek()
            if ch == "]" and not first:
                self.take()
                break
            first = False
            item = self._class_item(start)
            if isinstance(item, tuple):  # category escape
                cats.append(item)
                continue
            # possible range
            if self.peek() == "-" and self.i + 1 < len(self.p) and self.p[self.i + 1] != "]":
                self.take()  # '-'
                hi_ch = self.peek()
                if hi_ch == "":
                    raise RegexError("unterminated character set", start)
                hi = self._class_item(start)
                if isinstance(hi, tuple):
                    raise RegexError("bad character range", start)
                if ord(item) > ord(hi):
                    raise RegexError("bad character range", start)
                ranges.append((item, hi))
            else:
                chars.add(item)
        return _Char(
            _test_class(negated, frozenset(chars), tuple(ranges), tuple(cats))
        )

    def _class_item(self, start: int):
        """One class member: a literal char or a ('d'|'w'|'s', negated) pair."""
        ch = self.take()
        if ch != "\\":
            return ch
        if self.i >= len(self.p):
            raise RegexError("bad escape (end of pattern)", start)
        esc = self.take()
        if esc in "dDwWsS":
            return (esc.lower(), esc.isupper())
        if esc == "b":
            return "\x08"  # backspace inside a class
        if esc in _CONTROL_ESCAPES:
            return _CONTROL_ESCAPES[esc]
        if esc == "x":
            return chr(self._hex(2, start))
        if esc == "u":
            return chr(self._hex(4, start))
        if esc.isalnum():
            raise RegexError(f"bad escape \\{esc}", start)
        return esc


# ---------------------------------------------------------------------------
# NFA construction (Thompson) and simulation


class _Builder:
    def __init__(self):
        self.eps: list[list[tuple[str, int]]] = []
        self.trans: list[list[tuple[object, int]]] = []

    def new_state(self) -> int:
        if len(self.eps) >= MAX_NFA_STATES:
            raise RegexTooLargeError(
                f"pattern expands past {MAX_NFA_STATES} NFA states"
            )
        self.eps.append([])
        self.trans.append([])
        return len(self.eps) - 1

    def link(self, a: int, b: int, cond: str = "") -> None:
        self.eps[a].append((cond, b))

    def build(self, node: _Node) -> tuple[int, int]:
        """Returns (entry, exit) states of the fragment."""
        if isinstance(node, _Empty):
            s = self.new_state()
            return s, s
        if isinstance(node, _Char):
            a, b = self.new_state(), self.new_state()
            self.trans[a].append((node.test, b))
            return a, b
        if isinstance(node, _Anchor):
            a, b = self.new_state(), self.new_state()
            self.link(a, b, node.kind)
            return a, b
        if isinstance(node, _Concat):
            entry, cur = self.build(node.items[0])
            for item in node.items[1:]:
                nxt_entry, nxt_exit = self.build(item)
                self.link(cur, nxt_entry)
                cur = nxt_exit
            return entry, cur
        if isinstance(node, _Alt):
            entry, exit_ = self.new_state(), self.new_state()
            for branch in node.branches:
                b_in, b_out = self.build(branch)
                self.link(entry, b_in)
                self.link(b_out, exit_)
            return entry, exit_
        if isinstance(node, _Repeat):
            return self._build_repeat(node)
        raise AssertionError(f"unknown node {node!r}")

    def _build_repeat(self, node: _Repeat) -> tuple[int, int]:
        entry = self.new_state()
        cur = entry
        for _ in range(node.lo):
            f_in, f_out = self.build(node.item)
            self.link(cur, f_in)
            cur = f_out
        if node.hi is None:
            # trailing Kleene star
            loop_in, loop_out = self.build(node.item)
            exit_ = self.new_state()
            self.link(cur, loop_in)
            self.link(loop_out, loop_in)
            self.link(cur, exit_)
            self.link(loop_out, exit_)
            return entry, exit_
        exit_ = self.new_state()
        self.link(cur, exit_)
        for _ in range(node.hi - node.lo):
            f_in, f_out = self.build(node.item)
            self.link(cur, f_in)
            self.link(f_out, exit_)
            cur = f_out
        return entry, exit_


class CompiledPattern:
    """A compiled dialect pattern with whole-string matching."""

    def __init__(self, pattern: str):
        self.pattern = pattern
        ast = _Parser(pattern).parse()
        builder = _Builder()
        self.start, self.accept = builder.build(ast)
        self.eps = builder.eps
        self.trans = builder.trans
        self._memo: dict[tuple[frozenset, str, bool], frozenset] = {}

    def _closure(self, states, at_start: bool, at_end: bool) -> frozenset:
        seen = set(states)
        stack = list(states)
        eps = self.eps
        while stack:
            s = stack.pop()
            for cond, t in eps[s]:
                if cond == "^" and not at_start:
                    continue
                if cond == "$" and not at_end:
                    continue
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)

    def matches(self, value: str) -> bool:
        """Whole-string match; O(len(value)) for this fixed pattern."""
        n = len(value)
        cur = self._closure((self.start,), True, n == 0)
        if n == 0:
            return self.accept in cur
        memo = self._memo
        trans = self.trans
        for i in range(n):
            ch = value[i]
            last = i == n - 1
            key = (cur, ch, last)
            nxt = memo.get(key)
            if nxt is None:
                moved = set()
                for s in cur:
                    for test, t in trans[s]:
                        if test(ch):
                            moved.add(t)
                nxt = self._closure(moved, False, last) if moved else frozenset()
                if len(memo) < _MEMO_CAP:
                    memo[key] = nxt
            if not nxt:
                return False
            cur = nxt
        return self.accept in cur


@lru_cache(maxsize=1024)
def compile_pattern(pattern: str) -> CompiledPattern:
    """Compile (and cache) a dialect pattern; raises RegexError on rejects."""
    return CompiledPattern(pattern)


def full_match(pattern: str, value: str) -> bool:
    return compile_pattern(pattern).matches(value)


def check_pattern(pattern: str) -> str | None:
    """Returns a diagnostic code if the pattern is unusable, else None."""
    try:
        compile_pattern(pattern)
        return None
    except RegexError as exc:
        return exc.code
