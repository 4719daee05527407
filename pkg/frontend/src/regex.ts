/**
 * Port of the server's linear-time regex dialect (Thompson NFA with
 * memoized state-set transitions, whole-string semantics). Constraint
 * checks must agree with the server byte for byte, so this matcher is
 * verified against the shared test-vector corpus rather than relying on
 * the host RegExp engine (which backtracks and has different semantics).
 *
 * Strings are treated as sequences of Unicode code points, matching the
 * server's character model.
 */

export class RegexError extends Error {
  code = "regex-invalid";
  constructor(message: string, pos?: number) {
    super(pos === undefined ? message : `${message} at position ${pos}`);
  }
}

export class RegexUnsupportedError extends RegexError {
  code = "regex-unsupported";
}

export class RegexTooLargeError extends RegexError {
  code = "regex-too-large";
}

export const MAX_NFA_STATES = 20_000;
const MEMO_CAP = 50_000;

type CharTest = (ch: string) => boolean;

// character categories matching the server's Unicode semantics
const RE_WORD = /[\p{L}\p{N}_]/u;
const RE_DIGIT = /\p{Nd}/u;
const SPACE_CODEPOINTS = new Set([0x09, 0x0a, 0x0b, 0x0c, 0x0d, 0x20,
  0x1c, 0x1d, 0x1e, 0x1f, 0x85, 0xa0, 0x1680, 0x2028, 0x2029, 0x202f,
  0x205f, 0x3000]);
function isSpaceChar(c: string): boolean {
  const cp = c.codePointAt(0)!;
  return SPACE_CODEPOINTS.has(cp) || (cp >= 0x2000 && cp <= 0x200a);
}

const CATEGORIES: Record<string, CharTest> = {
  d: (c) => RE_DIGIT.test(c),
  w: (c) => RE_WORD.test(c),
  s: (c) => isSpaceChar(c),
};

const CONTROL_ESCAPES: Record<string, string> = {
  n: "\n",
  t: "\t",
  r: "\r",
  f: "\f",
  v: "\v",
  a: "\x07",
  "0": "\0",
};

// ---------------------------------------------------------------------------
// AST

type Node =
  | { kind: "empty" }
  | { kind: "char"; test: CharTest }
  | { kind: "anchor"; which: "^" | "$" }
  | { kind: "concat"; items: Node[] }
  | { kind: "alt"; branches: Node[] }
  | { kind: "repeat"; item: Node; lo: number; hi: number | null };

class Parser {
  private p: string[];
  private i = 0;

  constructor(pattern: string) {
    this.p = Array.from(pattern);
  }

  private peek(): string {
    return this.i < this.p.length ? this.p[this.i] : "";
  }

  private take(): string {
    return this.p[this.i++];
  }

  parse(): Node {
    const node = this.alternation();
    if (this.i < this.p.length) {
      throw new RegexError("unbalanced parenthesis", this.i);
    }
    return node;
  }

  private alternation(): Node {
    const branches = [this.sequence()];
    while (this.peek() === "|") {
      this.take();
      branches.push(this.sequence());
    }
    return branches.length === 1 ? branches[0] : { kind: "alt", branches };
  }

  private sequence(): Node {
    const items: Node[] = [];
    while (this.i < this.p.length && this.peek() !== "|" && this.peek() !== ")") {
      items.push(this.term());
    }
    if (items.length === 0) return { kind: "empty" };
    return items.length === 1 ? items[0] : { kind: "concat", items };
  }

  private term(): Node {
    const atom = this.atom();
    const quant = this.quantifier();
    if (quant === null) return atom;
    if (atom.kind === "anchor") throw new RegexError("nothing to repeat", this.i);
    const [lo, hi] = quant;
    if (this.quantifier() !== null) {
      throw new RegexError("multiple repeat", this.i);
    }
    return { kind: "repeat", item: atom, lo, hi };
  }

  private quantifier(): [number, number | null] | null {
    const ch = this.peek();
    if (ch === "*") {
      this.take();
      return [0, null];
    }
    if (ch === "+") {
      this.take();
      return [1, null];
    }
    if (ch === "?") {
      this.take();
      return [0, 1];
    }
    if (ch === "{") {
      const saved = this.i;
      const parsed = this.braceQuantifier();
      if (parsed === null) {
        this.i = saved; // literal '{'
        return null;
      }
      const [lo, hi] = parsed;
      if (hi !== null && lo > hi) {
        throw new RegexError("min repeat greater than max repeat", saved);
      }
      return parsed;
    }
    return null;
  }

  private braceQuantifier(): [number, number | null] | null {
    this.take(); // '{'
    const loDigits = this.digits();
    if (this.peek() === "}") {
      if (loDigits === "") return null;
      this.take();
      const n = parseInt(loDigits, 10);
      return [n, n];
    }
    if (this.peek() !== ",") return null;
    this.take();
    const hiDigits = this.digits();
    if (this.peek() !== "}") return null;
    this.take();
    const lo = loDigits === "" ? 0 : parseInt(loDigits, 10);
    const hi = hiDigits === "" ? null : parseInt(hiDigits, 10);
    return [lo, hi];
  }

  private digits(): string {
    let out = "";
    while (/[0-9]/.test(this.peek())) out += this.take();
    return out;
  }

  private atom(): Node {
    const ch = this.peek();
    if (ch === "") throw new RegexError("unexpected end of pattern", this.i);
    if (ch === "*" || ch === "+" || ch === "?") {
      throw new RegexError("nothing to repeat", this.i);
    }
    if (ch === "(") return this.group();
    if (ch === "[") return this.charClass();
    if (ch === ".") {
      this.take();
      return { kind: "char", test: (c) => c !== "\n" };
    }
    if (ch === "^") {
      this.take();
      return { kind: "anchor", which: "^" };
    }
    if (ch === "$") {
      this.take();
      return { kind: "anchor", which: "$" };
    }
    if (ch === "\\") return this.escape();
    this.take();
    return { kind: "char", test: (c) => c === ch };
  }

  private group(): Node {
    const start = this.i;
    this.take(); // '('
    if (this.peek() === "?") {
      this.take();
      if (this.peek() === ":") {
        this.take(); // non-capturing: same semantics here
      } else {
        throw new RegexUnsupportedError(
          "lookaround, flags, and named groups are not supported",
          start,
        );
      }
    }
    const node = this.alternation();
    if (this.peek() !== ")") {
      throw new RegexError("missing ), unterminated subpattern", start);
    }
    this.take();
    return node;
  }

  private escape(): Node {
    const start = this.i;
    this.take(); // backslash
    if (this.i >= this.p.length) {
      throw new RegexError("bad escape (end of pattern)", start);
    }
    const ch = this.take();
    if ("dDwWsS".includes(ch)) {
      const fn = CATEGORIES[ch.toLowerCase()];
      const negated = ch === ch.toUpperCase();
      return { kind: "char", test: negated ? (c) => !fn(c) : fn };
    }
    if ("bBAZ".includes(ch) || (/[1-9]/.test(ch))) {
      throw new RegexUnsupportedError(
        `escape \\${ch} (backreferences and zero-width assertions beyond ^/$ ` +
          "are not supported)",
        start,
      );
    }
    const literal = this.escapedLiteral(ch, start);
    return { kind: "char", test: (c) => c === literal };
  }

  private escapedLiteral(ch: string, start: number): string {
    if (ch in CONTROL_ESCAPES) return CONTROL_ESCAPES[ch];
    if (ch === "x") return String.fromCodePoint(this.hex(2, start));
    if (ch === "u") return String.fromCodePoint(this.hex(4, start));
    if (/[A-Za-z0-9]/.test(ch)) throw new RegexError(`bad escape \\${ch}`, start);
    return ch;
  }

  private hex(n: number, start: number): number {
    const digits = this.p.slice(this.i, this.i + n).join("");
    if (digits.length < n || !/^[0-9a-fA-F]+$/.test(digits)) {
      throw new RegexError("incomplete hex escape", start);
    }
    this.i += n;
    return parseInt(digits, 16);
  }

  private charClass(): Node {
    const start = this.i;
    this.take(); // '['
    let negated = false;
    if (this.peek() === "^") {
      negated = true;
      this.take();
    }
    const chars = new Set<string>();
    const ranges: [number, number][] = [];
    const cats: [string, boolean][] = [];
    let first = true;
    for (;;) {
      if (this.i >= this.p.length) {
        throw new RegexError("unterminated character set", start);
      }
      const ch = this.peek();
      if (ch === "]" && !first) {
        this.take();
        break;
      }
      first = false;
      const item = this.classItem(start);
      if (Array.isArray(item)) {
        cats.push(item as [string, boolean]);
        continue;
      }
      if (
        this.peek() === "-" &&
        this.i + 1 < this.p.length &&
        this.p[this.i + 1] !== "]"
      ) {
        this.take(); // '-'
        if (this.peek() === "") {
          throw new RegexError("unterminated character set", start);
        }
        const hi = this.classItem(start);
        if (Array.isArray(hi)) throw new RegexError("bad character range", start);
        const lo = item.codePointAt(0)!;
        const hiCp = (hi as string).codePointAt(0)!;
        if (lo > hiCp) throw new RegexError("bad character range", start);
        ranges.push([lo, hiCp]);
      } else {
        chars.add(item);
      }
    }
    const test: CharTest = (c) => {
      let hit = chars.has(c);
      if (!hit) {
        const cp = c.codePointAt(0)!;
        for (const [lo, hi] of ranges) {
          if (lo <= cp && cp <= hi) {
            hit = true;
            break;
          }
        }
      }
      if (!hit) {
        for (const [letter, catNegated] of cats) {
          if (CATEGORIES[letter](c) !== catNegated) {
            hit = true;
            break;
          }
        }
      }
      return hit !== negated;
    };
    return { kind: "char", test };
  }

  /** One class member: a literal char, or [category, negated]. */
  private classItem(start: number): string | [string, boolean] {
    const ch = this.take();
    if (ch !== "\\") return ch;
    if (this.i >= this.p.length) {
      throw new RegexError("bad escape (end of pattern)", start);
    }
    const esc = this.take();
    if ("dDwWsS".includes(esc)) {
      return [esc.toLowerCase(), esc === esc.toUpperCase()];
    }
    if (esc === "b") return "\x08"; // backspace inside a class
    if (esc in CONTROL_ESCAPES) return CONTROL_ESCAPES[esc];
    if (esc === "x") return String.fromCodePoint(this.hex(2, start));
    if (esc === "u") return String.fromCodePoint(this.hex(4, start));
    if (/[A-Za-z0-9]/.test(esc)) throw new RegexError(`bad escape \\${esc}`, start);
    return esc;
  }
}

// ---------------------------------------------------------------------------
// Thompson construction + state-set simulation

type EpsEdge = ["" | "^" | "$", number];

class Builder {
  eps: EpsEdge[][] = [];
  trans: [CharTest, number][][] = [];

  newState(): number {
    if (this.eps.length >= MAX_NFA_STATES) {
      throw new RegexTooLargeError(
        `pattern expands past ${MAX_NFA_STATES} NFA states`,
      );
    }
    this.eps.push([]);
    this.trans.push([]);
    return this.eps.length - 1;
  }

  link(a: number, b: number, cond: "" | "^" | "$" = ""): void {
    this.eps[a].push([cond, b]);
  }

  build(node: Node): [number, number] {
    switch (node.kind) {
      case "empty": {
        const s = this.newState();
        return [s, s];
      }
      case "char": {
        const a = this.newState();
        const b = this.newState();
        this.trans[a].push([node.test, b]);
        return [a, b];
      }
      case "anchor": {
        const a = this.newState();
        const b = this.newState();
        this.link(a, b, node.which);
        return [a, b];
      }
      case "concat": {
        let [entry, cur] = this.build(node.items[0]);
        for (const item of node.items.slice(1)) {
          const [nextIn, nextOut] = this.build(item);
          this.link(cur, nextIn);
          cur = nextOut;
        }
        return [entry, cur];
      }
      case "alt": {
        const entry = this.newState();
        const exit = this.newState();
        for (const branch of node.branches) {
          const [bIn, bOut] = this.build(branch);
          this.link(entry, bIn);
          this.link(bOut, exit);
        }
        return [entry, exit];
      }
      case "repeat":
        return this.buildRepeat(node);
    }
  }

  private buildRepeat(node: Extract<Node, { kind: "repeat" }>): [number, number] {
    const entry = this.newState();
    let cur = entry;
    for (let k = 0; k < node.lo; k++) {
      const [fIn, fOut] = this.build(node.item);
      this.link(cur, fIn);
      cur = fOut;
    }
    if (node.hi === null) {
      const [loopIn, loopOut] = this.build(node.item);
      const exit = this.newState();
      this.link(cur, loopIn);
      this.link(loopOut, loopIn);
      this.link(cur, exit);
      this.link(loopOut, exit);
      return [entry, exit];
    }
    const exit = this.newState();
    this.link(cur, exit);
    for (let k = 0; k < node.hi - node.lo; k++) {
      const [fIn, fOut] = this.build(node.item);
      this.link(cur, fIn);
      this.link(fOut, exit);
      cur = fOut;
    }
    return [entry, exit];
  }
}

function setKey(states: Set<number>): string {
  return [...states].sort((a, b) => a - b).join(",");
}

export class CompiledPattern {
  readonly pattern: string;
  private start: number;
  private accept: number;
  private eps: EpsEdge[][];
  private trans: [CharTest, number][][];
  private memo = new Map<string, Set<number>>();

  constructor(pattern: string) {
    this.pattern = pattern;
    const ast = new Parser(pattern).parse();
    const builder = new Builder();
    [this.start, this.accept] = builder.build(ast);
    this.eps = builder.eps;
    this.trans = builder.trans;
  }

  private closure(states: Iterable<number>, atStart: boolean, atEnd: boolean): Set<number> {
    const seen = new Set(states);
    const stack = [...seen];
    while (stack.length) {
      const s = stack.pop()!;
      for (const [cond, t] of this.eps[s]) {
        if (cond === "^" && !atStart) continue;
        if (cond === "$" && !atEnd) continue;
        if (!seen.has(t)) {
          seen.add(t);
          stack.push(t);
        }
      }
    }
    return seen;
  }

  /** Whole-string match over code points; O(len) for this pattern. */
  matches(value: string): boolean {
    const chars = Array.from(value);
    const n = chars.length;
    let cur = this.closure([this.start], true, n === 0);
    if (n === 0) return cur.has(this.accept);
    for (let i = 0; i < n; i++) {
      const ch = chars[i];
      const last = i === n - 1;
      const key = `${setKey(cur)}|${last ? 1 : 0}|${ch}`;
      let next = this.memo.get(key);
      if (next === undefined) {
        const moved = new Set<number>();
        for (const s of cur) {
          for (const [test, t] of this.trans[s]) {
            if (test(ch)) moved.add(t);
          }
        }
        next = moved.size ? this.closure(moved, false, last) : new Set();
        if (this.memo.size < MEMO_CAP) this.memo.set(key, next);
      }
      if (next.size === 0) return false;
      cur = next;
    }
    return cur.has(this.accept);
  }
}

const cache = new Map<string, CompiledPattern>();

export function compilePattern(pattern: string): CompiledPattern {
  let compiled = cache.get(pattern);
  if (!compiled) {
    compiled = new CompiledPattern(pattern);
    if (cache.size < 1024) cache.set(pattern, compiled);
  }
  return compiled;
}

export function fullMatch(pattern: string, value: string): boolean {
  return compilePattern(pattern).matches(value);
}

export function checkPattern(pattern: string): string | null {
  try {
    compilePattern(pattern);
    return null;
  } catch (err) {
    if (err instanceof RegexError) return err.code;
    throw err;
  }
}
