"""Surface syntax: tokenizer, parsers and pretty-printer.

Operator expressions
--------------------
    o  ::= C | G(scalar) | [v] | IQOPT C | o[reg] | o† | o^⊥ | -o
         | c * o | c o | o * o | o + o | o - o | o ⊗ o
         | o ∧ o | o ∨ o | o ⇝ o | o ⋒ o | (o)
    v  ::= |bits⟩ | v + v | c * v | c v | (v)

Binding, tightest first: postfix ([reg], †, ^⊥); products (scalar and
matrix, left assoc); ⊗; + and -; ∧; ∨; ⇝ and ⋒.  Scalar juxtaposition
(`0.5 [|00⟩]`) is allowed when the left item is a numeric literal or a
parenthesised scalar expression.

Programs
--------
    s  ::= abort | skip | [reg] :=0 | q :=0 | o | assert o
         | < o, o > | < o, o > <= s | s; s | (s [p ⊕] s)
         | if o then s else s end | while o do s end
         | repeat s until o | begin local reg : s end | proc C

`;` associates to the right; a refinement marker `<= s` extends to the
end of the enclosing sequence.

Commands end with `.`; `//` comments run to end of line.  Unicode
connectives have ASCII aliases: \\dagger \\otimes \\vee \\wedge \\bot
\\SasakiImply \\SasakiConjunct \\oplus.
"""

from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int

    def merge(self, other):
        return SourceSpan(min(self.start, other.start), max(self.end, other.end))


class ParseError(Exception):
    def __init__(self, message, span):
        super().__init__(message)
        self.message = message
        self.span = span


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: SourceSpan


# ---------------------------------------------------------------------------
# AST: operator expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OpConst:
    name: str


@dataclass(frozen=True)
class OpParamGate:
    name: str
    arg: complex


@dataclass(frozen=True)
class OpKetProj:
    ket: object


@dataclass(frozen=True)
class OpIqRef:
    name: str


@dataclass(frozen=True)
class OpLabelled:
    op: object
    names: tuple


@dataclass(frozen=True)
class OpNeg:
    a: object


@dataclass(frozen=True)
class OpScalarMul:
    c: complex
    a: object


@dataclass(frozen=True)
class OpAdjoint:
    a: object


@dataclass(frozen=True)
class OpComplement:
    a: object


@dataclass(frozen=True)
class _BinOp:
    a: object
    b: object


class OpAdd(_BinOp):
    pass


class OpSub(_BinOp):
    pass


class OpMatMul(_BinOp):
    pass


class OpTensor(_BinOp):
    pass


class OpMeet(_BinOp):
    pass


class OpJoin(_BinOp):
    pass


class OpSasakiImp(_BinOp):
    pass


class OpSasakiConj(_BinOp):
    pass


@dataclass(frozen=True)
class KetLit:
    bits: str


@dataclass(frozen=True)
class KetSum:
    a: object
    b: object


@dataclass(frozen=True)
class KetScale:
    c: complex
    k: object


# ---------------------------------------------------------------------------
# AST: programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SAbort:
    pass


@dataclass(frozen=True)
class SSkip:
    pass


@dataclass(frozen=True)
class SInit:
    names: tuple


@dataclass(frozen=True)
class SUnitary:
    op: object


@dataclass(frozen=True)
class SAssert:
    op: object


@dataclass(frozen=True)
class SPrescription:
    pre: object
    post: object


@dataclass(frozen=True)
class SRefined:
    pre: object
    post: object
    body: object


@dataclass(frozen=True)
class SSeq:
    first: object
    second: object


@dataclass(frozen=True)
class SPChoice:
    p: float
    s1: object
    s2: object


@dataclass(frozen=True)
class SIf:
    guard: object
    then_s: object
    else_s: object


@dataclass(frozen=True)
class SWhile:
    guard: object
    body: object


@dataclass(frozen=True)
class SRepeat:
    body: object
    guard: object


@dataclass(frozen=True)
class SBlockLocal:
    names: tuple
    body: object


@dataclass(frozen=True)
class SProc:
    name: str


# ---------------------------------------------------------------------------
# AST: commands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CDefOp:
    name: str
    op: object


@dataclass(frozen=True)
class CDefProg:
    name: str
    prog: object


@dataclass(frozen=True)
class CDefSim:
    name: str
    prog: object
    op: object


@dataclass(frozen=True)
class CDefExtract:
    name: str
    source: str


@dataclass(frozen=True)
class CRefine:
    name: str
    pre: object
    post: object


@dataclass(frozen=True)
class CStep:
    prog: object


@dataclass(frozen=True)
class CStepSeq:
    op: object


@dataclass(frozen=True)
class CStepIf:
    op: object


@dataclass(frozen=True)
class CStepWhile:
    guard: object
    inv: object


@dataclass(frozen=True)
class CWeakenPre:
    op: object


@dataclass(frozen=True)
class CStrengthenPost:
    op: object


@dataclass(frozen=True)
class CChoose:
    n: int


@dataclass(frozen=True)
class CEnd:
    pass


@dataclass(frozen=True)
class CPause:
    pass


@dataclass(frozen=True)
class CShowDefs:
    pass


@dataclass(frozen=True)
class CShow:
    name: str


@dataclass(frozen=True)
class CEval:
    name: str


@dataclass(frozen=True)
class CTest:
    lhs: object
    rhs: object
    kind: str  # "=" or "<="


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "abort", "skip", "assert", "if", "then", "else", "end", "while", "do",
    "repeat", "until", "begin", "local", "proc",
    "Def", "Prog", "Extract", "Refine", "Step", "Seq", "If", "While", "Inv",
    "WeakenPre", "StrengthenPost", "Choose", "End", "Pause", "Show", "Eval",
    "Test", "IQOPT",
}

_ALIASES = {
    "dagger": "†",
    "otimes": "⊗",
    "vee": "∨",
    "wedge": "∧",
    "bot": "⊥",
    "SasakiImply": "⇝",
    "SasakiConjunct": "⋒",
    "oplus": "⊕",
}

_SINGLE = set("()[]<>,;:+-*=.†⊗∨∧⇝⋒⊕")


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'kw', 'num', 'ket', or the symbol itself
    value: object
    span: SourceSpan


def _is_ident_start(ch):
    return ch.isalpha() and ch.isascii()


def _is_ident_char(ch):
    return (ch.isalnum() and ch.isascii()) or ch in ("_", "'")


def tokenize(text):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == "/" and text[i:i + 2] == "//":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start = i
        if _is_ident_start(ch):
            while i < n and _is_ident_char(text[i]):
                i += 1
            word = text[start:i]
            kind = "kw" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, SourceSpan(start, i)))
            continue
        if ch.isdigit():
            while i < n and (text[i].isdigit() or text[i] == "."):
                # a '.' is part of the number only if a digit follows
                if text[i] == "." and not (i + 1 < n and text[i + 1].isdigit()):
                    break
                i += 1
            if i < n and text[i] in "eE" and i + 1 < n and (
                    text[i + 1].isdigit() or text[i + 1] in "+-"):
                i += 1
                if text[i] in "+-":
                    i += 1
                while i < n and text[i].isdigit():
                    i += 1
            value = float(text[start:i])
            if i < n and text[i] == "i" and not (i + 1 < n and _is_ident_char(text[i + 1])):
                i += 1
                toks.append(Token("num", complex(0.0, value), SourceSpan(start, i)))
            else:
                toks.append(Token("num", value, SourceSpan(start, i)))
            continue
        if ch == "|":
            i += 1
            bstart = i
            while i < n and text[i] in "01":
                i += 1
            if i == bstart:
                raise ParseError("ket literal needs at least one bit", SourceSpan(start, i))
            if i >= n or text[i] not in (">", "⟩"):
                raise ParseError("unterminated ket literal", SourceSpan(start, i))
            bits = text[bstart:i]
            i += 1
            toks.append(Token("ket", bits, SourceSpan(start, i)))
            continue
        if ch == "\\":
            i += 1
            wstart = i
            while i < n and text[i].isalpha():
                i += 1
            word = text[wstart:i]
            if word not in _ALIASES:
                raise ParseError(f"unknown symbol alias \\{word}", SourceSpan(start, i))
            sym = _ALIASES[word]
            if sym == "⊥":
                # \bot only appears as part of the complement postfix
                toks.append(Token("⊥", "⊥", SourceSpan(start, i)))
            else:
                toks.append(Token(sym, sym, SourceSpan(start, i)))
            continue
        if ch == "^":
            if text[i + 1:i + 2] == "⊥":
                toks.append(Token("^⊥", "^⊥", SourceSpan(i, i + 2)))
                i += 2
                continue
            if text[i + 1:i + 5] == "\\bot":
                toks.append(Token("^⊥", "^⊥", SourceSpan(i, i + 5)))
                i += 5
                continue
            raise ParseError("'^' must be followed by ⊥ (or \\bot)", SourceSpan(i, i + 1))
        if ch == "⊥":
            toks.append(Token("⊥", "⊥", SourceSpan(i, i + 1)))
            i += 1
            continue
        if ch == ":" and text[i:i + 2] == ":=":
            toks.append(Token(":=", ":=", SourceSpan(i, i + 2)))
            i += 2
            continue
        if ch == "<" and text[i:i + 2] == "<=":
            toks.append(Token("<=", "<=", SourceSpan(i, i + 2)))
            i += 2
            continue
        if ch in _SINGLE or ch == ":":
            toks.append(Token(ch, ch, SourceSpan(i, i + 1)))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", SourceSpan(i, i + 1))
    return toks


# ---------------------------------------------------------------------------
# parser core
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, toks, text_len=0):
        self.toks = toks
        self.pos = 0
        self.text_len = text_len

    def peek(self, ahead=0):
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else None

    def at(self, kind, ahead=0):
        t = self.peek(ahead)
        return t is not None and t.kind == kind

    def at_kw(self, word, ahead=0):
        t = self.peek(ahead)
        return t is not None and t.kind == "kw" and t.value == word

    def take(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of command", self._eof_span())
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.peek()
        if t is None or t.kind != kind:
            got = "end of command" if t is None else repr(t.value)
            raise ParseError(f"expected {kind!r}, got {got}", self._here())
        self.pos += 1
        return t

    def expect_kw(self, word):
        t = self.peek()
        if t is None or t.kind != "kw" or t.value != word:
            got = "end of command" if t is None else repr(t.value)
            raise ParseError(f"expected {word!r}, got {got}", self._here())
        self.pos += 1
        return t

    def _here(self):
        t = self.peek()
        return t.span if t is not None else self._eof_span()

    def _eof_span(self):
        if self.toks:
            s = self.toks[-1].span
            return SourceSpan(s.end, s.end)
        return SourceSpan(self.text_len, self.text_len)

    def done(self):
        return self.pos >= len(self.toks)

    # -- scalar expressions ------------------------------------------------

    def scalar_expr(self):
        v = self.scalar_term()
        while self.at("+") or self.at("-"):
            mark = self.pos
            op = self.take().kind
            try:
                w = self.scalar_term()
            except ParseError:
                # the right-hand side is not scalar (e.g. a ket follows);
                # leave the operator for the caller
                self.pos = mark
                break
            v = v + w if op == "+" else v - w
        return v

    def scalar_term(self):
        v = self.scalar_factor()
        while self.at("*"):
            mark = self.pos
            self.take()
            try:
                w = self.scalar_factor()
            except ParseError:
                self.pos = mark
                break
            v = v * w
        return v

    def scalar_factor(self):
        if self.at("-"):
            self.take()
            return -self.scalar_factor()
        if self.at("num"):
            return complex(self.take().value)
        if self.at("("):
            self.take()
            v = self.scalar_expr()
            self.expect(")")
            return v
        raise ParseError("expected a number", self._here())

    def try_scalar(self):
        """Backtracking scalar parse; None if the tokens are not a scalar."""
        mark = self.pos
        try:
            v = self.scalar_expr()
            return v
        except ParseError:
            self.pos = mark
            return None

    # -- ket expressions ---------------------------------------------------

    def ket_expr(self):
        k = self.ket_term()
        while self.at("+"):
            self.take()
            k = KetSum(k, self.ket_term())
        return k

    def ket_term(self):
        if self.at("ket"):
            return KetLit(self.take().value)
        if self.at("("):
            mark = self.pos
            self.take()
            try:
                inner = self.ket_expr()
                self.expect(")")
                return inner
            except ParseError:
                self.pos = mark
        c = self.try_scalar()
        if c is None:
            raise ParseError("expected a ket term", self._here())
        if self.at("*"):
            self.take()
        return KetScale(c, self.ket_term())

    # -- operator expressions ----------------------------------------------

    def op_expr(self):
        return self._op_sasaki()

    def _op_sasaki(self):
        a = self._op_join()
        while self.at("⇝") or self.at("⋒"):
            sym = self.take().kind
            b = self._op_join()
            a = OpSasakiImp(a, b) if sym == "⇝" else OpSasakiConj(a, b)
        return a

    def _op_join(self):
        a = self._op_meet()
        while self.at("∨"):
            self.take()
            a = OpJoin(a, self._op_meet())
        return a

    def _op_meet(self):
        a = self._op_add()
        while self.at("∧"):
            self.take()
            a = OpMeet(a, self._op_add())
        return a

    def _op_add(self):
        a = self._op_tensor()
        while self.at("+") or self.at("-"):
            sym = self.take().kind
            b = self._op_tensor()
            a = OpAdd(a, b) if sym == "+" else OpSub(a, b)
        return a

    def _op_tensor(self):
        a = self._op_prod()
        while self.at("⊗"):
            self.take()
            a = OpTensor(a, self._op_prod())
        return a

    def _op_prod(self):
        scalar = complex(1.0)
        have_scalar = False
        chain = None
        prev_scalar = True  # a leading scalar is always allowed
        while True:
            item, is_scalar = self._op_prod_item(first=chain is None and not have_scalar)
            if item is None:
                break
            if is_scalar:
                scalar *= item
                have_scalar = True
            else:
                chain = item if chain is None else OpMatMul(chain, item)
            prev_scalar = is_scalar
            if self.at("*"):
                self.take()
                continue
            # juxtaposition: only after a scalar item
            if prev_scalar and self._at_factor_start():
                continue
            break
        if chain is None:
            raise ParseError("expected an operator", self._here())
        if have_scalar and scalar != 1.0:
            return OpScalarMul(scalar, chain)
        if have_scalar and scalar == 1.0:
            return OpScalarMul(scalar, chain)
        return chain

    def _at_factor_start(self):
        t = self.peek()
        if t is None:
            return False
        if t.kind in ("ident", "num", "(", "[", "-"):
            return True
        if t.kind == "kw" and t.value == "IQOPT":
            return True
        return False

    def _op_prod_item(self, first):
        """One product item: a scalar (returns (complex, True)) or an
        operator factor (returns (ast, False)); (None, False) when the next
        token cannot start either."""
        if not self._at_factor_start():
            if first:
                raise ParseError("expected an operator", self._here())
            return None, False
        if self.at("num"):
            return self.scalar_expr(), True
        if self.at("("):
            mark = self.pos
            v = self.try_scalar()
            if v is not None and not self._at_postfix():
                return v, True
            self.pos = mark
        if self.at("-"):
            mark = self.pos
            v = self.try_scalar()
            if v is not None:
                return v, True
            self.pos = mark
            self.take()
            inner, is_scalar = self._op_prod_item(first=True)
            if is_scalar:
                return -inner, True
            return OpNeg(inner), False
        return self._op_postfixed(), False

    def _at_postfix(self):
        return self.at("[") or self.at("†") or self.at("^⊥")

    def _op_postfixed(self):
        a = self._op_atom()
        while True:
            if self.at("[") and (self.at("ident", 1) or self.at("]", 1)):
                # a register label; any other bracket content (a ket, or the
                # weight of an enclosing probabilistic choice) is not ours
                self.take()
                names = []
                while self.at("ident"):
                    names.append(self.take().value)
                self.expect("]")
                a = OpLabelled(a, tuple(names))
            elif self.at("†"):
                self.take()
                a = OpAdjoint(a)
            elif self.at("^⊥"):
                self.take()
                a = OpComplement(a)
            else:
                return a

    def _op_atom(self):
        if self.at_kw("IQOPT"):
            self.take()
            name = self.expect("ident").value
            return OpIqRef(name)
        if self.at("ident"):
            name = self.take().value
            if self.at("("):
                mark = self.pos
                self.take()
                arg = self.try_scalar()
                if arg is not None and self.at(")"):
                    self.take()
                    return OpParamGate(name, arg)
                self.pos = mark
            return OpConst(name)
        if self.at("["):
            self.take()
            k = self.ket_expr()
            self.expect("]")
            return OpKetProj(k)
        if self.at("("):
            self.take()
            inner = self.op_expr()
            self.expect(")")
            return inner
        raise ParseError("expected an operator atom", self._here())

    # -- programs ----------------------------------------------------------

    def program(self):
        first = self.stm_item()
        if self.at(";"):
            self.take()
            return SSeq(first, self.program())
        return first

    def stm_item(self):
        if self.at_kw("abort"):
            self.take()
            return SAbort()
        if self.at_kw("skip"):
            self.take()
            return SSkip()
        if self.at_kw("assert"):
            self.take()
            return SAssert(self.op_expr())
        if self.at_kw("if"):
            self.take()
            guard = self.op_expr()
            self.expect_kw("then")
            then_s = self.program()
            self.expect_kw("else")
            else_s = self.program()
            self.expect_kw("end")
            return SIf(guard, then_s, else_s)
        if self.at_kw("while"):
            self.take()
            guard = self.op_expr()
            self.expect_kw("do")
            body = self.program()
            self.expect_kw("end")
            return SWhile(guard, body)
        if self.at_kw("repeat"):
            self.take()
            body = self.program()
            self.expect_kw("until")
            guard = self.op_expr()
            return SRepeat(body, guard)
        if self.at_kw("begin"):
            self.take()
            self.expect_kw("local")
            names = self.local_names()
            self.expect(":")
            body = self.program()
            self.expect_kw("end")
            return SBlockLocal(names, body)
        if self.at_kw("proc"):
            self.take()
            return SProc(self.expect("ident").value)
        if self.at("<"):
            self.take()
            pre = self.op_expr()
            self.expect(",")
            post = self.op_expr()
            self.expect(">")
            if self.at("<="):
                self.take()
                return SRefined(pre, post, self.program())
            return SPrescription(pre, post)
        if self.at("("):
            mark = self.pos
            try:
                self.take()
                s1 = self.program()
                self.expect("[")
                p = self.scalar_expr()
                self.expect("⊕")
                self.expect("]")
                s2 = self.program()
                self.expect(")")
                if abs(p.imag) > 0:
                    raise ParseError("choice weight must be real", self._here())
                return SPChoice(p.real, s1, s2)
            except ParseError:
                self.pos = mark
            return SUnitary(self.op_expr())
        if self.at("[") and (self.at("ident", 1) or self.at("]", 1)):
            self.take()
            names = []
            while self.at("ident"):
                names.append(self.take().value)
            self.expect("]")
            return self.init_tail(tuple(names))
        if self.at("ident") and self.at(":=", 1):
            name = self.take().value
            return self.init_tail((name,))
        return SUnitary(self.op_expr())

    def init_tail(self, names):
        self.expect(":=")
        t = self.expect("num")
        if complex(t.value) != 0:
            raise ParseError("initialisation must assign 0", t.span)
        if not names:
            raise ParseError("empty register in initialisation", t.span)
        return SInit(names)

    def local_names(self):
        if self.at("["):
            self.take()
            names = []
            while self.at("ident"):
                names.append(self.take().value)
            self.expect("]")
        else:
            names = [self.expect("ident").value]
            while self.at("ident"):
                names.append(self.take().value)
        if not names:
            raise ParseError("local block needs at least one qubit", self._here())
        return tuple(names)

    # -- commands ----------------------------------------------------------

    def command(self):
        if self.at_kw("Def"):
            self.take()
            name = self.expect("ident").value
            self.expect(":=")
            if self.at_kw("Prog"):
                self.take()
                return CDefProg(name, self.program())
            if self.at_kw("Extract"):
                self.take()
                return CDefExtract(name, self.expect("ident").value)
            if self.at("[") and self.at("[", 1):
                self.take()
                self.take()
                prog = self.program()
                self.expect("]")
                self.expect("]")
                self.expect("(")
                op = self.op_expr()
                self.expect(")")
                return CDefSim(name, prog, op)
            return CDefOp(name, self.op_expr())
        if self.at_kw("Refine"):
            self.take()
            name = self.expect("ident").value
            self.expect(":")
            self.expect("<")
            pre = self.op_expr()
            self.expect(",")
            post = self.op_expr()
            self.expect(">")
            return CRefine(name, pre, post)
        if self.at_kw("Step"):
            self.take()
            if self.at_kw("Seq"):
                self.take()
                return CStepSeq(self.op_expr())
            if self.at_kw("If"):
                self.take()
                return CStepIf(self.op_expr())
            if self.at_kw("While"):
                self.take()
                guard = self.op_expr()
                self.expect_kw("Inv")
                inv = self.op_expr()
                return CStepWhile(guard, inv)
            return CStep(self.program())
        if self.at_kw("WeakenPre"):
            self.take()
            return CWeakenPre(self.op_expr())
        if self.at_kw("StrengthenPost"):
            self.take()
            return CStrengthenPost(self.op_expr())
        if self.at_kw("Choose"):
            self.take()
            t = self.expect("num")
            if isinstance(t.value, complex) or t.value != int(t.value):
                raise ParseError("Choose expects an integer", t.span)
            return CChoose(int(t.value))
        if self.at_kw("End"):
            self.take()
            return CEnd()
        if self.at_kw("Pause"):
            self.take()
            return CPause()
        if self.at_kw("Show"):
            self.take()
            if self.at_kw("Def"):
                self.take()
                return CShowDefs()
            return CShow(self.expect("ident").value)
        if self.at_kw("Eval"):
            self.take()
            return CEval(self.expect("ident").value)
        if self.at_kw("Test"):
            self.take()
            lhs = self.op_expr()
            if self.at("="):
                self.take()
                return CTest(lhs, self.op_expr(), "=")
            self.expect("<=")
            return CTest(lhs, self.op_expr(), "<=")
        t = self.peek()
        got = "end of command" if t is None else repr(t.value)
        raise ParseError(f"expected a command, got {got}", self._here())


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def parse_operator(text):
    p = _Parser(tokenize(text), len(text))
    ast = p.op_expr()
    if not p.done():
        raise ParseError("trailing input after operator", p._here())
    return ast


def parse_program(text):
    p = _Parser(tokenize(text), len(text))
    ast = p.program()
    if not p.done():
        raise ParseError("trailing input after program", p._here())
    return ast


def parse_command_tokens(toks, text_len):
    p = _Parser(toks, text_len)
    ast = p.command()
    if not p.done():
        raise ParseError("trailing input after command", p._here())
    return ast


def parse_script(text):
    """Split on '.' tokens and parse each command.

    Returns (commands, diagnostics) where commands is a list of
    (ast_or_None, span) in source order; a None ast carries a matching
    entry in diagnostics.  A malformed command never prevents the
    following ones from parsing.
    """
    try:
        toks = tokenize(text)
    except ParseError as exc:
        return [], [Diagnostic(exc.message, exc.span)]
    commands = []
    diagnostics = []
    group = []
    for tok in toks:
        if tok.kind == ".":
            span = SourceSpan(group[0].span.start if group else tok.span.start, tok.span.end)
            if group:
                try:
                    commands.append((parse_command_tokens(group, len(text)), span))
                except ParseError as exc:
                    commands.append((None, span))
                    diagnostics.append(Diagnostic(exc.message, exc.span))
            group = []
        else:
            group.append(tok)
    if group:
        span = SourceSpan(group[0].span.start, group[-1].span.end)
        commands.append((None, span))
        diagnostics.append(Diagnostic("command is missing its final '.'", span))
    return commands, diagnostics


# ---------------------------------------------------------------------------
# pretty-printer
# ---------------------------------------------------------------------------

def fmt_scalar(c):
    c = complex(c)
    if c.imag == 0.0:
        return _fmt_float(c.real)
    if c.real == 0.0:
        return _fmt_float(c.imag) + "i"
    sign = "+" if c.imag >= 0 else "-"
    return f"({_fmt_float(c.real)} {sign} {_fmt_float(abs(c.imag))}i)"


def _fmt_float(x):
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def pretty_ket(k):
    if isinstance(k, KetLit):
        return f"|{k.bits}⟩"
    if isinstance(k, KetSum):
        rhs = pretty_ket(k.b)
        if isinstance(k.b, KetSum):
            rhs = f"({rhs})"
        return f"{pretty_ket(k.a)} + {rhs}"
    if isinstance(k, KetScale):
        inner = pretty_ket(k.k)
        if isinstance(k.k, (KetSum, KetScale)):
            inner = f"({inner})"
        return f"{fmt_scalar(k.c)} * {inner}"
    raise TypeError(f"not a ket node: {k!r}")


_BIN_SYMBOL = {
    OpAdd: "+", OpSub: "-", OpMatMul: "*", OpTensor: "⊗",
    OpMeet: "∧", OpJoin: "∨", OpSasakiImp: "⇝", OpSasakiConj: "⋒",
}


def pretty_op(ast):
    """Render an operator expression; every non-atomic node is wrapped in
    parentheses, so the output is unambiguous independent of precedence."""
    if isinstance(ast, OpConst):
        return ast.name
    if isinstance(ast, OpIqRef):
        return f"IQOPT {ast.name}"
    if isinstance(ast, OpParamGate):
        return f"{ast.name}({fmt_scalar(ast.arg)})"
    if isinstance(ast, OpKetProj):
        return f"[{pretty_ket(ast.ket)}]"
    if isinstance(ast, OpLabelled):
        inner = pretty_op(ast.op)
        if not isinstance(ast.op, (OpConst, OpParamGate, OpKetProj)):
            inner = f"({inner})" if not inner.startswith("(") else inner
        return f"{inner}[{' '.join(ast.names)}]"
    if isinstance(ast, OpComplement):
        return f"({pretty_op(ast.a)}^⊥)"
    if isinstance(ast, OpAdjoint):
        return f"({pretty_op(ast.a)}†)"
    if isinstance(ast, OpNeg):
        return f"(-{pretty_op(ast.a)})"
    if isinstance(ast, OpScalarMul):
        return f"({fmt_scalar(ast.c)} * {pretty_op(ast.a)})"
    for klass, sym in _BIN_SYMBOL.items():
        if isinstance(ast, klass):
            return f"({pretty_op(ast.a)} {sym} {pretty_op(ast.b)})"
    raise TypeError(f"not an operator node: {ast!r}")


def pretty_prog(stm):
    if isinstance(stm, SAbort):
        return "abort"
    if isinstance(stm, SSkip):
        return "skip"
    if isinstance(stm, SInit):
        return f"[{' '.join(stm.names)}] :=0"
    if isinstance(stm, SUnitary):
        return pretty_op(stm.op)
    if isinstance(stm, SAssert):
        return f"assert {pretty_op(stm.op)}"
    if isinstance(stm, SPrescription):
        return f"< {pretty_op(stm.pre)}, {pretty_op(stm.post)} >"
    if isinstance(stm, SRefined):
        return (f"< {pretty_op(stm.pre)}, {pretty_op(stm.post)} > <= "
                f"{pretty_prog(stm.body)}")
    if isinstance(stm, SSeq):
        return f"{pretty_prog(stm.first)}; {pretty_prog(stm.second)}"
    if isinstance(stm, SPChoice):
        return (f"({pretty_prog(stm.s1)} [{_fmt_float(stm.p)} ⊕] "
                f"{pretty_prog(stm.s2)})")
    if isinstance(stm, SIf):
        return (f"if {pretty_op(stm.guard)} then {pretty_prog(stm.then_s)} "
                f"else {pretty_prog(stm.else_s)} end")
    if isinstance(stm, SWhile):
        return f"while {pretty_op(stm.guard)} do {pretty_prog(stm.body)} end"
    if isinstance(stm, SRepeat):
        return f"repeat {pretty_prog(stm.body)} until {pretty_op(stm.guard)}"
    if isinstance(stm, SBlockLocal):
        return f"begin local {' '.join(stm.names)} : {pretty_prog(stm.body)} end"
    if isinstance(stm, SProc):
        return f"proc {stm.name}"
    raise TypeError(f"not a program node: {stm!r}")


def goal_text(pre_ast, post_ast):
    """The `< pre, post >` line used in goal displays."""
    return f"< {pretty_op(pre_ast)}, {pretty_op(post_ast)} >"
