"""Front end for a small C subset ("mini-C") that emits code property graphs.

Supported: one function per source text; ``int``/``char``/``float``/``void``
scalars, pointers and arrays; assignments (``=``, ``+=``, ``-=``, ``*=``,
``/=``, ``%=``); ``++``/``--``; arithmetic, relational and logical
expressions; calls; ``if``/``else``, ``while``, ``for`` (with a condition)
and ``return``. Pointers are limited to declaration, dereference and
address-of.

Graph construction:

* Node ids follow a preorder walk of the syntax tree in source order. Node 0
  is the entry; parameter declarations and ``if``/``else``/``while``/``for``
  keywords become ``syntax`` nodes, simple statements become ``statement``
  nodes and branch/loop tests become ``condition`` nodes.
* Control dependence is structural: every statement directly in the body of
  a branch or loop depends on that construct's condition.
* Data dependence comes from iterative reaching definitions over the CFG.
  Array element and pointee writes are weak definitions of the base name
  (they generate a fact but do not kill earlier ones). Parameters are
  defined at the entry node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .cpg import Cpg, CpgEdge, CpgNode
from .errors import ParseError

TYPE_KEYWORDS = frozenset({"int", "char", "float", "void"})
KEYWORDS = TYPE_KEYWORDS | {"if", "else", "while", "for", "return"}
ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%="})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<num>0[xX][0-9a-fA-F]+|(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?[uUlLfF]*)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<chr>'(?:[^'\\\n]|\\.)+')
  | (?P<op>\+\+|--|\+=|-=|\*=|/=|%=|==|!=|<=|>=|&&|\|\||[-+*/%<>=!&(){}\[\];,])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, num, str, chr, op, eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind, text = m.lastgroup, m.group()
        if kind == "ident" and text in KEYWORDS:
            kind = "keyword"
        if kind not in ("ws", "nl", "comment"):
            tokens.append(Token(kind, text, line, pos - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- expression trees ----------------------------------------------------


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class Index:
    base: object
    index: object


@dataclass(frozen=True)
class Unary:
    op: str  # -, !, *, &, ++, -- (prefix), p++, p-- (postfix)
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


def variables(expr) -> list[str]:
    """Names read by an expression, in order of first appearance."""
    out = []

    def walk(e):
        if isinstance(e, Name):
            if e.ident not in out:
                out.append(e.ident)
        elif isinstance(e, Call):
            for a in e.args:
                walk(a)
        elif isinstance(e, Index):
            walk(e.base)
            walk(e.index)
        elif isinstance(e, Unary):
            walk(e.operand)
        elif isinstance(e, Binary):
            walk(e.left)
            walk(e.right)

    if expr is not None:
        walk(expr)
    return out


def base_name(expr):
    """The variable an lvalue ultimately refers to, if any."""
    while True:
        if isinstance(expr, Name):
            return expr.ident
        if isinstance(expr, Index):
            expr = expr.base
        elif isinstance(expr, Unary) and expr.op in ("*", "&", "++", "--", "p++", "p--"):
            expr = expr.operand
        elif isinstance(expr, Binary) and expr.op in ("+", "-"):
            expr = expr.left
        else:
            return None


def _increments(expr) -> list[str]:
    found = []

    def walk(e):
        if isinstance(e, Unary):
            if e.op in ("++", "--", "p++", "p--"):
                name = base_name(e.operand)
                if name and name not in found:
                    found.append(name)
            walk(e.operand)
        elif isinstance(e, Call):
            for a in e.args:
                walk(a)
        elif isinstance(e, Index):
            walk(e.base)
            walk(e.index)
        elif isinstance(e, Binary):
            walk(e.left)
            walk(e.right)

    if expr is not None:
        walk(expr)
    return found


# -- statements ----------------------------------------------------------


@dataclass
class Simple:
    """Declaration, assignment, expression statement or return."""

    tokens: list[Token]
    defs: list[str] = field(default_factory=list)
    weak_defs: list[str] = field(default_factory=list)
    uses: list[str] = field(default_factory=list)
    is_return: bool = False


@dataclass
class If:
    keyword: Token
    cond: Simple
    then: list
    else_keyword: Token | None = None
    orelse: list | None = None


@dataclass
class While:
    keyword: Token
    cond: Simple
    body: list


@dataclass
class For:
    keyword: Token
    init: Simple | None
    cond: Simple
    update: Simple | None
    body: list


@dataclass
class Param:
    tokens: list[Token]
    name: str


@dataclass
class FunctionAst:
    name: str
    name_token: Token
    params: list[Param]
    body: list


class _Parser:
    def __init__(self, source):
        self.toks = tokenize(source)
        self.i = 0

    # token helpers
    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, message, tok=None):
        tok = tok or self.cur
        found = tok.text or "end of input"
        return ParseError(f"{message}, found {found!r}", tok.line, tok.col)

    def accept(self, text):
        if self.cur.text == text and self.cur.kind in ("op", "keyword"):
            self.i += 1
            return self.toks[self.i - 1]
        return None

    def expect(self, text) -> Token:
        tok = self.accept(text)
        if tok is None:
            raise self.error(f"expected {text!r}")
        return tok

    def expect_ident(self) -> Token:
        if self.cur.kind != "ident":
            raise self.error("expected identifier")
        self.i += 1
        return self.toks[self.i - 1]

    # grammar
    def function(self) -> FunctionAst:
        if self.cur.text not in TYPE_KEYWORDS:
            raise self.error("expected return type")
        self.i += 1
        while self.accept("*"):
            pass
        name = self.expect_ident()
        self.expect("(")
        params = []
        if self.cur.text == "void" and self.peek().text == ")":
            self.i += 1
        elif self.cur.text != ")":
            params.append(self.param())
            while self.accept(","):
                params.append(self.param())
        self.expect(")")
        body = self.block()
        if self.cur.kind != "eof":
            raise self.error("expected end of input after function body")
        return FunctionAst(name.text, name, params, body)

    def param(self) -> Param:
        start = self.i
        if self.cur.text not in TYPE_KEYWORDS or self.cur.text == "void":
            raise self.error("expected parameter type")
        self.i += 1
        while self.accept("*"):
            pass
        name = self.expect_ident()
        if self.accept("["):
            if self.cur.kind == "num":
                self.i += 1
            self.expect("]")
        return Param(self.toks[start:self.i], name.text)

    def block(self) -> list:
        self.expect("{")
        stmts = []
        while not self.accept("}"):
            if self.cur.kind == "eof":
                raise self.error("expected '}'")
            stmts.extend(self.statement())
        return stmts

    def body(self) -> list:
        if self.cur.text == "{":
            return self.block()
        return self.statement()

    def statement(self) -> list:
        tok = self.cur
        if tok.text == "{" and tok.kind == "op":
            return self.block()
        if tok.text == ";" and tok.kind == "op":
            self.i += 1
            return []
        if tok.kind == "keyword":
            if tok.text == "if":
                self.i += 1
                self.expect("(")
                cond = self.condition()
                self.expect(")")
                then = self.body()
                node = If(tok, cond, then)
                else_tok = self.accept("else")
                if else_tok:
                    node.else_keyword = else_tok
                    node.orelse = self.body()
                return [node]
            if tok.text == "while":
                self.i += 1
                self.expect("(")
                cond = self.condition()
                self.expect(")")
                return [While(tok, cond, self.body())]
            if tok.text == "for":
                self.i += 1
                self.expect("(")
                init = None if self.cur.text == ";" else self.simple()
                self.expect(";")
                if self.cur.text == ";":
                    raise self.error("for loops require a condition")
                cond = self.condition()
                self.expect(";")
                update = None if self.cur.text == ")" else self.simple(allow_decl=False)
                self.expect(")")
                return [For(tok, init, cond, update, self.body())]
            if tok.text == "return":
                start = self.i
                self.i += 1
                expr = None if self.cur.text == ";" else self.expr()
                stmt = Simple(self.toks[start:self.i], is_return=True)
                stmt.uses = variables(expr)
                stmt.weak_defs = _increments(expr)
                self.expect(";")
                return [stmt]
            if tok.text in TYPE_KEYWORDS:
                stmt = self.simple()
                self.expect(";")
                return [stmt]
            raise self.error("unexpected keyword")
        stmt = self.simple(allow_decl=False)
        self.expect(";")
        return [stmt]

    def condition(self) -> Simple:
        start = self.i
        expr = self.expr()
        stmt = Simple(self.toks[start:self.i])
        stmt.uses = variables(expr)
        stmt.defs = _increments(expr)
        return stmt

    def simple(self, allow_decl=True) -> Simple:
        start = self.i
        if self.cur.text in TYPE_KEYWORDS:
            if not allow_decl or self.cur.text == "void":
                raise self.error("declaration not allowed here")
            defs, uses = self.declaration()
            stmt = Simple(self.toks[start:self.i], defs=defs, uses=uses)
            return stmt
        target = self.expr()
        if self.cur.kind == "op" and self.cur.text in ASSIGN_OPS:
            op = self.cur.text
            self.i += 1
            value = self.expr()
            stmt = Simple(self.toks[start:self.i])
            uses = variables(value)
            if isinstance(target, Name):
                stmt.defs = [target.ident]
                if op != "=":
                    uses = [target.ident] + uses
            elif isinstance(target, Index) or (isinstance(target, Unary) and target.op == "*"):
                name = base_name(target)
                if name is None:
                    raise self.error("unsupported assignment target", self.toks[start])
                stmt.weak_defs = [name]
                uses = variables(target) + uses
            else:
                raise self.error("unsupported assignment target", self.toks[start])
            stmt.uses = list(dict.fromkeys(uses))
            for name in _increments(target) + _increments(value):
                if name not in stmt.defs:
                    stmt.defs.append(name)
            return stmt
        stmt = Simple(self.toks[start:self.i])
        stmt.uses = variables(target)
        stmt.defs = _increments(target)
        return stmt

    def declaration(self):
        self.i += 1  # type keyword
        defs, uses = [], []
        while True:
            while self.accept("*"):
                pass
            name = self.expect_ident()
            if self.accept("["):
                if self.cur.text != "]":
                    uses += variables(self.expr())
                self.expect("]")
            if self.accept("="):
                init = self.expr()
                uses += variables(init)
                defs += [n for n in _increments(init) if n not in defs]
            defs.append(name.text)
            if not self.accept(","):
                break
        return list(dict.fromkeys(defs)), list(dict.fromkeys(uses))

    # expressions, lowest precedence first
    def expr(self):
        return self.binary(0)

    _LEVELS = (("||",), ("&&",), ("==", "!="), ("<", ">", "<=", ">="), ("+", "-"), ("*", "/", "%"))

    def binary(self, level):
        if level == len(self._LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        while self.cur.kind == "op" and self.cur.text in self._LEVELS[level]:
            op = self.cur.text
            self.i += 1
            left = Binary(op, left, self.binary(level + 1))
        return left

    def unary(self):
        tok = self.cur
        if tok.kind == "op" and tok.text in ("-", "!", "*", "&", "++", "--", "+"):
            self.i += 1
            operand = self.unary()
            if tok.text in ("&", "++", "--") and base_name(operand) is None:
                raise self.error(f"operand of {tok.text!r} must be a variable", tok)
            return operand if tok.text == "+" else Unary(tok.text, operand)
        return self.postfix()

    def postfix(self):
        expr = self.primary()
        while True:
            if self.accept("["):
                expr = Index(expr, self.expr())
                self.expect("]")
            elif self.cur.text in ("++", "--") and self.cur.kind == "op":
                if base_name(expr) is None:
                    raise self.error("increment of a non-variable")
                expr = Unary("p" + self.cur.text, expr)
                self.i += 1
            else:
                return expr

    def primary(self):
        tok = self.cur
        if tok.kind == "ident":
            self.i += 1
            if self.accept("("):
                args = []
                if self.cur.text != ")":
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
                return Call(tok.text, tuple(args))
            return Name(tok.text)
        if tok.kind in ("num", "str", "chr"):
            self.i += 1
            return Literal(tok.text)
        if self.accept("("):
            expr = self.expr()
            self.expect(")")
            return expr
        raise self.error("expected expression")


def parse_ast(source: str) -> FunctionAst:
    return _Parser(source).function()


# -- graph construction --------------------------------------------------


@dataclass
class ParsedFunction:
    """A Cpg plus the per-node definition/use facts behind its DDG."""

    cpg: Cpg
    defs: dict[int, set[str]]
    weak_defs: dict[int, set[str]]
    uses: dict[int, set[str]]
    param_types: dict[str, str]
    # nodes with a control-flow edge to the implicit function exit, which is
    # not materialized as a node
    exit_preds: frozenset = frozenset()


class _Builder:
    def __init__(self, ast: FunctionAst, function_id, label):
        self.ast = ast
        self.function_id = function_id
        self.label = label
        self.nodes: list[CpgNode] = []
        self.edges: set[tuple[int, int, str]] = set()
        self.defs: dict[int, set[str]] = {}
        self.weak: dict[int, set[str]] = {}
        self.uses: dict[int, set[str]] = {}
        self.exit_preds: set[int] = set()

    def new_node(self, kind, tokens, line, parent=None):
        node_id = len(self.nodes)
        self.nodes.append(CpgNode(node_id, kind, tuple(t.text for t in tokens), line))
        if parent is not None:
            self.edges.add((parent, node_id, "AST"))
        return node_id

    def simple_node(self, stmt: Simple, kind, parent):
        nid = self.new_node(kind, stmt.tokens, stmt.tokens[0].line, parent)
        self.defs[nid] = set(stmt.defs)
        self.weak[nid] = set(stmt.weak_defs)
        self.uses[nid] = set(stmt.uses)
        return nid

    # pass 1: nodes in preorder, AST edges, structural CDG
    def number(self, stmts, parent, controller):
        for s in stmts:
            if isinstance(s, Simple):
                s.nid = self.simple_node(s, "statement", parent)
                self._cdg(controller, s.nid)
            elif isinstance(s, If):
                s.nid = self.new_node("syntax", [s.keyword], s.keyword.line, parent)
                s.cond.nid = self.simple_node(s.cond, "condition", s.nid)
                self._cdg(controller, s.cond.nid)
                self.number(s.then, s.nid, s.cond.nid)
                if s.else_keyword is not None:
                    s.else_nid = self.new_node("syntax", [s.else_keyword], s.else_keyword.line, s.nid)
                    self.number(s.orelse, s.else_nid, s.cond.nid)
            elif isinstance(s, While):
                s.nid = self.new_node("syntax", [s.keyword], s.keyword.line, parent)
                s.cond.nid = self.simple_node(s.cond, "condition", s.nid)
                self._cdg(controller, s.cond.nid)
                self.number(s.body, s.nid, s.cond.nid)
            elif isinstance(s, For):
                s.nid = self.new_node("syntax", [s.keyword], s.keyword.line, parent)
                if s.init is not None:
                    s.init.nid = self.simple_node(s.init, "statement", s.nid)
                    self._cdg(controller, s.init.nid)
                s.cond.nid = self.simple_node(s.cond, "condition", s.nid)
                self._cdg(controller, s.cond.nid)
                if s.update is not None:
                    s.update.nid = self.simple_node(s.update, "statement", s.nid)
                    self._cdg(s.cond.nid, s.update.nid)
                self.number(s.body, s.nid, s.cond.nid)

    def _cdg(self, controller, nid):
        if controller is not None:
            self.edges.add((controller, nid, "CDG"))

    # pass 2: CFG, built back to front; None stands for the function exit
    def flow(self, stmts, nxt):
        for s in reversed(stmts):
            nxt = self.flow_one(s, nxt)
        return nxt

    def _cfg(self, src, dst):
        if dst is None:
            self.exit_preds.add(src)
        else:
            self.edges.add((src, dst, "CFG"))

    def flow_one(self, s, nxt):
        if isinstance(s, Simple):
            self._cfg(s.nid, None if s.is_return else nxt)
            return s.nid
        if isinstance(s, If):
            c = s.cond.nid
            self._cfg(c, self.flow(s.then, nxt))
            self._cfg(c, self.flow(s.orelse, nxt) if s.orelse is not None else nxt)
            return c
        if isinstance(s, While):
            c = s.cond.nid
            self._cfg(c, self.flow(s.body, c))
            self._cfg(c, nxt)
            return c
        c = s.cond.nid
        back = c
        if s.update is not None:
            self._cfg(s.update.nid, c)
            back = s.update.nid
        self._cfg(c, self.flow(s.body, back))
        self._cfg(c, nxt)
        if s.init is not None:
            self._cfg(s.init.nid, c)
            return s.init.nid
        return c

    def reaching_definitions(self, entry, param_names):
        cfg_nodes = [n.node_id for n in self.nodes if n.kind != "syntax"]
        preds = {v: [] for v in cfg_nodes}
        for src, dst, kind in self.edges:
            if kind == "CFG":
                preds[dst].append(src)
        self.defs[entry] = set(param_names)
        self.weak.setdefault(entry, set())
        self.uses.setdefault(entry, set())
        strong_sites = {}
        for v in cfg_nodes:
            for var in self.defs[v]:
                strong_sites.setdefault(var, set()).add(v)
        gen = {v: {(var, v) for var in self.defs[v] | self.weak[v]} for v in cfg_nodes}
        out = {v: set(gen[v]) for v in cfg_nodes}
        ins = {v: set() for v in cfg_nodes}
        changed = True
        while changed:
            changed = False
            for v in cfg_nodes:
                new_in = set().union(*(out[p] for p in preds[v])) if preds[v] else set()
                new_out = gen[v] | {(var, d) for var, d in new_in if var not in self.defs[v]}
                if new_in != ins[v] or new_out != out[v]:
                    ins[v], out[v] = new_in, new_out
                    changed = True
        for v in cfg_nodes:
            for var, d in ins[v]:
                if var in self.uses[v]:
                    self.edges.add((d, v, "DDG"))

    def build(self) -> ParsedFunction:
        entry = self.new_node("entry", [], self.ast.name_token.line)
        param_types = {}
        for p in self.ast.params:
            self.new_node("syntax", p.tokens, p.tokens[0].line, entry)
            texts = [t.text for t in p.tokens]
            param_types[p.name] = texts[0] + ("*" if "*" in texts or "[" in texts else "")
        self.number(self.ast.body, entry, None)
        self._cfg(entry, self.flow(self.ast.body, None))
        self.reaching_definitions(entry, [p.name for p in self.ast.params])
        edges = [CpgEdge(s, d, k) for s, d, k in sorted(self.edges)]
        cpg = Cpg(self.function_id, self.nodes, edges, self.label)
        return ParsedFunction(cpg, self.defs, self.weak, self.uses, param_types, frozenset(self.exit_preds))


def parse_detailed(source: str, function_id=None, label="unknown") -> ParsedFunction:
    ast = parse_ast(source)
    return _Builder(ast, function_id or ast.name, label).build()


def parse_function(source: str, function_id=None, label="unknown") -> Cpg:
    """Parse one mini-C function into a validated :class:`Cpg`."""
    return parse_detailed(source, function_id, label).cpg.validate()
