"""Per-vertex scalar fields: expressions, CSV files, validation.

Fields are plain numpy arrays with one value per vertex.  Boundary-only
data (e.g. a prescribed boundary curvature given on boundary vertices
alone) is stored zero-extended to the full vertex set and tagged, since
every formula that consumes it multiplies by a boundary measure that
vanishes at interior vertices.

Analytic fields are written in ``x``, ``y``, ``z`` with ``+ - * / ^``,
parentheses, ``sin``, ``cos``, ``exp``, ``log``, ``abs``, ``min``,
``max`` and numeric literals, and are evaluated at the load-time vertex
positions (boundary data is thereby smoothly extended to all vertices).
"""

from __future__ import annotations

import numpy as np

from .errors import FieldError

_FUNCS1 = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs,
           "log": np.log}
_FUNCS2 = {"min": np.minimum, "max": np.maximum}
_VARS = ("x", "y", "z")


class ScalarField:
    """One real value per vertex, tagged with its domain of definition."""

    def __init__(self, values, domain="all"):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1:
            raise FieldError("field values must be a 1-D array")
        if not np.all(np.isfinite(values)):
            raise FieldError("field has non-finite entries")
        if domain not in ("all", "boundary"):
            raise FieldError("domain must be 'all' or 'boundary'")
        self.values = values
        self.domain = domain

    def __len__(self):
        return len(self.values)


def as_field_values(field, mesh, name="field"):
    """Coerce a ScalarField / array / scalar to a full-length value array."""
    if field is None:
        return np.zeros(mesh.vertex_count)
    if isinstance(field, ScalarField):
        values = field.values
    elif np.isscalar(field):
        return np.full(mesh.vertex_count, float(field))
    else:
        values = np.asarray(field, dtype=float)
    if values.shape != (mesh.vertex_count,):
        raise FieldError("%s has %d values, mesh has %d vertices"
                         % (name, values.size, mesh.vertex_count))
    if not np.all(np.isfinite(values)):
        raise FieldError("%s has non-finite entries" % name)
    return values


# ----------------------------------------------------------------------
# expression grammar: recursive descent over
#   expr  := term (('+'|'-') term)*
#   term  := unary (('*'|'/') unary)*
#   unary := '-' unary | power
#   power := atom ('^' unary)?
#   atom  := number | var | func '(' expr [',' expr] ')' | '(' expr ')'


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "+-*/^(),":
            tokens.append((ch, ch))
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] in ".eE"
                             or (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            try:
                tokens.append(("num", float(text[i:j])))
            except ValueError:
                raise FieldError("bad numeric literal %r" % text[i:j])
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j]))
            i = j
        else:
            raise FieldError("unexpected character %r in expression" % ch)
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos][0]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise FieldError("expected %r, found %r" % (kind, tok[1]))
        return tok

    def parse(self):
        node = self.expr()
        if self.peek() != "end":
            raise FieldError("trailing input after expression: %r"
                             % self.tokens[self.pos][1])
        return node

    def expr(self):
        node = self.term()
        while self.peek() in "+-":
            op = self.next()[0]
            rhs = self.term()
            node = (op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() in "*/":
            op = self.next()[0]
            rhs = self.unary()
            node = (op, node, rhs)
        return node

    def unary(self):
        if self.peek() == "-":
            self.next()
            return ("neg", self.unary())
        if self.peek() == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek() == "^":
            self.next()
            return ("^", node, self.unary())
        return node

    def atom(self):
        kind, value = self.next()
        if kind == "num":
            return ("num", value)
        if kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if value in _VARS:
                return ("var", value)
            if value in _FUNCS1:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call1", value, arg)
            if value in _FUNCS2:
                self.expect("(")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return ("call2", value, a, b)
            raise FieldError("unknown name %r (variables are x, y, z)" % value)
        raise FieldError("unexpected token %r" % (value,))


def _eval_node(node, env):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        return env[node[1]]
    if op == "neg":
        return -_eval_node(node[1], env)
    if op == "call1":
        return _FUNCS1[node[1]](_eval_node(node[2], env))
    if op == "call2":
        return _FUNCS2[node[1]](_eval_node(node[2], env), _eval_node(node[3], env))
    a = _eval_node(node[1], env)
    b = _eval_node(node[2], env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op == "^":
        return np.power(a, b)
    raise FieldError("internal: unknown node %r" % op)


def evaluate_expression(text, mesh):
    """Evaluate an expression at every vertex position of the mesh."""
    if mesh.vertex_positions is None:
        raise FieldError("mesh has no vertex positions; analytic expressions "
                         "need a mesh loaded from a file")
    tree = _Parser(text).parse()
    pos = mesh.vertex_positions
    env = {"x": pos[:, 0], "y": pos[:, 1], "z": pos[:, 2]}
    with np.errstate(all="ignore"):
        values = _eval_node(tree, env)
    values = np.broadcast_to(np.asarray(values, dtype=float),
                             (mesh.vertex_count,)).copy()
    if not np.all(np.isfinite(values)):
        raise FieldError("expression %r evaluates to non-finite values "
                         "(division by zero, log of a nonpositive number?)"
                         % text)
    return ScalarField(values, domain="all")


def read_field_csv(path, mesh):
    """Read ``vertex_index,value`` rows; full or boundary-only coverage.

    A header row is skipped if the first cell is not an integer.  Rows
    must cover either every vertex or exactly the boundary vertices (the
    latter yields a boundary-only field, zero at interior vertices).
    """
    idx, vals = [], []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) < 2:
                raise FieldError("%s:%d: expected vertex_index,value" % (path, ln))
            try:
                i = int(parts[0])
            except ValueError:
                if ln == 1:
                    continue  # header
                raise FieldError("%s:%d: bad vertex index %r" % (path, ln, parts[0]))
            try:
                v = float(parts[1])
            except ValueError:
                raise FieldError("%s:%d: bad value %r" % (path, ln, parts[1]))
            idx.append(i)
            vals.append(v)
    idx = np.asarray(idx, dtype=np.int64)
    if len(idx) == 0:
        raise FieldError("%s: no data rows" % path)
    if len(np.unique(idx)) != len(idx):
        raise FieldError("%s: duplicate vertex index" % path)
    if idx.min() < 0 or idx.max() >= mesh.vertex_count:
        raise FieldError("%s: vertex index out of range" % path)

    full = np.zeros(mesh.vertex_count)
    full[idx] = vals
    covered = np.zeros(mesh.vertex_count, dtype=bool)
    covered[idx] = True
    if covered.all():
        return ScalarField(full, domain="all")
    if np.array_equal(np.nonzero(covered)[0], mesh.boundary_vertices):
        return ScalarField(full, domain="boundary")
    raise FieldError("%s: rows must cover all vertices or exactly the "
                     "boundary vertices (%d of %d covered)"
                     % (path, covered.sum(), mesh.vertex_count))
