"""Runtime support for Python code generated from Patch programs."""

import decimal
import functools
import math
import sys

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1
LOOP_BUDGET = 1000000
MAX_DEPTH = 100


class PatchError(Exception):
    def __init__(self, kind, message=""):
        Exception.__init__(self, kind)
        self.kind = kind
        self.message = message


class Stop(Exception):
    pass


class _Unset(object):
    def __repr__(self):
        return "UNSET"


UNSET = _Unset()


class PList(tuple):
    pass


class PSet(tuple):
    pass


class PTuple(object):
    __slots__ = ("names", "vals")

    def __init__(self, names, vals):
        self.names = tuple(names)
        self.vals = tuple(vals)


# Types are tuples: ("integer",), ("list", elem), ("tuple", names, types).
T_INT = ("integer",)
T_REAL = ("real",)
T_BOOL = ("boolean",)
T_STR = ("string",)
T_UNKNOWN = ("unknown",)


def T_LIST(e):
    return ("list", e)


def T_SET(e):
    return ("set", e)


def T_TUPLE(names, types):
    return ("tuple", tuple(names), tuple(types))


def is_int(v):
    return type(v) is int


def is_real(v):
    return type(v) is float


def _rank(v):
    t = type(v)
    if t is bool:
        return 0
    if t is int or t is float:
        return 1
    if t is str:
        return 2
    if t is PList:
        return 3
    if t is PSet:
        return 4
    return 5


def type_name(v):
    t = type(v)
    if t is bool:
        return "boolean"
    if t is int:
        return "integer"
    if t is float:
        return "real"
    if t is str:
        return "string"
    if t is PList:
        return "list"
    if t is PSet:
        return "set"
    return "tuple"


def _sign(a, b):
    return (a > b) - (a < b)


def _num_cmp(a, b):
    if type(a) is int and type(b) is int:
        return _sign(a, b)
    return _sign(float(a), float(b))


def _seq_cmp(x, y):
    for p, q in zip(x, y):
        c = ccmp(p, q)
        if c:
            return c
    return _sign(len(x), len(y))


def ccmp(a, b):
    """Total order used for sets and ordering."""
    ra, rb = _rank(a), _rank(b)
    if ra != rb:
        return _sign(ra, rb)
    if ra == 0:
        return _sign(int(a), int(b))
    if ra == 1:
        return _num_cmp(a, b)
    if ra == 2:
        return _sign(a, b)
    if ra in (3, 4):
        return _seq_cmp(a, b)
    return _seq_cmp(a.vals, b.vals)


def equal(a, b):
    return _rank(a) == _rank(b) and ccmp(a, b) == 0


def mk_set(items):
    items = sorted(items, key=functools.cmp_to_key(ccmp))
    out = []
    for x in items:
        if not out or ccmp(out[-1], x) != 0:
            out.append(x)
    return PSet(out)


def L(*items):
    return PList(items)


def S(*items):
    return mk_set(items)


def T(names, vals):
    return PTuple(names, vals)


# Arithmetic


def _mismatch(op, a, b=None):
    if b is None:
        return PatchError("type-mismatch", "operator %s does not apply to %s" % (op, type_name(a)))
    return PatchError("type-mismatch", "operator %s does not apply to %s and %s" % (op, type_name(a), type_name(b)))


def _checked(i):
    if i < INT_MIN or i > INT_MAX:
        raise PatchError("arith-overflow")
    return i


def _finite(x):
    if math.isinf(x) or math.isnan(x):
        raise PatchError("arith-overflow")
    return x


def _numbers(op, a, b):
    if _rank(a) != 1 or _rank(b) != 1:
        raise _mismatch(op, a, b)
    return float(a), float(b)


def add(a, b):
    if type(a) is int and type(b) is int:
        return _checked(a + b)
    x, y = _numbers("+", a, b)
    return _finite(x + y)


def sub(a, b):
    if type(a) is int and type(b) is int:
        return _checked(a - b)
    x, y = _numbers("-", a, b)
    return _finite(x - y)


def mul(a, b):
    if type(a) is int and type(b) is int:
        return _checked(a * b)
    x, y = _numbers("*", a, b)
    return _finite(x * y)


def div(a, b):
    x, y = _numbers("/", a, b)
    if y == 0.0:
        raise PatchError("division-by-zero")
    return _finite(x / y)


def pow_(a, b):
    x, y = _numbers("^", a, b)
    try:
        r = math.pow(x, y)
    except (ValueError, OverflowError):
        raise PatchError("arith-overflow")
    return _finite(r)


def neg(a):
    if type(a) is int:
        return _checked(-a)
    if type(a) is float:
        return -a
    raise _mismatch("-", a)


def not_(a):
    if type(a) is bool:
        return not a
    raise _mismatch("NOT", a)


def len_(a):
    if type(a) in (PList, PSet):
        return len(a)
    raise _mismatch("LEN", a)


def _ordered(op, a, b):
    ra, rb = _rank(a), _rank(b)
    if ra == rb and ra in (0, 2):
        return ccmp(a, b)
    if ra == 1 and rb == 1:
        return _num_cmp(a, b)
    raise _mismatch(op, a, b)


def lt(a, b):
    return _ordered("<", a, b) < 0


def gt(a, b):
    return _ordered(">", a, b) > 0


def le(a, b):
    return _ordered("<=", a, b) <= 0


def ge(a, b):
    return _ordered(">=", a, b) >= 0


def eq(a, b):
    ra, rb = _rank(a), _rank(b)
    if ra != rb and not (ra == 1 and rb == 1):
        raise _mismatch("=", a, b)
    return equal(a, b)


def and_(a, rest):
    if type(a) is not bool:
        raise _mismatch("AND", a, True)
    if not a:
        return False
    b = rest()
    if type(b) is not bool:
        raise _mismatch("AND", a, b)
    return b


def or_(a, rest):
    if type(a) is not bool:
        raise _mismatch("OR", a, True)
    if a:
        return True
    b = rest()
    if type(b) is not bool:
        raise _mismatch("OR", a, b)
    return b


def in_(a, b):
    if type(b) is not PSet:
        raise _mismatch("IN", a, b)
    return any(equal(a, x) for x in b)


def _sets(op, a, b):
    if type(a) is not PSet or type(b) is not PSet:
        raise _mismatch(op, a, b)


def union(a, b):
    _sets("UNION", a, b)
    return mk_set(list(a) + list(b))


def intersect(a, b):
    _sets("INTERSECT", a, b)
    return mk_set([x for x in a if any(equal(x, y) for y in b)])


def except_(a, b):
    _sets("EXCEPT", a, b)
    return mk_set([x for x in a if not any(equal(x, y) for y in b)])


def cross(a, b):
    _sets("CROSS", a, b)
    return mk_set([PTuple(("first", "second"), (p, q)) for p in a for q in b])


def cond(v):
    if type(v) is not bool:
        raise PatchError("type-mismatch", "condition must be boolean")
    return v


def as_int(v):
    if type(v) is not int:
        raise PatchError("type-mismatch", "expected an integer")
    return v


def span(lo, hi):
    d = 1 if lo <= hi else -1
    return range(lo, hi + d, d)


def items_of(v):
    if type(v) is not PList:
        raise PatchError("type-mismatch", "a sentinel loop needs a list")
    return v


# Access


def get(v, name):
    if v is UNSET:
        raise PatchError("unbound-variable", name + " has no value yet")
    return v


def _position(c, i):
    """Checks a 0-based position against c."""
    t = type(c)
    if t is PSet:
        raise PatchError("not-indexable")
    if t is PList:
        n = len(c)
    elif t is PTuple:
        n = len(c.vals)
    else:
        raise PatchError("not-indexable")
    if type(i) is not int:
        raise PatchError("type-mismatch", "index must be an integer")
    if i < 0 or i >= n:
        raise PatchError("index-out-of-range")
    return i


def at(c, i):
    k = _position(c, i)
    if type(c) is PList:
        return c[k]
    return c.vals[k]


def _field_pos(c, name):
    if type(c) is not PTuple:
        raise PatchError("type-mismatch", "field access")
    for k, n in enumerate(c.names):
        if n == name:
            return k
    raise PatchError("no-such-field", name)


def fld(c, name):
    return c.vals[_field_pos(c, name)]


def IX(i):
    return ("i", i)


def FLD(name):
    return ("f", name)


def _replace(c, k, v):
    if type(c) is PList:
        out = list(c)
        out[k] = v
        return PList(out)
    vals = list(c.vals)
    vals[k] = v
    return PTuple(c.names, vals)


def _put(c, path, v):
    if not path:
        return v
    kind, key = path[0]
    if kind == "i":
        k = _position(c, key)
        inner = c[k] if type(c) is PList else c.vals[k]
    else:
        k = _field_pos(c, key)
        inner = c.vals[k]
    return _replace(c, k, _put(inner, path[1:], v))


def put(root, name, path, v):
    """Returns root with the element at path replaced by v."""
    get(root, name)
    return _put(root, path, v)


def read(root, name, path):
    c = get(root, name)
    for kind, key in path:
        c = at(c, key) if kind == "i" else fld(c, key)
    return c


def to_int(v):
    if type(v) is float:
        t = math.trunc(v) if not (math.isinf(v) or math.isnan(v)) else None
        if t is None or not (-9223372036854775808.0 <= float(t) < 9223372036854775808.0):
            raise PatchError("arith-overflow")
        return int(t)
    return v


def to_real(v):
    if type(v) is int:
        return float(v)
    return v


def out(outputs, name):
    v = outputs[name]
    if v is UNSET:
        raise PatchError("unbound-variable", "output " + name + " was never set")
    return v


# Rendering


def render_real(x):
    if x == 0.0:
        return "-0.0" if math.copysign(1.0, x) < 0 else "0.0"
    sign = "-" if x < 0 else ""
    t = decimal.Decimal(repr(abs(x))).as_tuple()
    digits = list(t.digits)
    exp = t.exponent
    while len(digits) > 1 and digits[-1] == 0:
        digits.pop()
        exp += 1
    ds = "".join(str(d) for d in digits)
    e10 = len(ds) - 1 + exp
    a = abs(x)
    if a < 1e-4 or a >= 1e16:
        body = ds[0] + ("." + ds[1:] if len(ds) > 1 else "")
        return sign + body + "e" + str(e10)
    if exp >= 0:
        return sign + ds + "0" * exp + ".0"
    n = len(ds) + exp
    if n > 0:
        return sign + ds[:n] + "." + ds[n:]
    return sign + "0." + "0" * (-n) + ds


def render_string(s):
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def render(v):
    t = type(v)
    if t is bool:
        return "TRUE" if v else "FALSE"
    if t is int:
        return str(v)
    if t is float:
        return render_real(v)
    if t is str:
        return render_string(v)
    if t is PList:
        return "[" + ", ".join(render(x) for x in v) + "]"
    if t is PSet:
        return "{" + ", ".join(render(x) for x in v) + "}"
    return "<" + ", ".join(render(x) for x in v.vals) + ">"


# Reading


class _Reader(object):
    def __init__(self, text):
        self.s = text
        self.i = 0

    def fail(self, msg):
        raise PatchError("literal-syntax-error", msg)

    def ws(self):
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def eat(self, tok):
        self.ws()
        if self.s.startswith(tok, self.i):
            self.i += len(tok)
            return True
        return False

    def peek(self):
        self.ws()
        return self.s[self.i] if self.i < len(self.s) else ""

    def word(self):
        self.ws()
        j = self.i
        if j < len(self.s) and (self.s[j].isascii() and (self.s[j].isalpha() or self.s[j] == "_")):
            j += 1
            while j < len(self.s) and self.s[j].isascii() and (self.s[j].isalnum() or self.s[j] == "_"):
                j += 1
        w = self.s[self.i:j]
        self.i = j
        return w

    def value(self):
        c = self.peek()
        if c == "":
            self.fail("expected a value")
        if c == '"':
            return self.string()
        if c in "[{":
            self.i += 1
            close = "]" if c == "[" else "}"
            items = []
            if not self.eat(close):
                while True:
                    items.append(self.value())
                    if self.eat(close):
                        break
                    if not self.eat(","):
                        self.fail("expected , or " + close)
            return PList(items) if c == "[" else mk_set(items)
        if c == "<":
            self.i += 1
            names, vals = [], []
            if not self.eat(">"):
                while True:
                    save = self.i
                    w = self.word()
                    if not (w and self.eat(":")):
                        self.i = save
                        w = "f%d" % (len(vals) + 1)
                    names.append(w.lower())
                    vals.append(self.value())
                    if self.eat(">"):
                        break
                    if not self.eat(","):
                        self.fail("expected , or >")
            return PTuple(names, vals)
        if c.isdigit() or c in "+-":
            return self.number()
        w = self.word().upper()
        if w == "TRUE":
            return True
        if w == "FALSE":
            return False
        self.fail("expected a value")

    def number(self):
        s, i = self.s, self.i
        j = i
        if j < len(s) and s[j] in "+-":
            j += 1
        d0 = j
        while j < len(s) and s[j].isdigit() and s[j].isascii():
            j += 1
        if j == d0:
            self.fail("expected digits")
        real = False
        if j + 1 < len(s) and s[j] == "." and s[j + 1].isdigit():
            real = True
            j += 1
            while j < len(s) and s[j].isdigit():
                j += 1
        if j < len(s) and s[j] in "eE":
            k = j + 1
            if k < len(s) and s[k] in "+-":
                k += 1
            if k < len(s) and s[k].isdigit():
                real = True
                while k < len(s) and s[k].isdigit():
                    k += 1
                j = k
        tok = s[i:j]
        self.i = j
        if real:
            x = float(tok)
            if math.isinf(x):
                self.fail("real out of range")
            return x
        n = int(tok)
        if n < INT_MIN or n > INT_MAX:
            self.fail("integer out of range")
        return n

    def string(self):
        s = self.s
        self.i += 1
        out = []
        while True:
            if self.i >= len(s):
                self.fail("unterminated string")
            ch = s[self.i]
            self.i += 1
            if ch == '"':
                return "".join(out)
            if ch != "\\":
                out.append(ch)
                continue
            if self.i >= len(s):
                self.fail("unterminated escape")
            e = s[self.i]
            self.i += 1
            if e in '"\\':
                out.append(e)
            elif e == "n":
                out.append("\n")
            elif e == "t":
                out.append("\t")
            elif e == "r":
                out.append("\r")
            elif e == "u":
                h = s[self.i:self.i + 4]
                if len(h) != 4 or any(x not in "0123456789abcdefABCDEF" for x in h):
                    self.fail("bad escape")
                out.append(chr(int(h, 16)))
                self.i += 4
            else:
                self.fail("unknown escape")


def conform(v, t):
    """Shapes an untyped literal to type t: integers widen where reals are
    expected and tuple members take their declared names."""
    k = t[0]
    bad = PatchError("literal-syntax-error", "expected a " + k + " value")
    if k == "unknown":
        return v
    if k == "real":
        if type(v) is int:
            return float(v)
        if type(v) is float:
            return v
        raise bad
    if k == "integer":
        if type(v) is int:
            return v
        raise bad
    if k == "boolean":
        if type(v) is bool:
            return v
        raise bad
    if k == "string":
        if type(v) is str:
            return v
        raise bad
    if k == "list":
        if type(v) is not PList:
            raise bad
        return PList(conform(x, t[1]) for x in v)
    if k == "set":
        if type(v) is not PSet:
            raise bad
        return mk_set([conform(x, t[1]) for x in v])
    if type(v) is not PTuple or len(v.vals) != len(t[1]):
        raise bad
    for k, (given, want) in enumerate(zip(v.names, t[1])):
        if given != want and given != "f%d" % (k + 1):
            raise bad
    return PTuple(t[1], [conform(x, u) for x, u in zip(v.vals, t[2])])


def parse_value(text, t):
    r = _Reader(text)
    v = r.value()
    r.ws()
    if r.i != len(r.s):
        r.fail("trailing text after value")
    return conform(v, t)


# Execution context


class Ctx(object):
    def __init__(self, lines, emit):
        self.lines = list(lines)
        self.emit = emit
        self.repo = {}
        self.ticks = 0

    def tick(self):
        self.ticks += 1
        if self.ticks > LOOP_BUDGET:
            raise PatchError("budget-exceeded")

    def read_line(self, name):
        if not self.lines:
            raise PatchError("console-exhausted", "no input left for " + name)
        return self.lines.pop(0).strip()

    def display(self, v):
        self.emit("display " + render(v))

    def repo_put(self, module, name, v):
        self.repo[(module, name)] = v

    def repo_get(self, module, name):
        if (module, name) not in self.repo:
            raise PatchError("repository-missing", name)
        return self.repo[(module, name)]


def serve(programs):
    """Reads `#run <program> <line-count>` blocks from stdin and answers
    each with `#run`, the displayed values, outputs or error, and `#end`."""
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(encoding="utf-8")
    data = sys.stdin.buffer.read().decode("utf-8").split("\n")
    pos = 0
    buf = []
    while pos < len(data):
        head = data[pos].split()
        pos += 1
        if not head:
            continue
        which, count = int(head[1]), int(head[2])
        lines = data[pos:pos + count]
        pos += count
        buf.append("#run")
        entry, inputs, outputs = programs[which]
        ctx = Ctx(lines[len(inputs):], buf.append)
        try:
            if len(lines) < len(inputs):
                raise PatchError("console-exhausted", "missing caller inputs")
            args = [parse_value(lines[k].strip(), t) for k, t in enumerate(inputs)]
            result = entry(ctx, 0, *args)
            values = [(name, out(result, name)) for name in outputs]
            for name, v in values:
                buf.append("output " + name + " " + render(v))
        except PatchError as e:
            buf.append("error " + e.kind)
        except RecursionError:
            buf.append("error recursion-limit")
        buf.append("#end")
    sys.stdout.write("\n".join(buf) + "\n")

