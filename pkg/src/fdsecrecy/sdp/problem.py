"""Affine matrix expressions and LMI problem families.

An :class:`LmiProblem` describes ``batch`` problems that share one structure
(variables, block sizes, constraint list) but may differ in their data. Data
that varies across the batch enters through 1-D parameter arrays of length
``batch``, e.g. ``t * (n0 + t3)`` with ``t.shape == (batch,)``.

Every expression is stored as a constant plus one coefficient tensor per
variable, all carrying a leading batch axis of length 1 (shared) or
``batch``.
"""
from dataclasses import dataclass, field

import numpy as np

from ..linalg import real_embed

KINDS = ("hermitian", "nonneg", "free")


class ModelError(ValueError):
    pass


@dataclass(eq=False)
class Variable:
    name: str
    kind: str
    dim: int
    offset: int

    @property
    def size(self):
        return self.dim * self.dim if self.kind == "hermitian" else 1

    def basis(self):
        """Complex basis matrices, shape ``(size, dim, dim)``."""
        if self.kind != "hermitian":
            return np.ones((1, 1, 1), dtype=complex)
        m = self.dim
        out = []
        for i in range(m):
            e = np.zeros((m, m), dtype=complex)
            e[i, i] = 1.0
            out.append(e)
        for i in range(m):
            for j in range(i + 1, m):
                e = np.zeros((m, m), dtype=complex)
                e[i, j] = e[j, i] = 1.0
                out.append(e)
                e = np.zeros((m, m), dtype=complex)
                e[i, j] = 1j
                e[j, i] = -1j
                out.append(e)
        return np.array(out)

    def pack(self, value):
        """Real parameter vector of a Hermitian value (inverse of basis)."""
        value = np.asarray(value, dtype=complex)
        if self.kind != "hermitian":
            return np.real(value).reshape(value.shape[:-2] + (1,))
        m = self.dim
        parts = [value[..., i, i].real for i in range(m)]
        for i in range(m):
            for j in range(i + 1, m):
                parts.append(value[..., i, j].real)
                parts.append(value[..., i, j].imag)
        return np.stack(parts, axis=-1)

    def unpack(self, x):
        """Value(s) of this variable from a real vector ``x`` (..., n)."""
        xs = np.asarray(x)[..., self.offset:self.offset + self.size]
        if self.kind != "hermitian":
            return xs[..., 0]
        return np.einsum("...a,aij->...ij", xs, self.basis())


def _param(p, batch):
    p = np.asarray(p, dtype=float)
    if p.ndim == 0:
        return p
    if p.ndim != 1 or p.shape[0] not in (1, batch):
        raise ModelError(f"parameter arrays must have shape ({batch},)")
    return p


class Affine:
    """Affine complex-matrix-valued expression of the problem variables."""

    __array_priority__ = 1000

    def __init__(self, problem, const, terms=None):
        self.problem = problem
        const = np.asarray(const, dtype=complex)
        if const.ndim == 2:
            const = const[None]
        self.const = const
        self.terms = dict(terms or {})

    @property
    def shape(self):
        return self.const.shape[1:]

    # construction helpers -------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Affine):
            if other.problem is not self.problem:
                raise ModelError("expressions belong to different problems")
            return other
        other = np.asarray(other, dtype=complex)
        if other.ndim == 0:
            other = np.full(self.shape, other, dtype=complex)
        elif other.ndim == 1 and self.shape == (1, 1):
            # batched scalar constant
            other = other[:, None, None]
        return Affine(self.problem, other)

    def _map(self, fn):
        return Affine(self.problem, fn(self.const),
                      {v: fn(c) for v, c in self.terms.items()})

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        if self.shape != other.shape:
            raise ModelError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms[v] + c if v in terms else c
        return Affine(self.problem, self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return self._map(lambda a: -a)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if isinstance(other, Affine):
            raise ModelError("product of two expressions is not affine")
        other = np.asarray(other)
        if other.ndim == 2:
            # scalar expression times a constant matrix
            if self.shape != (1, 1):
                raise ModelError("matrix scaling needs a 1x1 expression")
            mat = other.astype(complex)
            return self._map(lambda a: a * mat)
        p = _param(other, self.problem.batch)
        if p.ndim == 0:
            return self._map(lambda a: a * p)
        return Affine(self.problem, self.const * p[:, None, None],
                      {v: c * p[:, None, None, None]
                       for v, c in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / np.asarray(other, dtype=float))

    def __matmul__(self, mat):
        mat = np.asarray(mat, dtype=complex)
        return self._map(lambda a: a @ mat)

    def __rmatmul__(self, mat):
        mat = np.asarray(mat, dtype=complex)
        return self._map(lambda a: mat @ a)

    @property
    def H(self):
        return self._map(lambda a: np.conj(np.swapaxes(a, -1, -2)))

    def trace(self):
        return self._map(
            lambda a: np.trace(a, axis1=-2, axis2=-1)[..., None, None])

    # evaluation -----------------------------------------------------------
    def value(self, x):
        """Evaluate at real variable vectors ``x`` of shape (batch, n)."""
        x = np.atleast_2d(x)
        out = np.broadcast_to(self.const, (x.shape[0],) + self.shape).copy()
        for v, c in self.terms.items():
            xs = x[:, v.offset:v.offset + v.size]
            out = out + np.einsum("ba,bars->brs", xs,
                                  np.broadcast_to(c, (x.shape[0],) + c.shape[1:]))
        return out


def block(rows):
    """Assemble a block matrix from nested lists of expressions/constants.

    Constant entries (arrays or 0) take their shape from the row/column they
    sit in.
    """
    problem = None
    for row in rows:
        for e in row:
            if isinstance(e, Affine):
                problem = e.problem
    if problem is None:
        raise ModelError("block needs at least one expression")
    heights = []
    for row in rows:
        hs = {e.shape[0] for e in row if isinstance(e, Affine)}
        hs |= {np.shape(e)[0] for e in row
               if not isinstance(e, Affine) and np.ndim(e) == 2}
        if len(hs) != 1:
            raise ModelError("inconsistent block row heights")
        heights.append(hs.pop())
    widths = []
    for j in range(len(rows[0])):
        ws = {row[j].shape[1] for row in rows if isinstance(row[j], Affine)}
        ws |= {np.shape(row[j])[1] for row in rows
               if not isinstance(row[j], Affine) and np.ndim(row[j]) == 2}
        if len(ws) != 1:
            raise ModelError("inconsistent block column widths")
        widths.append(ws.pop())
    cells = []
    for i, row in enumerate(rows):
        out_row = []
        for j, e in enumerate(row):
            if isinstance(e, Affine):
                out_row.append(e)
            else:
                a = np.broadcast_to(np.asarray(e, dtype=complex),
                                    (heights[i], widths[j]))
                out_row.append(Affine(problem, a))
        cells.append(out_row)

    batch = max([c.const.shape[0] for row in cells for c in row]
                + [t.shape[0] for row in cells for c in row
                   for t in c.terms.values()])
    const = np.concatenate(
        [np.concatenate([np.broadcast_to(c.const, (batch,) + c.shape)
                         for c in row], axis=-1) for row in cells], axis=-2)
    vars_ = []
    for row in cells:
        for c in row:
            for v in c.terms:
                if v not in vars_:
                    vars_.append(v)
    terms = {}
    for v in vars_:
        vb = max(c.terms[v].shape[0] for row in cells for c in row
                 if v in c.terms)
        def piece(c, v=v, vb=vb):
            if v in c.terms:
                return np.broadcast_to(c.terms[v], (vb, v.size) + c.shape)
            return np.zeros((vb, v.size) + c.shape, dtype=complex)
        terms[v] = np.concatenate(
            [np.concatenate([piece(c) for c in row], axis=-1)
             for row in cells], axis=-2)
    return Affine(problem, const, terms)


@dataclass
class Constraint:
    name: str
    kind: str  # "lmi", "le"
    expr: Affine


@dataclass
class LmiProblem:
    """A batch of LMI problems sharing one structure.

    ``minimize objective`` subject to every LMI expression ``>= 0`` (PSD) and
    every scalar expression ``<= 0``. Hermitian PSD variables and
    nonnegative scalars get their cone constraints automatically.
    """

    batch: int = 1
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: Affine = None
    n: int = 0

    def _new(self, name, kind, dim):
        if kind not in KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        if any(v.name == name for v in self.variables):
            raise ModelError(f"duplicate variable {name!r}")
        v = Variable(name, kind, dim, self.n)
        self.variables.append(v)
        self.n += v.size
        basis = v.basis()[None]  # (1, size, dim, dim)
        expr = Affine(self, np.zeros((1, dim, dim), dtype=complex), {v: basis})
        if kind == "hermitian":
            self.constraints.append(Constraint(f"psd:{name}", "lmi", expr))
        elif kind == "nonneg":
            self.constraints.append(Constraint(f"nonneg:{name}", "le", -expr))
        return expr

    def hermitian(self, name, dim):
        """Hermitian PSD matrix variable."""
        return self._new(name, "hermitian", dim)

    def scalar(self, name, nonneg=False):
        return self._new(name, "nonneg" if nonneg else "free", 1)

    def variable(self, name):
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def constant(self, value):
        return Affine(self, np.asarray(value, dtype=complex).reshape(1, 1)
                      if np.ndim(value) == 0 else value)

    def minimize(self, expr):
        expr = expr if isinstance(expr, Affine) else self.constant(expr)
        if expr.shape != (1, 1):
            raise ModelError("objective must be scalar")
        self.objective = expr

    def add_lmi(self, expr, name=None):
        if expr.shape[0] != expr.shape[1]:
            raise ModelError("LMI expressions must be square")
        self.constraints.append(
            Constraint(name or f"lmi{len(self.constraints)}", "lmi", expr))

    def add_le(self, expr, name=None):
        """Scalar constraint ``expr <= 0``."""
        if expr.shape != (1, 1):
            raise ModelError("scalar constraints need a 1x1 expression")
        self.constraints.append(
            Constraint(name or f"le{len(self.constraints)}", "le", expr))

    def add_eq(self, expr, name=None):
        """Scalar equality, stored as a pair of inequalities."""
        name = name or f"eq{len(self.constraints)}"
        self.add_le(expr, name + ":le")
        self.add_le(-expr, name + ":ge")

    def constraint(self, name):
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def dump(self, index=0, x=None):
        """Plain-text listing of every constraint for batch member ``index``.

        Without ``x`` the constant term and each variable coefficient are
        printed; complex entries are written as ``a+bi``.
        """
        lines = [f"# LMI system, batch member {index}, {self.n} real variables"]
        for v in self.variables:
            lines.append(f"var {v.name} {v.kind} dim={v.dim} "
                         f"offset={v.offset} size={v.size}")
        if self.objective is not None:
            lines.append("objective: minimize")
            lines.extend(_dump_expr(self.objective, index))
        for c in self.constraints:
            op = ">= 0 (PSD)" if c.kind == "lmi" else "<= 0"
            lines.append(f"constraint {c.name} {op} size={c.expr.shape[0]}")
            if x is not None:
                lines.append(_fmt_matrix(c.expr.value(x)[0]))
            else:
                lines.extend(_dump_expr(c.expr, index))
        return "\n".join(lines) + "\n"


def _fmt_complex(z):
    return f"{z.real:.12g}{z.imag:+.12g}i"


def _fmt_matrix(m):
    return "\n".join("  " + " ".join(_fmt_complex(z) for z in row)
                     for row in m)


def _dump_expr(expr, index):
    pick = lambda a: a[min(index, a.shape[0] - 1)]
    out = ["  const:", _fmt_matrix(pick(expr.const))]
    for v, c in expr.terms.items():
        cb = pick(c)
        for a in range(v.size):
            if np.any(cb[a] != 0):
                out.append(f"  coeff {v.name}[{a}]:")
                out.append(_fmt_matrix(cb[a]))
    return out


# compilation to conic form ------------------------------------------------

@dataclass
class LpPart:
    G: np.ndarray  # (Bc, m, n)
    h: np.ndarray  # (Bc, m)
    names: list    # constraint name per row


@dataclass
class BlockPart:
    name: str
    cols: np.ndarray  # variable columns touching the block
    G: np.ndarray     # (Bc, len(cols), k, k)
    h: np.ndarray     # (Bc, k, k)
    embedded: bool    # complex block stored through its real embedding


@dataclass
class ConicData:
    """``minimize c'x + c0`` s.t. ``G x + s = h``, ``s`` in the product cone."""

    n: int
    batch: int
    c: np.ndarray
    c0: np.ndarray
    lp: LpPart
    blocks: list


def _is_real(*arrays, tol=1e-14):
    return all(np.max(np.abs(np.imag(a)), initial=0.0) <= tol for a in arrays)


def compile_problem(p):
    """Lower an :class:`LmiProblem` to real conic data."""
    n, batch = p.n, p.batch
    if p.objective is not None:
        c = np.zeros((p.objective.const.shape[0], n))
        for v, coef in p.objective.terms.items():
            if coef.shape[0] > c.shape[0]:
                c = np.broadcast_to(c, (coef.shape[0], n)).copy()
            c[:, v.offset:v.offset + v.size] += np.real(coef[:, :, 0, 0])
        c0 = np.real(p.objective.const[:, 0, 0])
    else:
        c, c0 = np.zeros((1, n)), np.zeros(1)

    lp_rows, lp_h, lp_names = [], [], []
    blocks = []
    for con in p.constraints:
        e = con.expr
        k = e.shape[0]
        if con.kind == "le" or k == 1:
            # slack = -expr (for "<= 0") or expr (for 1x1 LMIs) must be >= 0
            sign = -1.0 if con.kind == "le" else 1.0
            nb = max([e.const.shape[0]] + [t.shape[0] for t in e.terms.values()])
            row = np.zeros((nb, n))
            for v, coef in e.terms.items():
                row[:, v.offset:v.offset + v.size] += -sign * np.real(
                    coef[:, :, 0, 0])
            lp_rows.append(row)
            lp_h.append(np.broadcast_to(sign * np.real(e.const[:, 0, 0]), (nb,)))
            lp_names.append(con.name)
            continue
        cols = np.concatenate([np.arange(v.offset, v.offset + v.size)
                               for v in e.terms]) if e.terms else np.zeros(0, int)
        nb = max([e.const.shape[0]] + [t.shape[0] for t in e.terms.values()])
        G = np.zeros((nb, len(cols), k, k), dtype=complex)
        pos = 0
        for v, coef in e.terms.items():
            G[:, pos:pos + v.size] = -coef
            pos += v.size
        h = np.broadcast_to(e.const, (nb, k, k)) if e.const.shape[0] != nb \
            else e.const
        if _is_real(G, h):
            blocks.append(BlockPart(con.name, cols, np.real(G).copy(),
                                    np.real(h).copy(), False))
        else:
            blocks.append(BlockPart(con.name, cols, real_embed(G),
                                    real_embed(h), True))

    if lp_rows:
        nb = max(r.shape[0] for r in lp_rows)
        G = np.stack([np.broadcast_to(r, (nb, n)) for r in lp_rows], axis=1)
        h = np.stack([np.broadcast_to(r, (nb,)) for r in lp_h], axis=1)
    else:
        G, h = np.zeros((1, 0, n)), np.zeros((1, 0))
    for b in blocks:
        b.G = np.ascontiguousarray(0.5 * (b.G + np.swapaxes(b.G, -1, -2)))
        b.h = np.ascontiguousarray(0.5 * (b.h + np.swapaxes(b.h, -1, -2)))
    return ConicData(n, batch, c, c0, LpPart(G, h, lp_names), blocks)
