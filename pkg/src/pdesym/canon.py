"""Canonical forms for PDE expression trees.

``canonicalize`` reduces a tree to a unique normal form so that
mathematically equivalent inputs serialize to identical token sequences:

1. rewrite ``a - b`` as ``a + (-1)*b`` and ``-a`` as ``(-1)*a``;
2. flatten nested sums/products into n-ary lists;
3. fold constant subexpressions (exact for dyadic rationals, otherwise
   round-to-nearest floating arithmetic);
4. collect like terms by the multiset of their non-constant factors,
   summing coefficients and dropping zero terms;
5. normalize each term to ``coefficient * sorted factors`` (identical
   factors are merged into integer powers);
6. order terms and factors by a total key;
7. re-binarize left to right.

Derivatives of the field are normalized as well: same-variable nests merge
(``(u_x)_x`` becomes ``u_xx``), derivatives distribute over sums, and
constant multiples are pulled out. Derivatives of composite expressions
such as ``(u^2)_x`` are kept intact; no chain-rule expansion, distribution
over products, or trigonometric rewriting is performed.
"""
from __future__ import annotations

import math

from .errors import DivisionByZero
from .expr import (
    Binary,
    Const,
    Deriv,
    Equation,
    Expr,
    Field,
    Int,
    Placeholder,
    Unary,
    Var,
)

_FN_RANK = {"sin": 0, "cos": 1, "neg": 2}
_OP_RANK = {"pow": 0, "mul": 1, "add": 2, "sub": 3, "div": 4}

# Class ranks put the coefficient-like placeholder first, then the field,
# derivatives, applied functions, powers and variables, constants last.
_RANK_PLACEHOLDER = 0
_RANK_FIELD = 1
_RANK_DERIV = 2
_RANK_UNARY = 3
_RANK_BINARY = 4
_RANK_VAR = 5
_RANK_INT = 8
_RANK_CONST = 9


def canonical_key(e: Expr):
    """Total-order key over subtrees; equal keys imply identical trees."""
    if isinstance(e, Placeholder):
        return (_RANK_PLACEHOLDER,)
    if isinstance(e, Field):
        return (_RANK_FIELD,)
    if isinstance(e, Deriv):
        return (_RANK_DERIV, e.var, e.order, canonical_key(e.child))
    if isinstance(e, Unary):
        return (_RANK_UNARY, _FN_RANK[e.fn], canonical_key(e.child))
    if isinstance(e, Binary):
        return (
            _RANK_BINARY,
            _OP_RANK[e.op],
            canonical_key(e.left),
            canonical_key(e.right),
        )
    if isinstance(e, Var):
        return (_RANK_VAR, e.name)
    if isinstance(e, Int):
        return (_RANK_INT, e.value)
    if isinstance(e, Const):
        return (_RANK_CONST, e.value)
    raise TypeError(f"cannot key {type(e).__name__}")


def sum_terms(e: Expr) -> list[Expr]:
    """Flatten a left-nested chain of additions into its operand list."""
    if isinstance(e, Binary) and e.op == "add":
        return sum_terms(e.left) + [e.right]
    return [e]


def product_factors(e: Expr) -> list[Expr]:
    """Flatten a left-nested chain of multiplications into its operand list."""
    if isinstance(e, Binary) and e.op == "mul":
        return product_factors(e.left) + [e.right]
    return [e]


def _term_parts(e: Expr) -> tuple[float, list[Expr]]:
    """Split a canonical non-sum expression into (coefficient, factors)."""
    if isinstance(e, Const):
        return e.value, []
    chain = product_factors(e)
    if isinstance(chain[0], Const):
        return chain[0].value, chain[1:]
    return 1.0, chain


def _split_operand(e: Expr) -> tuple[float, list[Expr]]:
    """Like ``_term_parts`` but keeps multi-term sums as opaque factors."""
    if isinstance(e, Binary) and e.op == "add":
        return 1.0, [e]
    return _term_parts(e)


def _merge_factors(factors: list[Expr]) -> list[Expr]:
    """Merge repeated bases into integer powers and sort by key."""
    merged: dict[tuple, list] = {}
    for f in factors:
        if isinstance(f, Binary) and f.op == "pow" and isinstance(f.right, Int):
            base, n = f.left, f.right.value
        else:
            base, n = f, 1
        k = canonical_key(base)
        if k in merged:
            merged[k][1] += n
        else:
            merged[k] = [base, n]
    out = []
    for base, n in merged.values():
        if n == 0:
            continue
        out.append(base if n == 1 else Binary("pow", base, Int(n)))
    out.sort(key=canonical_key)
    return out


def _build_term(coeff: float, factors: list[Expr]) -> Expr:
    if not factors:
        return Const(coeff)
    node = factors[0] if coeff == 1.0 else Const(coeff)
    rest = factors if coeff != 1.0 else factors[1:]
    for f in rest:
        node = Binary("mul", node, f)
    return node


def _term_sort_key(item):
    coeff, factors = item
    if not factors:
        return (1, (), coeff)
    return (0, tuple(canonical_key(f) for f in factors), coeff)


def _build_sum(terms: list[tuple[float, list[Expr]]]) -> Expr:
    groups: dict[tuple, list] = {}
    for coeff, factors in terms:
        k = tuple(canonical_key(f) for f in factors)
        if k in groups:
            groups[k][0] += coeff
        else:
            groups[k] = [coeff, factors]
    kept = [(c, fs) for c, fs in groups.values() if c != 0.0]
    if not kept:
        return Const(0.0)
    kept.sort(key=_term_sort_key)
    node = _build_term(*kept[0])
    for c, fs in kept[1:]:
        node = Binary("add", node, _build_term(c, fs))
    return node


def canonicalize(e):
    """Reduce an expression (or equation) to its canonical form.

    Idempotent: re-canonicalizing a canonical tree is the identity.
    Raises :class:`DivisionByZero` when constant folding divides by zero.
    """
    if isinstance(e, Equation):
        return Equation(_canon(e.residual))
    return _canon(e)


def _canon(e: Expr) -> Expr:
    if isinstance(e, (Const, Field, Var, Placeholder)):
        return e
    if isinstance(e, Int):
        return Const(float(e.value))
    if isinstance(e, Unary):
        if e.fn == "neg":
            return _canon(Binary("mul", Const(-1.0), e.child))
        child = _canon(e.child)
        if isinstance(child, Const):
            fn = math.sin if e.fn == "sin" else math.cos
            return Const(fn(child.value))
        return Unary(e.fn, child)
    if isinstance(e, Deriv):
        return _canon_deriv(e)
    if isinstance(e, Binary):
        if e.op == "sub":
            return _canon(
                Binary("add", e.left, Binary("mul", Const(-1.0), e.right))
            )
        if e.op == "div":
            return _canon_div(e.left, e.right)
        if e.op == "pow":
            return _canon_pow(e.left, e.right)
        if e.op == "add":
            terms = []
            for side in (e.left, e.right):
                canon_side = _canon(side)
                for part in sum_terms(canon_side):
                    coeff, factors = _term_parts(part)
                    terms.append((coeff, _merge_factors(factors)))
            return _build_sum(terms)
        # mul
        lc, lf = _split_operand(_canon(e.left))
        rc, rf = _split_operand(_canon(e.right))
        coeff = lc * rc
        if coeff == 0.0:
            return Const(0.0)
        factors = _merge_factors(lf + rf)
        if not factors:
            return Const(coeff)
        return _build_sum([(coeff, factors)])
    raise TypeError(f"cannot canonicalize {type(e).__name__}")


def _canon_div(left: Expr, right: Expr) -> Expr:
    denom = _canon(right)
    if isinstance(denom, Const):
        if denom.value == 0.0:
            raise DivisionByZero("division by constant zero")
        return _canon(Binary("mul", left, Const(1.0 / denom.value)))
    return _canon(Binary("mul", left, Binary("pow", denom, Int(-1))))


def _canon_pow(base: Expr, exponent: Expr) -> Expr:
    exp = _canon(exponent)
    if isinstance(exp, Const) and float(exp.value).is_integer() and abs(exp.value) < 2**31:
        exp = Int(int(exp.value))
    b = _canon(base)
    if isinstance(exp, Int):
        n = exp.value
        if n == 0:
            return Const(1.0)
        if n == 1:
            return b
        if isinstance(b, Const):
            if b.value == 0.0 and n < 0:
                raise DivisionByZero("zero raised to a negative power")
            return Const(float(b.value**n))
        if isinstance(b, Binary) and b.op == "pow" and isinstance(b.right, Int):
            return _canon_pow(b.left, Int(b.right.value * n))
        return Binary("pow", b, Int(n))
    if isinstance(b, Const) and isinstance(exp, Const):
        return Const(float(b.value**exp.value))
    return Binary("pow", b, exp)


def _canon_deriv(e: Deriv) -> Expr:
    child = _canon(e.child)
    if isinstance(child, (Const, Placeholder)):
        return Const(0.0)
    parts = sum_terms(child)
    if len(parts) > 1:
        node = Deriv(parts[0], e.var, e.order)
        for p in parts[1:]:
            node = Binary("add", node, Deriv(p, e.var, e.order))
        return _canon(node)
    coeff, factors = _term_parts(child)
    if coeff == 0.0:
        return Const(0.0)
    if coeff != 1.0:
        inner = Deriv(_build_term(1.0, factors), e.var, e.order)
        return _canon(Binary("mul", Const(coeff), inner))
    if isinstance(child, Var):
        if child.name == e.var and e.order == 1:
            return Const(1.0)
        return Const(0.0)
    if isinstance(child, Deriv):
        return _normalize_deriv_nest(child, e.var, e.order)
    return Deriv(child, e.var, e.order)


def _normalize_deriv_nest(inner: Deriv, var: str, order: int) -> Expr:
    # Collect the full chain of derivative applications; mixed partials
    # commute, so rebuild in a fixed nesting order ("t" innermost).
    orders = {var: order}
    node: Expr = inner
    while isinstance(node, Deriv):
        orders[node.var] = orders.get(node.var, 0) + node.order
        node = node.child
    for v in ("t", "x"):
        if orders.get(v):
            node = Deriv(node, v, orders[v])
    return node


def equivalent(a, b) -> bool:
    """True iff the two expressions (or equations) share a canonical form."""
    ca = canonicalize(a.residual if isinstance(a, Equation) else a)
    cb = canonicalize(b.residual if isinstance(b, Equation) else b)
    return ca == cb
