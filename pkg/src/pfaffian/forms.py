"""Pfaffian forms on axis-aligned boxes.

A form is an ordered variable list, one coefficient expression per variable,
and a closed box domain.  Forms are immutable; every operation here is pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import expressions as ex
from .errors import (
    ArityError,
    EvalDomainError,
    FormError,
    OutOfDomainError,
    SingularFormError,
)
from .sampling import box_corners, box_samples

DEFAULT_SINGULAR_TOL = 1e-12
_NONSINGULAR_SAMPLES = 256


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box with nonempty interior."""

    lows: tuple
    highs: tuple

    def __post_init__(self):
        lows = tuple(float(v) for v in self.lows)
        highs = tuple(float(v) for v in self.highs)
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        if len(lows) != len(highs) or not lows:
            raise FormError("box bounds must be nonempty and of equal length")
        for lo, hi in zip(lows, highs):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise FormError(f"invalid interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.lows)

    def contains(self, p, tol: float = 0.0) -> bool:
        return all(
            lo - tol <= x <= hi + tol for x, lo, hi in zip(p, self.lows, self.highs)
        )

    def clamp(self, p):
        return tuple(
            min(max(x, lo), hi) for x, lo, hi in zip(p, self.lows, self.highs)
        )

    @property
    def center(self):
        return tuple((lo + hi) / 2.0 for lo, hi in zip(self.lows, self.highs))

    @property
    def edges(self):
        return tuple(hi - lo for lo, hi in zip(self.lows, self.highs))

    def samples(self, count: int, margin: float = 0.0) -> np.ndarray:
        return box_samples(self.lows, self.highs, count, margin)

    def corners(self) -> np.ndarray:
        return box_corners(self.lows, self.highs)


@dataclass(frozen=True)
class PfaffianForm:
    """n coefficient expressions F_i over n named variables on a box."""

    var_names: tuple
    coefficients: tuple
    domain: Box

    @property
    def n(self) -> int:
        return len(self.var_names)

    @cached_property
    def coefficient_fns(self):
        """Raw compiled coefficient callables (see expressions.compile_scalar)."""
        return tuple(ex.compile_scalar(c, self.n) for c in self.coefficients)

    @cached_property
    def coefficient_tuple_fn(self):
        """One compiled callable returning the whole coefficient vector."""
        return ex.compile_tuple(self.coefficients, self.n)

    @cached_property
    def derivative_matrix(self):
        """Symbolic dF[i][j] = dF_i/dx_j."""
        return tuple(
            tuple(ex.simplify(ex.differentiate(c, j)) for j in range(self.n))
            for c in self.coefficients
        )

    @cached_property
    def derivative_fns(self):
        return tuple(
            tuple(ex.compile_scalar(d, self.n) for d in row)
            for row in self.derivative_matrix
        )


def _check_nonsingular(form: PfaffianForm, tol: float):
    pts = [form.domain.center]
    pts.extend(map(tuple, form.domain.samples(_NONSINGULAR_SAMPLES)))
    for p in pts:
        try:
            values = coefficient_vector(form, p)
        except EvalDomainError:
            continue  # pole or similar: counts as a skipped sample
        if max(abs(v) for v in values) > tol:
            return
    raise SingularFormError(
        "coefficient vector numerically zero at all sampled points"
    )


def make_form(var_names, coefficient_texts, box: Box, singular_tol=DEFAULT_SINGULAR_TOL):
    """Parse coefficient texts and construct a non-singular form on ``box``."""
    var_names = tuple(var_names)
    if len(var_names) != len(set(var_names)):
        raise FormError("duplicate variable names")
    if len(coefficient_texts) != len(var_names):
        raise ArityError(
            f"{len(coefficient_texts)} coefficients for {len(var_names)} variables"
        )
    if box.dim != len(var_names):
        raise ArityError(f"box dimension {box.dim} != {len(var_names)} variables")
    coeffs = tuple(
        ex.simplify(ex.parse_expression(text, var_names)) for text in coefficient_texts
    )
    form = PfaffianForm(var_names, coeffs, box)
    _check_nonsingular(form, singular_tol)
    return form


def form_from_expressions(var_names, coefficients, box: Box,
                          singular_tol=DEFAULT_SINGULAR_TOL) -> PfaffianForm:
    """Construct a form from already-built expression trees."""
    var_names = tuple(var_names)
    if len(coefficients) != len(var_names) or box.dim != len(var_names):
        raise ArityError("variable, coefficient and box arities must agree")
    form = PfaffianForm(var_names, tuple(coefficients), box)
    _check_nonsingular(form, singular_tol)
    return form


def coefficient_vector(form: PfaffianForm, p):
    """(F_1(p), ..., F_n(p)); raises OutOfDomainError when p is outside the box."""
    if not form.domain.contains(p, tol=1e-12):
        raise OutOfDomainError(f"point {tuple(p)} outside domain")
    return tuple(ex.evaluate(c, p) for c in form.coefficients)


def is_singular_at(form: PfaffianForm, p, tol=DEFAULT_SINGULAR_TOL) -> bool:
    values = coefficient_vector(form, p)
    return max(abs(v) for v in values) <= tol


# ---------------------------------------------------------------------------
# change of variables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Substitution:
    """Old coordinates written as expressions of new coordinates.

    ``exprs[i]`` gives x_i in terms of the new variables.  The Jacobian
    dx_i/dxbar_j must be nonsingular at ``base_point`` (checked by
    :func:`make_substitution`).
    """

    new_var_names: tuple
    exprs: tuple
    base_point: tuple
    new_domain: Box

    @property
    def n(self) -> int:
        return len(self.new_var_names)

    def apply(self, p_new):
        """Map a point in new coordinates to old coordinates."""
        return tuple(ex.evaluate(e, p_new) for e in self.exprs)

    def jacobian_at(self, p_new) -> np.ndarray:
        n = self.n
        jac = np.empty((n, n))
        for i, e in enumerate(self.exprs):
            for j in range(n):
                jac[i, j] = ex.evaluate(ex.differentiate(e, j), p_new)
        return jac


def make_substitution(new_var_names, expr_texts, base_point, new_domain: Box,
                      cond_limit=1e12) -> Substitution:
    new_var_names = tuple(new_var_names)
    n = len(new_var_names)
    if len(expr_texts) != n or new_domain.dim != n or len(base_point) != n:
        raise ArityError("substitution arities must agree")
    exprs = tuple(
        e if isinstance(e, ex.Expression) else ex.parse_expression(e, new_var_names)
        for e in expr_texts
    )
    sub = Substitution(new_var_names, exprs, tuple(float(v) for v in base_point),
                       new_domain)
    jac = sub.jacobian_at(sub.base_point)
    if not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > cond_limit:
        raise FormError("substitution Jacobian is singular at the base point")
    return sub


def pullback(form: PfaffianForm, sub: Substitution,
             singular_tol=DEFAULT_SINGULAR_TOL) -> PfaffianForm:
    """Coordinate change of the form: Fbar_j = sum_i (dx_i/dxbar_j) * (F_i o s).

    Built symbolically; line integrals along corresponding curves agree.
    """
    if sub.n != form.n:
        raise ArityError("substitution arity does not match the form")
    composed = [ex.substitute(c, sub.exprs) for c in form.coefficients]
    new_coeffs = []
    for j in range(form.n):
        acc = ex.constant(0.0)
        for i in range(form.n):
            acc = ex.add(acc, ex.mul(ex.differentiate(sub.exprs[i], j), composed[i]))
        new_coeffs.append(ex.simplify(acc))
    return form_from_expressions(sub.new_var_names, new_coeffs, sub.new_domain,
                                 singular_tol=singular_tol)


def random_linear_substitution(form: PfaffianForm, seed: int, strength=0.3,
                               shrink=0.35) -> Substitution:
    """Well-conditioned random affine change of variables into the box.

    Old coordinates: x_i = c_i + sum_j A_ij u_j with A = I plus a scaled
    random perturbation; the new box is sized so its image stays inside the
    form's domain.
    """
    rng = np.random.default_rng(seed)
    n = form.n
    g = rng.standard_normal((n, n))
    a = np.eye(n) + strength * g / np.linalg.norm(g, 2)
    center = form.domain.center
    halfwidths = [0.5 * e for e in form.domain.edges]
    row_sums = np.abs(a).sum(axis=1)
    eta = shrink * min(h / r for h, r in zip(halfwidths, row_sums))
    new_names = tuple(f"u{j + 1}" for j in range(n))
    exprs = []
    for i in range(n):
        acc = ex.constant(center[i])
        for j in range(n):
            acc = ex.add(acc, ex.mul(ex.constant(a[i, j]), ex.variable(j)))
        exprs.append(ex.simplify(acc))
    new_box = Box((-eta,) * n, (eta,) * n)
    return make_substitution(new_names, exprs, (0.0,) * n, new_box)


def mild_nonlinear_substitution(form: PfaffianForm, shift: int = 1,
                                amplitude=0.1, shrink=0.3) -> Substitution:
    """Identity plus a small quadratic coupling: x_i = c_i + u_i + a*u_{i+k}^2."""
    n = form.n
    center = form.domain.center
    halfwidths = [0.5 * e for e in form.domain.edges]
    eta = shrink * min(halfwidths)
    new_names = tuple(f"u{j + 1}" for j in range(n))
    exprs = []
    for i in range(n):
        other = (i + shift) % n
        quad = ex.mul(ex.constant(amplitude), ex.powc(ex.variable(other), 2.0))
        exprs.append(ex.add(ex.constant(center[i]), ex.add(ex.variable(i), quad)))
    new_box = Box((-eta,) * n, (eta,) * n)
    return make_substitution(new_names, exprs, (0.0,) * n, new_box)


# ---------------------------------------------------------------------------
# form definition files
# ---------------------------------------------------------------------------

_INTERVAL_RE = re.compile(r"\[\s*([^,\]]+)\s*,\s*([^\]]+?)\s*\]")


def parse_form_file(text: str, singular_tol=DEFAULT_SINGULAR_TOL) -> PfaffianForm:
    """Parse the plain-text form definition format.

    Line 1: ``vars: x, y, z``; then one ``F[i] = <expression>`` per variable;
    finally ``domain: [lo,hi] x [lo,hi] x ...``.  '#' starts a comment.
    """
    var_names = None
    coeff_texts = {}
    box = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("vars:"):
            var_names = tuple(v.strip() for v in line[len("vars:"):].split(","))
            if any(not v for v in var_names):
                raise FormError(f"line {lineno}: empty variable name")
        elif line.startswith("domain:"):
            intervals = _INTERVAL_RE.findall(line[len("domain:"):])
            if not intervals:
                raise FormError(f"line {lineno}: no intervals in domain")
            try:
                lows = tuple(float(a) for a, _ in intervals)
                highs = tuple(float(b) for _, b in intervals)
            except ValueError as exc:
                raise FormError(f"line {lineno}: bad interval bound: {exc}") from exc
            box = Box(lows, highs)
        elif line.startswith("F["):
            m = re.match(r"F\[(\d+)\]\s*=\s*(.+)$", line)
            if m is None:
                raise FormError(f"line {lineno}: malformed coefficient line")
            idx = int(m.group(1))
            if idx < 1:
                raise FormError(f"line {lineno}: coefficient indices start at 1")
            coeff_texts[idx] = m.group(2)
        else:
            raise FormError(f"line {lineno}: unrecognized line {line!r}")
    if var_names is None:
        raise FormError("missing 'vars:' line")
    if box is None:
        raise FormError("missing 'domain:' line")
    n = len(var_names)
    if sorted(coeff_texts) != list(range(1, n + 1)):
        raise FormError(f"need coefficients F[1]..F[{n}], got {sorted(coeff_texts)}")
    texts = [coeff_texts[i] for i in range(1, n + 1)]
    return make_form(var_names, texts, box, singular_tol=singular_tol)


def load_form(path, singular_tol=DEFAULT_SINGULAR_TOL) -> PfaffianForm:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_form_file(fh.read(), singular_tol=singular_tol)


def format_form_file(form: PfaffianForm) -> str:
    lines = ["vars: " + ", ".join(form.var_names)]
    for i, coeff in enumerate(form.coefficients, start=1):
        lines.append(f"F[{i}] = {ex.to_string(coeff, form.var_names)}")
    domain = " x ".join(
        f"[{lo!r},{hi!r}]" for lo, hi in zip(form.domain.lows, form.domain.highs)
    )
    lines.append("domain: " + domain)
    return "\n".join(lines) + "\n"
