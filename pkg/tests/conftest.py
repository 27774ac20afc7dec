import math
from itertools import combinations_with_replacement

import numpy as np
import pytest

from pfaffian import expressions as ex
from pfaffian.forms import Box, form_from_expressions


def monomials_up_to(n_vars, degree):
    """All exponent multi-indices with total degree <= degree."""
    monos = []
    for total in range(degree + 1):
        for combo in combinations_with_replacement(range(n_vars), total):
            expo = [0] * n_vars
            for v in combo:
                expo[v] += 1
            monos.append(tuple(expo))
    return monos


def random_polynomial(rng, n_vars, degree=3, coeff_range=2.0):
    """Random dense polynomial with coefficients uniform in +-coeff_range."""
    acc = ex.constant(0.0)
    for expo in monomials_up_to(n_vars, degree):
        term = ex.constant(float(rng.uniform(-coeff_range, coeff_range)))
        for v, e in enumerate(expo):
            if e:
                term = ex.mul(term, ex.powc(ex.variable(v), float(e)))
        acc = ex.add(acc, term)
    return ex.simplify(acc)


def gradient_form(psi, n_vars, box, mu=None):
    """Form with coefficients mu * dpsi/dx_i (mu omitted: exact differential)."""
    coeffs = []
    for i in range(n_vars):
        d = ex.simplify(ex.differentiate(psi, i))
        if mu is not None:
            d = ex.mul(mu, d)
        coeffs.append(d)
    names = tuple(f"x{i + 1}" for i in range(n_vars))
    return form_from_expressions(names, coeffs, box)


def unit_box(n, half=1.0):
    return Box((-half,) * n, (half,) * n)


def random_points(rng, box, count):
    lows = np.asarray(box.lows)
    highs = np.asarray(box.highs)
    return lows + rng.random((count, len(lows))) * (highs - lows)


def entropy(p, cv=1.5, rg=1.0):
    return cv * math.log(p[0]) + rg * math.log(p[1])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
