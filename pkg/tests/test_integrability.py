import itertools
import json

import numpy as np
import pytest

from conftest import gradient_form, random_polynomial, unit_box
from pfaffian import expressions as ex
from pfaffian.forms import (
    Box,
    make_form,
    make_substitution,
    mild_nonlinear_substitution,
    random_linear_substitution,
)
from pfaffian.integrability import (
    CLASS_EXACT,
    CLASS_LOCALLY_INTEGRABLE,
    CLASS_NON_INTEGRABLE,
    SamplerConfig,
    clairaut_component,
    classify,
    curl_triple_product,
    exactness_defect,
    invariance_check,
)

BOX3 = Box((-1, -1, -1), (1, 1, 1))


@pytest.fixture(scope="module")
def contact():
    return make_form(["x", "y", "z"], ["-y", "0", "1"], BOX3)


def test_defect_zero_for_exact(rng):
    f = make_form(["x", "y"], ["y", "x"], Box((-2, -2), (2, 2)))
    for p in rng.uniform(-2, 2, size=(10, 2)):
        assert exactness_defect(f, 0, 1, p) == pytest.approx(0.0, abs=1e-14)


def test_defect_contact_value(contact, rng):
    for p in rng.uniform(-1, 1, size=(10, 3)):
        assert exactness_defect(contact, 0, 1, p) == pytest.approx(1.0)


def test_defect_antisymmetry(contact, rng):
    for p in rng.uniform(-1, 1, size=(10, 3)):
        assert exactness_defect(contact, 0, 1, p) == pytest.approx(
            -exactness_defect(contact, 1, 0, p)
        )


def test_tensor_contact_constant_one(contact, rng):
    for p in rng.uniform(-1, 1, size=(20, 3)):
        assert clairaut_component(contact, 0, 1, 2, p) == pytest.approx(
            1.0, abs=1e-12
        )


def test_tensor_zero_for_exact(rng):
    psi = ex.parse_expression("x1+x2+x3", ["x1", "x2", "x3"])
    f = gradient_form(psi, 3, BOX3)
    for p in rng.uniform(-1, 1, size=(10, 3)):
        assert clairaut_component(f, 0, 1, 2, p) == pytest.approx(0.0, abs=1e-12)


def test_tensor_zero_for_scaled_exact(rng):
    f = make_form(
        ["x", "y", "z"],
        ["exp(z)*y", "exp(z)*x", "exp(z)"],
        Box((-0.5,) * 3, (0.5,) * 3),
    )
    for p in rng.uniform(-0.5, 0.5, size=(20, 3)):
        assert clairaut_component(f, 0, 1, 2, p) == pytest.approx(0.0, abs=1e-12)


def test_tensor_total_antisymmetry(rng):
    for _ in range(10):
        n = int(rng.integers(3, 6))
        psi = random_polynomial(rng, n, degree=3)
        # perturb one coefficient to break exactness
        coeffs = [ex.simplify(ex.differentiate(psi, i)) for i in range(n)]
        coeffs[0] = ex.add(coeffs[0], ex.mul(ex.variable(1), ex.variable(1)))
        from pfaffian.forms import form_from_expressions

        f = form_from_expressions(
            tuple(f"x{i}" for i in range(n)), coeffs, unit_box(n)
        )
        p = rng.uniform(-1, 1, size=n)
        i, j, k = rng.choice(n, size=3, replace=False)
        base = clairaut_component(f, int(i), int(j), int(k), p)
        for perm, sign in [
            ((i, k, j), -1),
            ((j, i, k), -1),
            ((k, j, i), -1),
            ((j, k, i), 1),
            ((k, i, j), 1),
        ]:
            value = clairaut_component(f, int(perm[0]), int(perm[1]),
                                       int(perm[2]), p)
            assert value == pytest.approx(sign * base, abs=1e-12)


def test_curl_matches_tensor(contact, rng):
    for p in rng.uniform(-1, 1, size=(50, 3)):
        assert abs(
            curl_triple_product(contact, p) - clairaut_component(contact, 0, 1, 2, p)
        ) <= 1e-12


def test_curl_matches_tensor_across_catalog(rng):
    # the two independent routes agree at 1000 points over the 3-variable entries
    from pfaffian.catalog import catalog

    forms = [e.form for e in catalog() if e.form.n == 3]
    per_form = 1000 // len(forms) + 1
    for f in forms:
        lows = np.asarray(f.domain.lows)
        highs = np.asarray(f.domain.highs)
        for p in lows + rng.random((per_form, 3)) * (highs - lows):
            a = curl_triple_product(f, p)
            b = clairaut_component(f, 0, 1, 2, p)
            assert abs(a - b) <= 1e-12


def test_curl_requires_three_variables():
    f = make_form(["x", "y"], ["y", "x"], Box((-1, -1), (1, 1)))
    with pytest.raises(Exception):
        curl_triple_product(f, (0.5, 0.5))


def test_curl_zero_for_exact(rng):
    f = make_form(["x", "y", "z"], ["y", "x", "0"], BOX3)
    for p in rng.uniform(-1, 1, size=(10, 3)):
        assert curl_triple_product(f, p) == pytest.approx(0.0, abs=1e-13)


# --- classification -----------------------------------------------------------


def test_classify_exact_two_var():
    f = make_form(["x", "y"], ["y", "x"], Box((-1, -1), (1, 1)))
    v = classify(f)
    assert v.classification == CLASS_EXACT
    assert v.witness_value <= v.tolerance


def test_classify_two_var_never_non_integrable():
    f = make_form(["x", "y"], ["0", "x"], Box((0.5, -1), (1.5, 1)))
    v = classify(f)
    assert v.classification == CLASS_LOCALLY_INTEGRABLE
    assert v.witness_value <= v.tolerance


def test_classify_contact(contact):
    v = classify(contact)
    assert v.classification == CLASS_NON_INTEGRABLE
    assert v.witness_value == pytest.approx(1.0, rel=1e-9)
    assert v.witness_value > v.tolerance
    assert v.witness_triple == (0, 1, 2)


def test_classify_one_variable():
    f = make_form(["x"], ["1+x^2"], Box((-1,), (1,)))
    assert classify(f).classification == CLASS_EXACT


def test_classify_exact_many_vars(rng):
    psi = random_polynomial(rng, 4, degree=3)
    f = gradient_form(psi, 4, unit_box(4))
    v = classify(f)
    assert v.classification == CLASS_EXACT


def test_report_keys_exact_shape(contact):
    report = classify(contact).as_report()
    assert set(report) == {
        "class", "tolerance", "samples_used", "witness", "per_triple_max"
    }
    assert set(report["witness"]) == {"point", "triple", "value"}
    json.dumps(report)  # must be plain JSON data


def test_singular_samples_excluded_from_witness():
    # y dx + x dy is singular only at the origin; classification is unaffected
    f = make_form(["x", "y"], ["y", "x"], Box((-1, -1), (1, 1)))
    v = classify(f)
    assert v.classification == CLASS_EXACT
    assert v.samples_used > 0


# --- necessity property batteries (small here, full size in acceptance) --------


def test_exact_forms_annul_tensor(rng):
    for _ in range(20):
        n = int(rng.integers(3, 6))
        psi = random_polynomial(rng, n, degree=3)
        f = gradient_form(psi, n, unit_box(n))
        pts = rng.uniform(-1, 1, size=(16, n))
        worst = 0.0
        for p in pts:
            fvals = [fn(*p) for fn in f.coefficient_fns]
            scale = 1.0 / max(1.0, max(abs(v) for v in fvals)) ** 2
            for i, j, k in itertools.combinations(range(n), 3):
                worst = max(worst, abs(clairaut_component(f, i, j, k, p)) * scale)
        assert worst <= 1e-9


def test_scaled_exact_forms_annul_tensor(rng):
    for _ in range(10):
        n = int(rng.integers(3, 6))
        psi = random_polynomial(rng, n, degree=3)
        mu = ex.func("exp", random_polynomial(rng, n, degree=2, coeff_range=1.0))
        f = gradient_form(psi, n, unit_box(n), mu=mu)
        pts = rng.uniform(-1, 1, size=(16, n))
        worst = 0.0
        for p in pts:
            fvals = [fn(*p) for fn in f.coefficient_fns]
            scale = 1.0 / max(1.0, max(abs(v) for v in fvals)) ** 2
            for i, j, k in itertools.combinations(range(n), 3):
                worst = max(worst, abs(clairaut_component(f, i, j, k, p)) * scale)
        assert worst <= 1e-9


# --- invariance under change of variables --------------------------------------


def test_invariance_exact_form_linear():
    psi = ex.parse_expression("x+y+z", ["x", "y", "z"])
    f = gradient_form(psi, 3, BOX3)
    s = random_linear_substitution(f, seed=7)
    report = invariance_check(f, s)
    assert report.nullity_preserved
    assert report.max_original <= 1e-9
    assert report.max_pullback <= 1e-9


def test_invariance_contact_linear_stretch(contact):
    s = make_substitution(
        ["u", "v", "w"], ["2*u", "v", "w"], (0, 0, 0),
        Box((-0.45, -0.9, -0.9), (0.45, 0.9, 0.9)),
    )
    report = invariance_check(contact, s)
    assert report.nullity_preserved
    assert report.max_original > report.tolerance
    assert report.max_pullback > report.tolerance


def test_invariance_integrable_nonlinear():
    f = make_form(
        ["x", "y", "z"],
        ["exp(z)*y", "exp(z)*x", "exp(z)"],
        Box((-0.5,) * 3, (0.5,) * 3),
    )
    s = mild_nonlinear_substitution(f)
    report = invariance_check(f, s)
    assert report.nullity_preserved
    assert report.max_pullback <= report.tolerance


def test_verdict_invariants_hold(contact):
    f2 = make_form(["x", "y"], ["y", "x"], Box((-1, -1), (1, 1)))
    for form in (contact, f2):
        v = classify(form)
        if v.classification == CLASS_NON_INTEGRABLE:
            assert v.witness_value > v.tolerance
        if v.classification in (CLASS_EXACT, CLASS_LOCALLY_INTEGRABLE):
            assert v.witness_value <= v.tolerance


def test_sampler_config_is_deterministic(contact):
    cfg = SamplerConfig(points=32)
    a = cfg.sample_points(contact)
    b = cfg.sample_points(contact)
    assert a == b
