import numpy as np
import pytest

from pfaffian.errors import (
    ArityError,
    FormError,
    OutOfDomainError,
    SingularFormError,
)
from pfaffian.forms import (
    Box,
    coefficient_vector,
    format_form_file,
    is_singular_at,
    load_form,
    make_form,
    make_substitution,
    mild_nonlinear_substitution,
    parse_form_file,
    pullback,
    random_linear_substitution,
)

BOX2 = Box((-1, -1), (1, 1))
BOX3 = Box((-1, -1, -1), (1, 1, 1))


def test_make_form_basic():
    f = make_form(["x", "y"], ["y", "x"], BOX2)
    assert f.n == 2
    assert f.var_names == ("x", "y")


def test_make_form_contact_witness():
    f = make_form(["x", "y", "z"], ["-y", "0", "1"], BOX3)
    assert coefficient_vector(f, (0, 0, 0)) == (0.0, 0.0, 1.0)


def test_make_form_identically_null_rejected():
    with pytest.raises(SingularFormError):
        make_form(["x"], ["0"], Box((-1,), (1,)))


def test_make_form_arity_mismatch():
    with pytest.raises(ArityError):
        make_form(["x", "y"], ["y"], BOX2)


def test_coefficient_vector_examples():
    f = make_form(["x", "y"], ["y", "x"], Box((-5, -5), (5, 5)))
    assert coefficient_vector(f, (3, 4)) == (4.0, 3.0)
    g = make_form(["x", "y", "z"], ["-y", "0", "1"], Box((-3, -3, -3), (3, 3, 3)))
    assert coefficient_vector(g, (0, 2, 0)) == (-2.0, 0.0, 1.0)


def test_coefficient_vector_out_of_domain():
    f = make_form(["x", "y"], ["y", "x"], BOX2)
    with pytest.raises(OutOfDomainError):
        coefficient_vector(f, (2.0, 0.0))


def test_is_singular_at():
    f = make_form(["x", "y"], ["y", "x"], BOX2)
    assert is_singular_at(f, (0.0, 0.0), 1e-12)
    assert not is_singular_at(f, (1.0, 0.0), 1e-12)
    g = make_form(["x", "y", "z"], ["-y", "0", "1"], BOX3)
    for p in [(0, 0, 0), (0.5, -0.5, 0.9)]:
        assert not is_singular_at(g, p, 1e-12)


def test_pole_coefficients_survive_construction():
    # 1/x has a pole inside the box; those samples are skipped, not fatal
    f = make_form(["x", "y"], ["1/x", "1"], Box((-1, -1), (1, 1)))
    assert coefficient_vector(f, (0.5, 0.0)) == (2.0, 1.0)


# --- pullback -----------------------------------------------------------------


def test_pullback_hand_chain_rule():
    # d(x+y) under x=u+v, y=u-v becomes 2du + 0dv
    f = make_form(["x", "y"], ["1", "1"], BOX2)
    s = make_substitution(
        ["u", "v"], ["u+v", "u-v"], (0, 0), Box((-0.4, -0.4), (0.4, 0.4))
    )
    g = pullback(f, s)
    assert coefficient_vector(g, (0.1, -0.2)) == (2.0, 0.0)


def test_pullback_identity_substitution(rng):
    f = make_form(["x", "y", "z"], ["-y", "0", "1"], BOX3)
    s = make_substitution(
        ["u", "v", "w"], ["u", "v", "w"], (0, 0, 0),
        Box((-0.9, -0.9, -0.9), (0.9, 0.9, 0.9)),
    )
    g = pullback(f, s)
    for p in rng.uniform(-0.9, 0.9, size=(20, 3)):
        assert coefficient_vector(g, p) == pytest.approx(
            coefficient_vector(f, p), abs=1e-14
        )


def test_pullback_linear_stretch():
    # x = 2u scales the first coefficient by 2: F1bar = -2y
    f = make_form(["x", "y", "z"], ["-y", "0", "1"], BOX3)
    s = make_substitution(
        ["u", "v", "w"], ["2*u", "v", "w"], (0, 0, 0),
        Box((-0.45, -0.9, -0.9), (0.45, 0.9, 0.9)),
    )
    g = pullback(f, s)
    p = (0.2, 0.3, -0.4)
    assert coefficient_vector(g, p) == pytest.approx((-0.6, 0.0, 1.0))


def test_pullback_respects_jacobian_transpose(rng):
    # coefficient vector of the pullback equals J^T F at mapped points
    for trial in range(50):
        n = int(rng.integers(2, 5))
        box = Box((-1,) * n, (1,) * n)
        coeffs = []
        names = tuple(f"x{i}" for i in range(n))
        for i in range(n):
            c = rng.uniform(-2, 2, size=n + 1)
            text = " + ".join(
                [f"{c[0]:.6f}"] + [f"{c[j + 1]:.6f}*x{j}" for j in range(n)]
            )
            coeffs.append(text)
        f = make_form(names, coeffs, box)
        s = random_linear_substitution(f, seed=trial)
        g = pullback(f, s)
        p_new = tuple(rng.uniform(lo, hi) for lo, hi in
                      zip(s.new_domain.lows, s.new_domain.highs))
        jac = s.jacobian_at(p_new)
        mapped = s.apply(p_new)
        expected = jac.T @ np.asarray(coefficient_vector(f, mapped))
        got = np.asarray(coefficient_vector(g, p_new))
        assert np.allclose(got, expected, atol=1e-10)


def test_double_pullback_linear_inverse(rng):
    f = make_form(["x", "y", "z"], ["-y", "0", "1"], BOX3)
    a = np.array([[1.0, 0.3, 0.0], [0.0, 1.0, -0.2], [0.1, 0.0, 1.0]])
    a_inv = np.linalg.inv(a)

    def texts(m, names):
        rows = []
        for i in range(3):
            rows.append(
                " + ".join(f"({float(m[i, j])!r})*{names[j]}" for j in range(3))
            )
        return rows

    s = make_substitution(["u", "v", "w"], texts(a, ["u", "v", "w"]),
                          (0, 0, 0), Box((-0.5,) * 3, (0.5,) * 3))
    g = pullback(f, s)
    s_back = make_substitution(["x", "y", "z"], texts(a_inv, ["x", "y", "z"]),
                               (0, 0, 0), Box((-0.3,) * 3, (0.3,) * 3))
    h = pullback(g, s_back)
    for p in rng.uniform(-0.3, 0.3, size=(25, 3)):
        assert np.allclose(
            coefficient_vector(h, p), coefficient_vector(f, p), atol=1e-9
        )


def test_pullback_preserves_line_integrals(rng):
    # the defining property: integrals of the form along corresponding
    # curves agree
    f = make_form(["x", "y", "z"], ["-y", "x*z", "1"], BOX3)
    s = make_substitution(
        ["u", "v", "w"], ["u+0.1*v^2", "v-0.05*w^2", "w+0.1*u*v"],
        (0, 0, 0), Box((-0.3,) * 3, (0.3,) * 3),
    )
    g = pullback(f, s)

    ts = np.linspace(0.0, 1.0, 2001)
    curve_new = np.stack(
        [
            0.2 * np.sin(2 * np.pi * ts),
            0.18 * np.cos(2 * np.pi * ts) - 0.1,
            0.15 * ts,
        ],
        axis=1,
    )
    curve_old = np.array([s.apply(tuple(p)) for p in curve_new])

    def line_integral(form, pts):
        total = 0.0
        for a, b in zip(pts, pts[1:]):
            mid = tuple((a + b) / 2.0)
            fv = np.asarray(coefficient_vector(form, mid))
            total += float(fv @ (b - a))
        return total

    assert line_integral(g, curve_new) == pytest.approx(
        line_integral(f, curve_old), abs=1e-6
    )


def test_substitution_requires_invertible_jacobian():
    with pytest.raises(FormError):
        make_substitution(["u", "v"], ["u+v", "u+v"], (0, 0),
                          Box((-1, -1), (1, 1)))


def test_mild_nonlinear_substitution_valid():
    f = make_form(["x", "y", "z"], ["-y", "0", "1"], BOX3)
    s = mild_nonlinear_substitution(f)
    jac = s.jacobian_at(s.base_point)
    assert np.allclose(jac, np.eye(3))
    for p in s.new_domain.corners():
        assert f.domain.contains(s.apply(tuple(p)))


# --- form files ----------------------------------------------------------------

FORM_TEXT = """\
# heat form of a monatomic ideal gas
vars: T, V
F[1] = 1.5
F[2] = T/V   # pressure over temperature ratio
domain: [1,2] x [1,2]
"""


def test_parse_form_file_round_trip(tmp_path):
    f = parse_form_file(FORM_TEXT)
    assert f.var_names == ("T", "V")
    assert coefficient_vector(f, (1.5, 1.5)) == (1.5, 1.0)
    text = format_form_file(f)
    g = parse_form_file(text)
    assert g.var_names == f.var_names
    assert g.domain == f.domain
    path = tmp_path / "gas.pfaff"
    path.write_text(text)
    assert load_form(path).var_names == f.var_names


@pytest.mark.parametrize(
    "text",
    [
        "F[1] = x\ndomain: [0,1]",  # missing vars
        "vars: x\nF[1] = x",  # missing domain
        "vars: x\nF[2] = x\ndomain: [0,1]",  # wrong index
        "vars: x\nF[1] = x\ndomain: [1,0]",  # empty interval
        "vars: x\nF[1] = x\ndomain: [0,1]\nwhat",  # junk line
    ],
)
def test_parse_form_file_errors(text):
    with pytest.raises(FormError):
        parse_form_file(text)


def test_box_validation():
    with pytest.raises(FormError):
        Box((0, 0), (1,))
    with pytest.raises(FormError):
        Box((0,), (0,))
