import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from selectrelax.grid import make_grid
from selectrelax.potentials import (DoubleWell, Harmonic, Morse, NoTurningPointError,
                                    OutOfRangeError, PotentialSamples, Tabulated, default_domain,
                                    evaluate, load_table, parse_potential, sample)


def test_morse_at_origin():
    V, Vp, Vpp = evaluate(Morse(0.2), 0.0)
    assert V == -1.0
    assert Vp == 0.0
    assert Vpp == pytest.approx(0.08, rel=1e-15)


def test_double_well_values():
    V, Vp, Vpp = evaluate(DoubleWell(15.0), 0.0)
    assert (V, Vp, Vpp) == (0.0, 0.0, -30.0)
    for lam in (0.5, 3.0, 15.0):
        x0 = math.sqrt(lam / 2)
        for x in (x0, -x0):
            V, Vp, _ = evaluate(DoubleWell(lam), x)
            assert V == pytest.approx(-lam ** 2 / 4, rel=1e-14)
            assert abs(Vp) < 1e-12 * lam ** 1.5


def test_minimum_reported():
    assert Morse(0.2).minimum() == (0.0, -1.0)
    assert DoubleWell(8.0).minimum() == pytest.approx((2.0, -16.0))
    assert Harmonic(2.0).minimum() == (0.0, 0.0)


def test_parameter_checks():
    for bad in (lambda: Morse(0.0), lambda: DoubleWell(-1.0), lambda: Harmonic(0.0)):
        with pytest.raises(ValueError):
            bad()


def test_harmonic_sample_symmetric():
    g = make_grid(-5.0, 5.0, 0.01)
    s = sample(Harmonic(1.5), g)
    assert np.allclose(s.V, 2.25 * g.x ** 2, rtol=1e-15)
    assert np.array_equal(s.V, s.V[::-1])


def test_morse_sample_bounded_below():
    g = make_grid(-5.0, 40.0, 0.01)
    s = sample(Morse(0.2), g)
    assert s.V.min() >= -1.0
    assert abs(g.x[np.argmin(s.V)]) < g.dx


@pytest.mark.parametrize("spec", [Morse(0.2), DoubleWell(5.0), Harmonic(1.3)])
def test_sample_equals_eval(spec):
    g = make_grid(-3.0, 3.0, 0.05)
    s = sample(spec, g)
    for j in (1, 17, g.J):
        V, Vp, Vpp = evaluate(spec, g.node(j))
        assert (s.V[j - 1], s.Vp[j - 1], s.Vpp[j - 1]) == (V, Vp, Vpp)


@pytest.mark.parametrize("spec", [Morse(0.2), DoubleWell(5.0), Harmonic(1.3)])
def test_derivatives_match_finite_differences(spec):
    x = np.linspace(-2.0, 3.0, 11)
    errs_p, errs_pp = [], []
    hs = [1e-1, 5e-2, 2.5e-2]
    for h in hs:
        Vm, Vpm, _ = evaluate(spec, x - h)
        V0, Vp0, Vpp0 = evaluate(spec, x)
        Vq, Vpq, _ = evaluate(spec, x + h)
        errs_p.append(np.max(np.abs((Vq - Vm) / (2 * h) - Vp0)))
        errs_pp.append(np.max(np.abs((Vpq - Vpm) / (2 * h) - Vpp0)))
    for errs in (errs_p, errs_pp):
        if errs[0] > 1e-12:
            orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            assert np.all(orders > 1.8)


@given(st.floats(0.1, 20.0), st.floats(-5.0, 5.0))
def test_double_well_parity(lam, x):
    V1, Vp1, Vpp1 = evaluate(DoubleWell(lam), x)
    V2, Vp2, Vpp2 = evaluate(DoubleWell(lam), -x)
    assert V1 == V2 and Vp1 == -Vp2 and Vpp1 == Vpp2


def test_tabulated_matches_analytic():
    xs = np.linspace(-4.0, 4.0, 4001)
    tab = Tabulated(xs, evaluate(DoubleWell(5.0), xs)[0])
    g = make_grid(-3.0, 3.0, 0.01)
    assert np.max(np.abs(sample(tab, g).V - sample(DoubleWell(5.0), g).V)) < 1e-8


def test_tabulated_checks(tmp_path):
    with pytest.raises(ValueError):
        Tabulated(np.arange(4.0), np.zeros(4))
    with pytest.raises(ValueError):
        Tabulated(np.array([0, 1, 1, 2, 3.0]), np.zeros(5))
    tab = Tabulated(np.arange(6.0), np.arange(6.0) ** 2)
    with pytest.raises(OutOfRangeError):
        tab.eval(6.5)
    with pytest.raises(OutOfRangeError):
        sample(tab, make_grid(-1.0, 5.0, 0.5))


def test_load_table(tmp_path):
    p = tmp_path / "v.csv"
    xs = np.linspace(-5, 5, 101)
    p.write_text("x,V\n" + "".join(f"{a},{a * a}\n" for a in xs))
    tab = load_table(p)
    assert tab.eval(1.5)[0] == pytest.approx(2.25, rel=1e-4)
    q = tmp_path / "nohead.csv"
    q.write_text("".join(f"{a},{a * a}\n" for a in xs))
    assert np.array_equal(load_table(q).V, tab.V)
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1\n1,oops\n")
    with pytest.raises(ValueError):
        load_table(bad)


def test_parse_potential(tmp_path):
    assert parse_potential("morse:mu=0.2") == Morse(0.2)
    assert parse_potential("dwell:lambda=15") == DoubleWell(15.0)
    assert parse_potential("harmonic:omega=1") == Harmonic(1.0)
    p = tmp_path / "t.csv"
    p.write_text("".join(f"{a},{a * a}\n" for a in range(-5, 6)))
    assert isinstance(parse_potential(f"table:{p}"), Tabulated)
    for bad in ("morse", "morse:nu=1", "square:a=1", "morse:mu=abc", "dwell:lambda=-1"):
        with pytest.raises(ValueError):
            parse_potential(bad)


def test_default_domain_brackets():
    lo, hi = default_domain(Harmonic(1.0), 5.0)
    assert lo < -math.sqrt(5) and hi > math.sqrt(5)
    lo, hi = default_domain(DoubleWell(15.0), 0.0)
    assert lo <= -math.sqrt(15) and hi >= math.sqrt(15)
    lo, hi = default_domain(Morse(0.2), -0.005)
    right_turn = -math.log(1 - math.sqrt(1 - 0.005)) / 0.2
    assert math.isfinite(lo) and hi > right_turn
    with pytest.raises(NoTurningPointError):
        default_domain(Morse(0.2), 0.0)


def test_default_domain_tail_is_negligible():
    # ground state amplitude at the edge is far below double precision
    lo, hi = default_domain(Harmonic(1.0), 1.0)
    assert math.exp(-hi ** 2 / 2) < 1e-10


def test_samples_validation():
    with pytest.raises(ValueError):
        PotentialSamples(np.zeros(3), np.zeros(4), np.zeros(3))
    with pytest.raises(ValueError):
        PotentialSamples(np.array([np.inf]), np.zeros(1), np.zeros(1))
