import numpy as np
import pytest

from heatsplit.nonlinearity import HalfSqrt, Linear, RegularizedSqrt, Zero, from_config

ALL_KINDS = [Linear(0.5), Linear(-2.0), RegularizedSqrt(0.1), RegularizedSqrt(1.0), HalfSqrt(), Zero()]
LIPSCHITZ_KINDS = [Linear(0.5), Linear(-2.0), RegularizedSqrt(0.1), RegularizedSqrt(1.0), Zero()]

DELTA = 0.1


@pytest.mark.parametrize("nl", ALL_KINDS)
def test_f_vanishes_at_zero(nl):
    assert nl.f(0.0) == 0.0


def test_reg_sqrt_matches_sqrt_outside_delta():
    nl = RegularizedSqrt(DELTA)
    assert nl.f(0.25) == pytest.approx(0.5, abs=0)
    assert nl.f(4.0) == pytest.approx(2.0, abs=0)
    assert nl.f(-0.25) == pytest.approx(-0.5, abs=0)


def test_reg_sqrt_knot_continuity():
    nl = RegularizedSqrt(DELTA)
    d, sd = DELTA, np.sqrt(DELTA)

    def blend(x):
        sign = np.sign(x)
        return (-(2 * sd / d**3) * x**3 + sign * (4 / (d * sd)) * x**2
                - (3 / (2 * sd)) * x + sign * sd / 2)

    for knot, expected in [(d / 2, sd / 2), (d, sd), (-d / 2, -sd / 2), (-d, -sd)]:
        inner = knot / sd if abs(knot) <= d / 2 + 1e-18 else np.sign(knot) * np.sqrt(abs(knot))
        assert abs(blend(knot) - inner) <= 1e-12
        assert abs(nl.f(knot) - expected) <= 1e-12


def test_reg_sqrt_c1_at_knots():
    nl = RegularizedSqrt(DELTA)
    eps = 1e-7
    for knot in (DELTA / 2, DELTA, -DELTA / 2, -DELTA):
        left = (nl.f(knot) - nl.f(knot - eps)) / eps
        right = (nl.f(knot + eps) - nl.f(knot)) / eps
        assert left == pytest.approx(right, abs=1e-5)


def test_reg_sqrt_knot_slopes():
    # interior-branch derivative equals 1/sqrt(delta) at delta/2 and
    # 1/(2 sqrt(delta)) at delta
    nl = RegularizedSqrt(DELTA)
    eps = 1e-8
    d, sd = DELTA, np.sqrt(DELTA)
    mid = lambda x: (nl.f(x + eps) - nl.f(x - eps)) / (2 * eps)
    assert mid(0.75 * d) == pytest.approx(
        -(6 * sd / d**3) * (0.75 * d) ** 2 + (8 / (d * sd)) * 0.75 * d - 3 / (2 * sd), rel=1e-6
    )
    assert mid(d / 2) == pytest.approx(1 / sd, rel=1e-6)
    assert mid(d) == pytest.approx(1 / (2 * sd), rel=1e-6)


@pytest.mark.parametrize("nl", ALL_KINDS)
def test_quotient_identity(nl):
    rng = np.random.default_rng(17)
    s = rng.uniform(-5, 5, 100_000)
    err = np.abs(nl.g(s) * s - nl.f(s))
    assert err.max() <= 1e-14


def test_g_at_zero_is_analytic():
    assert Linear(0.7).g(0.0) == 0.7
    assert RegularizedSqrt(DELTA).g(0.0) == pytest.approx(1 / np.sqrt(DELTA), abs=0)
    assert Zero().g(0.0) == 0.0
    assert HalfSqrt().g(0.0) == 0.0


def test_half_sqrt_quotient_singular_near_origin():
    nl = HalfSqrt()
    assert nl.g(-1.0) == 0.0
    assert nl.g(1e-12) == pytest.approx(1e6, rel=1e-12)
    assert nl.f(4.0) == 2.0
    assert nl.f(-3.0) == 0.0


def test_half_sqrt_g_cap():
    capped = HalfSqrt(g_cap=100.0)
    assert capped.g(1e-12) == 100.0
    assert capped.g(4.0) == 0.5


@pytest.mark.parametrize("nl", LIPSCHITZ_KINDS)
def test_lipschitz_bound_on_random_pairs(nl):
    rng = np.random.default_rng(23)
    s = rng.uniform(-3, 3, 100_000)
    t = rng.uniform(-3, 3, 100_000)
    lhs = np.abs(nl.f(s) - nl.f(t))
    rhs = nl.lipschitz_constant() * np.abs(s - t)
    assert (lhs <= rhs * (1 + 1e-12) + 1e-15).all()


def test_lipschitz_constants():
    assert Linear(0.5).lipschitz_constant() == 0.5
    assert Zero().lipschitz_constant() == 0.0
    with pytest.raises(ValueError, match="non-Lipschitz"):
        HalfSqrt().lipschitz_constant()

    # grid maximization of |f'|: the blend branch peaks at |s| = (2/3) delta
    # with slope 7/(6 sqrt(delta)), above the knot slopes
    nl = RegularizedSqrt(DELTA)
    s = np.linspace(-2 * DELTA, 2 * DELTA, 2_000_001)
    slopes = np.abs(np.diff(nl.f(s)) / np.diff(s))
    assert nl.lipschitz_constant() == pytest.approx(slopes.max(), abs=1e-6)
    assert nl.lipschitz_constant() == pytest.approx(7 / (6 * np.sqrt(DELTA)), abs=0)


@pytest.mark.parametrize("nl", LIPSCHITZ_KINDS)
def test_g_bounded_by_lipschitz_constant(nl):
    rng = np.random.default_rng(29)
    s = np.concatenate([rng.uniform(-3, 3, 100_000), np.linspace(-1, 1, 100_001)])
    assert np.abs(nl.g(s)).max() <= nl.lipschitz_constant() * (1 + 1e-12)


@pytest.mark.parametrize(
    "nl", [Linear(0.5), RegularizedSqrt(0.1), RegularizedSqrt(1.0), HalfSqrt(), Zero()]
)
def test_sign_preservation(nl):
    # holds for every kind with nonnegative parameters (Linear with lam < 0
    # flips the sign of f, but the substep multiplies by exp(...) > 0 and
    # preserves the sign of the state either way)
    rng = np.random.default_rng(31)
    s = rng.uniform(-4, 4, 10_000)
    s = s[s != 0]
    f = nl.f(s)
    assert np.all((np.sign(f) == np.sign(s)) | (f == 0))


def test_from_config():
    assert isinstance(from_config("linear", lam=2.0), Linear)
    assert isinstance(from_config("reg_sqrt", delta=0.2), RegularizedSqrt)
    assert isinstance(from_config("half_sqrt"), HalfSqrt)
    assert isinstance(from_config("zero"), Zero)
    with pytest.raises(ValueError, match="unknown nonlinearity"):
        from_config("cubic")
    with pytest.raises(ValueError):
        RegularizedSqrt(-0.1)
