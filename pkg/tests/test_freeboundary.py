import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seglab import synthetic as sy
from seglab.errors import (
    BallOutsideDomain,
    DimensionMismatch,
    NotOnNodalSet,
    RadiusBelowResolution,
    ThresholdOutOfRange,
    WrongClass,
    ZeroH,
)
from seglab.freeboundary import (
    PointClass,
    Variant,
    blowup,
    classify_point,
    equal_angles_check,
    estimate_frequency_limit,
    extract_nodal_set,
    gradient_vanishing_check,
    reference_grid,
    reflection_residual,
)
from seglab.grid import FieldSet, make_grid
from seglab.grouping import make_decomposition

SQUARE = [(-1.0, 1.0), (-1.0, 1.0)]


@pytest.fixture(scope="module")
def g2():
    return make_grid(2, SQUARE, 256)


@pytest.fixture(scope="module")
def dec1():
    return make_decomposition(1, [0, 1])


@pytest.fixture(scope="module")
def dec3():
    return make_decomposition(3, [0, 1, 2, 3])


@pytest.fixture(scope="module")
def triple(g2):
    return sy.triple_junction(g2)


def kink_1d(x0=0.5, slopes=(1.0, 1.0), n=2048):
    return sy.kink(make_grid(1, [(0.0, 1.0)], n), x0=[x0], slopes=slopes)


def ray_dirs(k=3, offset=math.pi / 2):
    a = offset + 2 * math.pi / k * np.arange(k)
    return np.stack([np.cos(a), np.sin(a)], axis=1)


def ray_distance(points, dirs):
    t = np.clip(points @ dirs.T, 0.0, None)
    foot = t[:, :, None] * dirs[None]
    return np.min(np.linalg.norm(points[:, None, :] - foot, axis=2), axis=1)


# -- nodal sets --------------------------------------------------------------

def test_kink_nodal_set_near_interface(dec2):
    f = kink_1d()
    ns = extract_nodal_set(f, dec2, 0.02)
    assert len(ns) > 0
    assert np.all(np.abs(ns.points[:, 0] - 0.5) <= 0.02 + f.grid.hmin)
    assert not ns.degenerate


def test_zero_field_is_degenerate(dec2):
    g = make_grid(1, [(0.0, 1.0)], 64)
    ns = extract_nodal_set(FieldSet(g, np.zeros((2,) + g.shape)), dec2, 0.1)
    assert ns.degenerate
    assert len(ns) == g.shape[0]


@pytest.mark.parametrize("delta", [0.0, 0.5, -0.1, 0.7])
def test_threshold_range(dec2, delta):
    with pytest.raises(ThresholdOutOfRange):
        extract_nodal_set(kink_1d(n=64), dec2, delta)


def test_triple_junction_nodal_set_hugs_rays(triple, dec3):
    h = triple.grid.hmin
    ns = extract_nodal_set(triple, dec3, 0.005)
    dirs = ray_dirs()
    far = np.hypot(*ns.points.T) >= 0.25
    assert ray_distance(ns.points[far], dirs).max() <= 2 * h
    t = np.linspace(0.0, 0.8, 400)
    on_rays = (t[:, None, None] * dirs[None]).reshape(-1, 2)
    gap = np.min(np.linalg.norm(on_rays[:, None] - ns.points[None], axis=2), axis=1)
    assert gap.max() <= 2 * h


@given(delta=st.floats(0.01, 0.4))
def test_nodal_points_satisfy_threshold(delta):
    g = make_grid(2, SQUARE, 48)
    f = sy.triple_junction(g)
    dec = make_decomposition(3, [0, 1, 2, 3])
    ns = extract_nodal_set(f, dec, delta)
    vals = np.abs(f.values)[(slice(None),) + tuple(ns.indices.T)]
    assert np.all(vals.max(axis=0) <= delta * f.sup_norm())
    again = extract_nodal_set(f, dec, delta)
    assert np.array_equal(ns.points, again.points)


def test_groupwise_hugs_rays(triple, dec3):
    ns = extract_nodal_set(triple, dec3, 0.005, Variant.GROUPWISE)
    assert ns.variant is Variant.GROUPWISE
    r = np.hypot(*ns.points.T)
    keep = (r >= 0.25) & (r <= 0.8)
    # one dilation wider than the full variant
    assert ray_distance(ns.points[keep], ray_dirs()).max() <= 3 * triple.grid.hmin


# -- blow-up -----------------------------------------------------------------

@pytest.mark.parametrize("components", [1, 2])
def test_blowup_linear_scale_free(components):
    g = make_grid(2, SQUARE, 255)
    f = sy.kink(g, nu=[1.0, 0.0], slopes=(2.0, 2.0))
    if components == 1:
        f = FieldSet(g, f.values[0])
    a, b = blowup(f, [0.0, 0.0], 0.2), blowup(f, [0.0, 0.0], 0.05)
    assert np.max(np.abs(a.values - b.values)) < 1e-6


def test_blowup_three_halves_homogeneous(triple):
    a, b = blowup(triple, [0.0, 0.0], 0.3), blowup(triple, [0.0, 0.0], 0.15)
    assert np.max(np.abs(a.values - b.values)) < 0.02 * a.sup_norm()


@given(axis=st.sampled_from([0, 1]), k=st.integers(-10, 10), t=st.floats(0.0, 1.0),
       sign=st.sampled_from([1.0, -1.0]))
def test_blowup_scale_coherence(axis, k, t, sign):
    # a kink through a node along a grid line is reproduced exactly by interpolation
    g = make_grid(2, SQUARE, 63)
    h = g.hmin
    c = np.zeros(2)
    c[axis] = k * h
    nu = np.zeros(2)
    nu[axis] = sign
    f = sy.kink(g, nu=nu, x0=c, slopes=(1.0, 3.0))
    t = 3 * h + t * ((1.0 - abs(c[axis])) / 2.0 - 3 * h)
    ref = blowup(f, c, 0.1)
    assert np.max(np.abs(blowup(f, c, t).values - ref.values)) < 1e-6


def test_blowup_errors(g2):
    f = sy.kink(g2)
    with pytest.raises(BallOutsideDomain):
        blowup(f, [0.8, 0.0], 0.2)
    with pytest.raises(ZeroH):
        blowup(FieldSet(g2, np.zeros((2,) + g2.shape)), [0.0, 0.0], 0.1)


def _kink_deviation(v):
    y = v.grid.mesh()[0]
    pos, neg = np.maximum(y, 0.0), np.maximum(-y, 0.0)
    best = math.inf
    for p, m in ((pos, neg), (neg, pos)):
        r = np.concatenate([v.values[0] - (v.values[0] @ p) / (p @ p) * p,
                            v.values[1] - (v.values[1] @ m) / (m @ m) * m])
        best = min(best, float(np.linalg.norm(r) / np.linalg.norm(v.values)))
    return best


@pytest.mark.parametrize("t", [0.1, 0.05])
def test_solved_blowup_tends_to_kink(sweep_1d, t):
    dev = [_kink_deviation(blowup(e.result.fields, [0.5], t)) for e in sweep_1d]
    assert all(b < a for a, b in zip(dev, dev[1:]))
    assert dev[-1] < 0.25


# -- frequency limits --------------------------------------------------------

@pytest.mark.parametrize("make, expected, tol", [
    (lambda g: sy.linear(g, nu=[1.0, 2.0]), 1.0, 0.05),
    (sy.triple_junction, 1.5, 0.08),
    (sy.saddle, 2.0, 0.1),
])
def test_frequency_limit_examples(g2, make, expected, tol):
    est = estimate_frequency_limit(make(g2), [0.0, 0.0])
    assert est.N_hat == pytest.approx(expected, abs=tol)
    assert est.fitted == 3
    assert len(est.samples) == 6


def test_frequency_needs_room(g2):
    with pytest.raises(RadiusBelowResolution):
        estimate_frequency_limit(sy.saddle(g2), [0.97, 0.0])


@given(model=st.sampled_from(["triple_junction", "four_sector", "saddle"]),
       k=st.integers(1, 4))
def test_classification_consistency_under_blowup(model, k):
    # reference nodes land on grid nodes when t is a multiple of h / h_ref
    g = make_grid(2, SQUARE, 511)
    f = sy.MODELS[model](g)
    t = k * g.hmin / reference_grid(2).hmin
    direct = estimate_frequency_limit(f, [0.0, 0.0]).N_hat
    scaled = estimate_frequency_limit(blowup(f, [0.0, 0.0], t), [0.0, 0.0]).N_hat
    assert abs(direct - scaled) < 0.05


# -- classification ----------------------------------------------------------

def test_kink_point_regular(dec2):
    f = kink_1d(0.5 + 0.5 / 2049)
    pt = classify_point(f, dec2, [0.5 + 0.5 / 2049])
    assert pt.cls is PointClass.REGULAR
    assert pt.N_hat == pytest.approx(1.0, abs=0.05)
    assert pt.side_gradients is not None and min(pt.side_gradients) > 0
    assert set(pt.sides) == {1, 2}


def test_triple_junction_singular(triple, dec3):
    pt = classify_point(triple, dec3, [0.0, 0.0])
    assert pt.cls is PointClass.SINGULAR
    assert pt.N_hat == pytest.approx(1.5, abs=0.08)
    assert pt.side_gradients is None


def test_interior_point_not_on_nodal_set(dec2):
    with pytest.raises(NotOnNodalSet):
        classify_point(kink_1d(n=512), dec2, [0.2])


def test_dead_band_indeterminate(triple, dec3):
    pt = classify_point(triple, dec3, [0.0, 0.0], gap_threshold=1.5)
    assert pt.cls is PointClass.INDETERMINATE
    assert "dead band" in pt.note


@given(angle=st.floats(0.0, 2 * math.pi), s1=st.floats(0.5, 3.0), s2=st.floats(0.5, 3.0))
def test_regular_points_have_two_sides(angle, s1, s2):
    g = make_grid(2, SQUARE, 96)
    nu = [math.cos(angle), math.sin(angle)]
    f = sy.kink(g, nu=nu, slopes=(s1, s2))
    dec = make_decomposition(2, [0, 1, 2])
    pt = classify_point(f, dec, [0.0, 0.0], delta=0.05)
    if pt.cls is PointClass.REGULAR:
        assert pt.N_hat < 1.25
        assert pt.sides[0] != pt.sides[1]
        assert abs(abs(float(np.dot(pt.normal, nu))) - 1.0) < 0.05
    assert pt.cls is not PointClass.SINGULAR


def _gap_scan(f, dec, delta, singular, stride):
    """N_hat at nodal nodes kept away from the boundary and from known singular points."""
    h = f.grid.hmin
    ns = extract_nodal_set(f, dec, delta)
    pts = ns.points[np.all(np.abs(ns.points) <= 0.8, axis=1)]
    for s in singular:
        pts = pts[np.linalg.norm(pts - np.asarray(s), axis=1) >= 2 * h]
    return [estimate_frequency_limit(f, x).N_hat for x in pts[::stride]]


@pytest.mark.parametrize("case", ["kink", "triple", "four"])
def test_gap_emptiness_synthetic(g2, dec2, dec3, case):
    if case == "kink":
        f, dec, sing = sy.kink(g2, nu=[1.0, 2.0], slopes=(1.0, 2.0)), dec2, []
    elif case == "triple":
        f, dec, sing = sy.triple_junction(g2), dec3, [(0.0, 0.0)]
    else:
        f, dec, sing = sy.four_sector(g2), dec2, [(0.0, 0.0)]
    vals = np.array(_gap_scan(f, dec, 0.005, sing, stride=7))
    assert len(vals) > 20
    assert not np.any((vals > 1.1) & (vals < 1.4))


# -- reflection law ----------------------------------------------------------

@pytest.mark.parametrize("slopes, expected, tol", [
    ((1.0, 1.0), 0.0, 1e-9),
    ((3.0, 3.0), 0.0, 1e-9),
    ((1.0, 2.0), 0.75, 0.02),
    ((2.0, 1.0), 0.75, 0.02),
])
def test_reflection_kink(dec2, slopes, expected, tol):
    x0 = 0.5 + 0.5 / 2049
    assert reflection_residual(kink_1d(x0, slopes), dec2, [x0]) == pytest.approx(expected, abs=tol)


def test_reflection_2d_oblique(g2, dec2):
    f = sy.kink(g2, nu=[1.0, 1.0], slopes=(1.0, 2.0))
    assert reflection_residual(f, dec2, [0.0, 0.0]) == pytest.approx(0.75, abs=0.02)


def test_reflection_probe_range(dec2):
    x0 = 0.5 + 0.5 / 2049
    with pytest.raises(ValueError):
        reflection_residual(kink_1d(x0), dec2, [x0], s=10 / 2049)


def test_reflection_rejects_singular(triple, dec3):
    with pytest.raises(WrongClass):
        reflection_residual(triple, dec3, [0.0, 0.0])


def test_reflection_solved(solved_1d, dec2):
    assert reflection_residual(solved_1d, dec2, [0.5], delta=0.1) < 0.05


# -- gradient vanishing and equal angles -------------------------------------

@pytest.mark.parametrize("make, dec_d, ratio", [
    (sy.triple_junction, 3, 2.0),
    (sy.saddle, 1, 4.0),
])
def test_gradient_vanishing_ratios(g2, make, dec_d, ratio):
    f = make(g2)
    dec = make_decomposition(dec_d, list(range(dec_d + 1)))
    pt = classify_point(f, dec, [0.0, 0.0])
    vals = gradient_vanishing_check(f, [0.0, 0.0], [0.2, 0.1, 0.05], pt)
    assert vals[0] > vals[1] > vals[2] > 0
    for a, b in zip(vals, vals[1:]):
        assert a / b == pytest.approx(ratio, rel=0.1)


def test_gradient_vanishing_rejects_regular(g2, dec1):
    f = sy.linear(g2)
    pt = classify_point(f, dec1, [0.0, 0.0])
    assert pt.cls is not PointClass.SINGULAR
    with pytest.raises(WrongClass):
        gradient_vanishing_check(f, [0.0, 0.0], [0.1], pt)


@pytest.mark.parametrize("make, dec_d, k", [
    (sy.triple_junction, 3, 3),
    (sy.four_sector, 2, 4),
])
def test_equal_angles(g2, make, dec_d, k):
    f = make(g2)
    dec = make_decomposition(dec_d, list(range(dec_d + 1)))
    res = equal_angles_check(f, dec, [0.0, 0.0])
    assert len(res.rays) == k
    assert res.deviation < 0.05


def test_equal_angles_triple_directions(triple, dec3):
    res = equal_angles_check(triple, dec3, [0.0, 0.0])
    expected = np.sort(np.mod(math.pi / 2 + 2 * math.pi / 3 * np.arange(3), 2 * math.pi))
    assert np.allclose(res.rays, expected, atol=0.02)


def test_equal_angles_needs_2d(dec2):
    with pytest.raises(DimensionMismatch):
        equal_angles_check(kink_1d(n=256), dec2, [0.5])
