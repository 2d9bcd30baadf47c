import numpy as np
import pytest

from proxalloc.errors import DimensionMismatch
from proxalloc.prox import (BallIndicator, BoxIndicator, CustomTerm, L1Anchor,
                            PairwiseExact, PairwisePhi, ZeroTerm, phi,
                            stack_terms, validate_prox)


def builtins_for_sampling():
    return [
        L1Anchor(anchor=np.array([1.0, -0.5]), weight=1.0),
        L1Anchor(anchor=np.array([0.0, 0.0]), weight=2.5),
        PairwisePhi(),
        PairwiseExact(weight=1.0),
        PairwiseExact(weight=0.7),
        BallIndicator(center=np.array([0.5, -1.0]), radius=2.0),
        BoxIndicator(lower=np.array([-1.0, -2.0]), upper=np.array([1.5, 0.5])),
        ZeroTerm(),
    ]


def sample_pairs(rng, count=1000, dim=2, lo=-10.0, hi=10.0):
    return [(rng.uniform(lo, hi, dim), rng.uniform(lo, hi, dim))
            for _ in range(count)]


# --- phi -------------------------------------------------------------------

def test_phi_three_branches():
    assert phi(3.0, 1.0) == 2.0          # upper branch
    assert phi(0.5, 0.0) == 0.0          # dead zone returns the second arg
    assert phi(-3.0, 0.0) == -2.0        # lower branch


def test_phi_branch_boundaries_exact():
    for x2 in (-2.0, 0.0, 0.1, 7.3):
        assert phi(x2 + 1.0, x2) == x2   # boundary belongs to the middle branch
        assert phi(x2 - 1.0, x2) == x2
        x1 = x2 + 1.0 + 1e-9             # just past the boundary: outer branches
        assert phi(x1, x2) == x1 - 1.0
        x1 = x2 - 1.0 - 1e-9
        assert phi(x1, x2) == x1 + 1.0


def test_phi_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    a = rng.uniform(-5, 5, 50)
    b = rng.uniform(-5, 5, 50)
    vec = phi(a, b)
    for k in range(50):
        assert vec[k] == phi(a[k], b[k])


# --- l1 anchor -------------------------------------------------------------

def test_l1_anchor_examples():
    t = L1Anchor(anchor=np.array([1.0]), weight=1.0)
    assert t.prox(np.array([3.0]))[0] == 2.0
    t0 = L1Anchor(anchor=np.array([0.0]), weight=1.0)
    assert t0.prox(np.array([0.5]))[0] == 0.0
    assert t0.prox(np.array([-3.0]))[0] == -2.0


def test_l1_anchor_fixed_point_structure(rng):
    t = L1Anchor(anchor=np.array([0.3, -1.2, 4.0]), weight=1.7)
    for _ in range(200):
        theta = rng.uniform(-10, 10, 3)
        delta = t.prox(theta)
        g = theta - delta
        assert np.all(np.abs(g) <= t.weight + 1e-12)
        moved = delta != t.anchor
        assert np.all(np.abs(g[moved] - t.weight * np.sign(delta - t.anchor)[moved]) <= 1e-12)


def test_l1_anchor_weight_limits():
    theta = np.array([2.0, -3.0, 0.25])
    p = np.array([0.5, 0.5, 0.5])
    near_id = L1Anchor(anchor=p, weight=1e-9).prox(theta)
    # displacement is bounded by the weight itself (plus fp rounding)
    assert np.abs(near_id - theta).max() <= 1e-9 * (1.0 + 1e-6)
    to_anchor = L1Anchor(anchor=p, weight=1e9).prox(theta)
    assert np.array_equal(to_anchor, p)


# --- pairwise --------------------------------------------------------------

def test_pairwise_phi_examples():
    t = PairwisePhi()
    assert np.array_equal(t.prox(np.array([3.0, 0.0])), [2.0, 1.0])
    assert np.array_equal(t.prox(np.array([1.0, 1.0])), [1.0, 1.0])
    # inside the dead zone the construction swaps the components
    assert np.array_equal(t.prox(np.array([1.5, 1.0])), [1.0, 1.5])


def test_pairwise_phi_dimension_check():
    with pytest.raises(DimensionMismatch):
        PairwisePhi().prox(np.array([1.0, 2.0, 3.0]))


def test_pairwise_exact_examples():
    t = PairwiseExact()
    assert np.array_equal(t.prox(np.array([3.0, 0.0])), [2.0, 1.0])
    assert np.array_equal(t.prox(np.array([1.5, 1.0])), [1.25, 1.25])


def test_pairwise_variants_agree_iff_gap_at_least_two():
    # |t1-t2| >= 2: both shrink the gap by 2 (identical); |t1-t2| <= 1: the
    # three-branch map swaps while the exact prox averages; in between the
    # map still shifts by +/-1 (overshooting zero) while the exact averages
    rng = np.random.default_rng(3)
    a, b = PairwisePhi(), PairwiseExact()
    for _ in range(400):
        theta = rng.uniform(-6, 6, 2)
        gap = theta[0] - theta[1]
        pa, pb = a.prox(theta), b.prox(theta)
        if abs(gap) >= 2.0:
            assert np.allclose(pa, pb, atol=1e-14)
        elif abs(gap) <= 1.0:
            assert np.allclose(pa, theta[::-1], atol=1e-14)
            assert np.allclose(pb, np.full(2, theta.mean()), atol=1e-14)
        else:
            s = np.sign(gap)
            assert np.allclose(pa, [theta[0] - s, theta[1] + s], atol=1e-14)
            assert np.allclose(pb, np.full(2, theta.mean()), atol=1e-14)


# --- projections -----------------------------------------------------------

def test_ball_projection_examples():
    t = BallIndicator(center=np.zeros(2), radius=8.0)
    assert np.array_equal(t.prox(np.zeros(2)), np.zeros(2))
    assert np.allclose(t.prox(np.array([16.0, 0.0])), [8.0, 0.0], atol=1e-14)
    c = np.array([-4.0, 5.5])
    t2 = BallIndicator(center=c, radius=8.0)
    assert np.array_equal(t2.prox(c), c)


def test_ball_projection_idempotent(rng):
    t = BallIndicator(center=np.array([1.0, -2.0]), radius=3.0)
    for _ in range(200):
        theta = rng.uniform(-10, 10, 2)
        once = t.prox(theta)
        assert np.abs(t.prox(once) - once).max() <= 1e-12


def test_box_projection_and_value():
    t = BoxIndicator(lower=np.array([-1.0, 0.0]), upper=np.array([1.0, 2.0]))
    assert np.array_equal(t.prox(np.array([5.0, -3.0])), [1.0, 0.0])
    assert t.value(np.array([0.0, 1.0])) == 0.0
    assert t.value(np.array([2.0, 1.0])) == np.inf


# --- validation ------------------------------------------------------------

def test_validate_prox_builtins(rng):
    for term in builtins_for_sampling():
        report = validate_prox(term, sample_pairs(rng, 1000))
        assert report.max_nonexpansive_violation <= 1e-12, term.kind
        if report.max_fixed_point_residual is not None:
            assert report.max_fixed_point_residual <= 1e-12, term.kind
        assert report.passed


def test_validate_prox_flags_expansive_map(rng):
    bad = CustomTerm(q=2, evaluate=lambda t: 2.0 * t)
    report = validate_prox(bad, sample_pairs(rng, 50))
    assert report.max_nonexpansive_violation > 1e-9
    assert not report.passed


def test_validate_prox_custom_with_witness(rng):
    # custom wrapper around the scalar soft threshold, with its witness
    def witness(delta, g):
        on_kink = delta == 0.0
        res = np.where(on_kink, np.maximum(np.abs(g) - 1.0, 0.0),
                       np.abs(g - np.sign(delta)))
        return float(np.linalg.norm(res))

    term = CustomTerm(q=2,
                      evaluate=lambda t: np.sign(t) * np.maximum(np.abs(t) - 1.0, 0.0),
                      witness_fn=witness)
    report = validate_prox(term, sample_pairs(rng, 200))
    assert report.passed


def test_validate_prox_needs_samples():
    with pytest.raises(ValueError):
        validate_prox(ZeroTerm(), [])


# --- stacked slots ---------------------------------------------------------

def test_stacked_slot_matches_loop(rng):
    anchors = [np.array([0.0, 1.0]), np.array([-2.0, 0.5]), np.array([3.0, 3.0])]
    terms = [L1Anchor(anchor=a, weight=w) for a, w in zip(anchors, (1.0, 0.5, 2.0))]
    stacked = stack_terms(terms)
    thetas = rng.uniform(-5, 5, (3, 2))
    rows = np.stack([t.prox(thetas[i]) for i, t in enumerate(terms)])
    assert np.array_equal(stacked.prox(thetas), rows)
    vals = np.array([t.value(thetas[i]) for i, t in enumerate(terms)])
    assert np.allclose(stacked.value(thetas), vals, atol=1e-14)
    subs = np.stack([t.subgradient(thetas[i]) for i, t in enumerate(terms)])
    assert np.array_equal(stacked.subgrad(thetas), subs)


def test_stacked_slot_every_builtin_kind(rng):
    families = [
        [L1Anchor(anchor=rng.uniform(-2, 2, 2)) for _ in range(4)],
        [PairwisePhi() for _ in range(4)],
        [PairwiseExact(weight=w) for w in (1.0, 0.5, 2.0, 1.5)],
        [BallIndicator(center=rng.uniform(-2, 2, 2), radius=r)
         for r in (1.0, 2.0, 0.5, 3.0)],
        [BoxIndicator(lower=np.array([-1.0, -1.0]), upper=np.array([1.0, 1.0]))
         for _ in range(4)],
        [ZeroTerm() for _ in range(4)],
    ]
    thetas = rng.uniform(-4, 4, (4, 2))
    for terms in families:
        slot = stack_terms(terms)
        rows = np.stack([t.prox(thetas[i]) for i, t in enumerate(terms)])
        assert np.allclose(slot.prox(thetas), rows, atol=1e-14)
        rows_p = np.stack([t.project(thetas[i]) for i, t in enumerate(terms)])
        assert np.allclose(slot.project(thetas), rows_p, atol=1e-14)


def test_mixed_slot_falls_back_to_loop(rng):
    terms = [L1Anchor(anchor=np.zeros(2)), ZeroTerm(), PairwiseExact()]
    slot = stack_terms(terms)
    thetas = rng.uniform(-4, 4, (3, 2))
    rows = np.stack([t.prox(thetas[i]) for i, t in enumerate(terms)])
    assert np.array_equal(slot.prox(thetas), rows)
