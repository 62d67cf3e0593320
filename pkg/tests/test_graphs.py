import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.spatial.distance import directed_hausdorff

from treeflow.errors import DomainMismatch, OutOfDomain
from treeflow.graphs import (
    MonotoneGraph,
    check_convergence,
    compose,
    hausdorff_rho,
    quadratic_variation,
    rotated_rho_prime,
)

I1 = MonotoneGraph.identity(1.0)
I2 = MonotoneGraph.identity(2.0)
JUMP = MonotoneGraph([[0.0, 0.0], [0.0, 1.0]])

steps = st.lists(
    st.tuples(
        st.one_of(st.just(0.0), st.floats(0.01, 1.0)),
        st.one_of(st.just(0.0), st.floats(0.01, 1.0)),
    ),
    min_size=1,
    max_size=7,
)


def build(st_list, y0=0.0):
    d = np.array(st_list, dtype=float).reshape(-1, 2)
    xy = np.vstack([[0.0, y0], [0.0, y0] + np.cumsum(d, axis=0)])
    return MonotoneGraph(xy)


# offsets below rounding scale are merged away, so keep them visibly positive
graphs = st.builds(build, steps, st.one_of(st.just(0.0), st.floats(0.01, 0.5)))


def fit(g, z0):
    """Rescale ``g`` horizontally so its domain is ``[0, z0]``."""
    if g.z0 == 0:
        return MonotoneGraph([[0.0, 0.0], [z0, g.z1]])
    return MonotoneGraph(np.column_stack([g.x * (z0 / g.z0), g.y]))


def sampled_hausdorff(a, b, spacing=2.0**-9):
    A, B = a.densify(spacing), b.densify(spacing)
    return max(directed_hausdorff(A, B)[0], directed_hausdorff(B, A)[0])


def test_graph_invariants():
    g = MonotoneGraph([[0.0, 0.5], [1.0, 1.0]])
    np.testing.assert_array_equal(g.xy[0], [0.0, 0.0])  # origin prepended
    assert (g.z0, g.z1) == (1.0, 1.0)
    with pytest.raises(ValueError):
        MonotoneGraph([[0.0, 0.0], [1.0, 0.5], [0.5, 1.0]])
    with pytest.raises(ValueError):
        MonotoneGraph([[0.2, 0.0], [1.0, 1.0]])


def test_evaluations():
    g = MonotoneGraph([[0, 0], [0.3, 0.2], [0.3, 0.7], [1.0, 1.0]])
    assert g.evaluate(0.3) == pytest.approx(0.7)
    assert g.evaluate_left(0.3) == pytest.approx(0.2)
    assert g.evaluate(1.0) == pytest.approx(1.0)
    assert g.jumps() == [(0.3, pytest.approx(0.5))]
    with pytest.raises(OutOfDomain):
        g.evaluate(1.5)


def test_hausdorff_examples():
    assert hausdorff_rho(I1, I1) == 0.0
    assert hausdorff_rho(I1, I2) == pytest.approx(math.sqrt(2), abs=1e-13)
    # identity vs pure jump: (1, 1) is at distance 1 from the vertical segment
    assert hausdorff_rho(I1, JUMP) == pytest.approx(1.0, abs=1e-13)
    assert sampled_hausdorff(I1, JUMP, 2.0**-14) == pytest.approx(1.0, abs=1e-4)


@given(graphs, graphs)
def test_hausdorff_matches_sampling_oracle(a, b):
    exact = hausdorff_rho(a, b)
    approx = sampled_hausdorff(a, b)
    # densified points lie on the curves, so the oracle is within one spacing
    assert abs(exact - approx) <= 2.0**-9 + 1e-12
    assert exact == pytest.approx(hausdorff_rho(b, a), abs=1e-12)


@given(graphs, graphs, graphs)
def test_metric_axioms(a, b, c):
    for metric in (hausdorff_rho, rotated_rho_prime):
        ab, bc, ac = metric(a, b), metric(b, c), metric(a, c)
        assert ab >= 0
        assert ab == pytest.approx(metric(b, a), abs=1e-12)
        assert ac <= ab + bc + 1e-12
        assert metric(a, a) == pytest.approx(0.0, abs=1e-12)


def test_rotated_rho_prime_example():
    assert rotated_rho_prime(I1, I2) == pytest.approx(2.0)


def test_metrics_co_converge():
    seq = [MonotoneGraph([[0, 0], [0.5, 0.5 + 1 / n], [1, 1]]) for n in (2, 8, 32, 128, 512)]
    rho = [hausdorff_rho(g, I1) for g in seq]
    rho2 = [rotated_rho_prime(g, I1) for g in seq]
    assert rho[-1] < 1e-2 and rho2[-1] < 1e-2
    assert rho == sorted(rho, reverse=True)


@given(graphs)
def test_identity_laws(g):
    assert hausdorff_rho(compose(MonotoneGraph.identity(g.z1), g), g) < 1e-12
    assert hausdorff_rho(compose(g, MonotoneGraph.identity(g.z0)), g) < 1e-12


@given(graphs, graphs, graphs)
def test_associativity(a, b, c):
    assume(a.z1 > 0 and b.z1 > 0)
    b = fit(b, a.z1)
    c = fit(c, b.z1)
    left = compose(c, compose(b, a))
    right = compose(compose(c, b), a)
    assert hausdorff_rho(left, right) < 1e-9
    assert (left.z0, left.z1) == pytest.approx((a.z0, c.z1))


@given(graphs, graphs)
def test_composition_agrees_with_pointwise_maps(a, b):
    assume(a.z1 > 0)
    b = fit(b, a.z1)
    h = compose(b, a)
    xs = np.linspace(0, a.z0, 37)
    ys = np.minimum(a.evaluate(xs), b.z0)
    # at a knot of b the pointwise oracle is at the mercy of one ulp of rounding
    clear = np.min(np.abs(ys[:, None] - b.x[None, :]), axis=1) > 1e-9
    np.testing.assert_allclose(h.evaluate(xs[clear]), b.evaluate(ys[clear]), atol=1e-9)


def test_collapse_then_fan_out():
    collapse = MonotoneGraph([[0, 0], [1, 0]])
    fan = MonotoneGraph([[0, 0], [0, 1]])
    h = compose(fan, collapse)
    np.testing.assert_allclose(h.xy, [[0, 0], [0, 1], [1, 1]])


def test_composition_domain_mismatch():
    with pytest.raises(DomainMismatch):
        compose(I2, I1)


def test_quadratic_variation():
    assert quadratic_variation(I1) == 0.0
    one = MonotoneGraph([[0, 0], [0.4, 0.4], [0.4, 0.9], [1, 1]])
    assert quadratic_variation(one) == pytest.approx(0.25)


def test_quadratic_variation_matches_dyadic_limit():
    g = MonotoneGraph([[0, 0], [0.3, 0.1], [0.3, 0.6], [0.7, 0.8], [0.7, 1.0], [1, 1.2]])
    xs = np.linspace(0, g.z0, 2**16 + 1)
    brute = float(np.sum(np.diff(g.evaluate(xs)) ** 2))
    assert brute == pytest.approx(0.5**2 + 0.2**2, abs=1e-4)
    assert quadratic_variation(g) == pytest.approx(0.29)


def test_check_convergence_examples():
    assert check_convergence([I1] * 3, I1).converged
    rep = check_convergence([MonotoneGraph.identity(1 + 1 / n) for n in (1, 10, 100, 1000)], I1)
    assert rep.converged and rep.rho[-1] < 2e-3
    assert not check_convergence([I1] * 3, JUMP).converged


def test_csv_round_trip():
    g = MonotoneGraph([[0, 0], [0.1, 1 / 3], [0.1, 0.7], [1, 1]])
    assert np.array_equal(MonotoneGraph.from_csv(g.to_csv()).xy, g.xy)
