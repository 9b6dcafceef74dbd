import math

import numpy as np
import pytest

from slowkill import LossSpec, Problem, SolverConfig, fit
from slowkill.bench import CovKind, draw_design, true_beta
from slowkill.exceptions import InadmissibleModelError, NonpositiveRssError
from slowkill.selection import (
    Criterion,
    complexity_penalty,
    pic_known_scale,
    pic_scale_free,
    score_fit,
    select_q,
)

from conftest import orthogonal_fixture


def test_penalty_examples():
    assert complexity_penalty(0, 1, 10) == 0.0
    assert complexity_penalty(2, 1, 10) == pytest.approx(2 + 2 * math.log(5 * math.e), rel=1e-15)
    assert complexity_penalty(2, 1, 10) == pytest.approx(7.2188758248682007, rel=1e-15)
    with pytest.raises(ValueError):
        complexity_penalty(11, 1, 10)
    with pytest.raises(ValueError):
        complexity_penalty(1, 0, 10)


@pytest.mark.parametrize("p", [3, 10, 57, 200])
@pytest.mark.parametrize("m", [1, 3])
def test_penalty_shape(p, m):
    vals = [complexity_penalty(J, m, p) for J in range(1, p + 1)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    per = [v / J for J, v in zip(range(1, p + 1), vals)]
    assert all(b < a for a, b in zip(per, per[1:]))


def test_known_scale(rng):
    assert pic_known_scale(3.5, 4, 1, 50, A=0.0) == 3.5
    assert pic_known_scale(1.0, 3, 1, 50) < pic_known_scale(1.0, 5, 1, 50)
    for _ in range(20):
        lv, J, m, p, A = rng.uniform(0, 100), int(rng.integers(0, 30)), int(rng.integers(1, 4)), 30, rng.uniform(0.5, 4)
        hand = lv + A * (0.0 if J == 0 else J * m + J * math.log(math.e * p / J))
        assert pic_known_scale(lv, J, m, p, A) == pytest.approx(hand, rel=1e-14)


def test_scale_free_example_and_errors():
    # rss = 1 makes the log term vanish; with n = 10 the model would be inadmissible
    # (A P = 14.4 >= m n = 10), so the value is checked at n = 100
    assert pic_scale_free(1.0, 100, 1, 2, 10, A=2.0) == pytest.approx(2 * (2 + 2 * math.log(5 * math.e)))
    with pytest.raises(InadmissibleModelError):
        pic_scale_free(1.0, 10, 1, 2, 10, A=2.0)
    # boundary: A * P == m n is inadmissible
    pen = complexity_penalty(2, 1, 10)
    A = 10.0 / pen
    while A * pen < 10.0:
        A = np.nextafter(A, np.inf)
    assert A * pen == 10.0
    with pytest.raises(InadmissibleModelError):
        pic_scale_free(1.0, 10, 1, 2, 10, A=A)
    pic_scale_free(1.0, 10, 1, 2, 10, A=np.nextafter(A, 0.0))
    with pytest.raises(InadmissibleModelError):
        pic_scale_free(1.0, 5, 1, 2, 10)
    with pytest.raises(NonpositiveRssError):
        pic_scale_free(0.0, 100, 1, 2, 10)


def test_scale_free_shift_under_scaling(rng):
    n, m, p = 50, 2, 40
    for _ in range(20):
        c = rng.uniform(0.1, 10)
        Js = rng.integers(0, 10, 5)
        rss = rng.uniform(1, 100, 5)
        a = np.array([pic_scale_free(r, n, m, J, p) for r, J in zip(rss, Js)])
        b = np.array([pic_scale_free(c * c * r, n, m, J, p) for r, J in zip(rss, Js)])
        np.testing.assert_allclose(b - a, m * n * math.log(c * c), rtol=1e-9)
        assert np.argmin(a) == np.argmin(b)


def test_select_orthogonal_known_scale():
    # strong signal, enumerate the criterion with exact fits: only q = 3 balances fit and size
    prob, beta = orthogonal_fixture(p=20, support=(2, 9, 15), values=(30.0, -25.0, 40.0))
    res = select_q(prob, range(1, 7), SolverConfig(q=1, eta0=0.0), Criterion.KNOWN_SCALE)
    np.testing.assert_array_equal(res.chosen_fit.support, [2, 9, 15])
    assert res.chosen_q == 3
    # the oracle: score every support size with its best J-subset
    y = prob.y
    order = np.argsort(-np.abs(y))
    nnz = np.count_nonzero(y)
    oracle = [0.5 * float(np.sum(np.delete(y, order[:q]) ** 2)) + 2 * complexity_penalty(min(q, nnz), 1, 20)
              for q in range(1, 7)]
    assert int(np.argmin(oracle)) + 1 == res.chosen_q
    np.testing.assert_allclose(res.scores, oracle, rtol=1e-8, atol=1e-8)


def test_select_single_grid(orthogonal):
    prob, _ = orthogonal
    res = select_q(prob, [3], SolverConfig(q=3, eta0=0.0), Criterion.KNOWN_SCALE)
    assert res.q_grid == [3] and res.chosen_q == 3 and len(res.fits) == 1


def test_scale_free_skips_interpolation(orthogonal):
    prob, _ = orthogonal
    res = select_q(prob, [1, 2, 3, 4], SolverConfig(q=1, eta0=0.0))
    assert 3 in res.skipped and 4 in res.skipped
    assert res.scores[2] is None
    assert res.chosen_q in (1, 2)


def test_all_inadmissible_raises():
    X = np.eye(4)[:, :4]
    prob = Problem(np.vstack([X, X]), np.array([1.0, 2, 3, 4, 1, 2, 3, 4]))
    with pytest.raises(InadmissibleModelError):
        select_q(prob, [2, 3], SolverConfig(q=2, eta0=0.0))


def test_grid_validation(orthogonal):
    prob, _ = orthogonal
    for grid in ([], [3, 2], [5, 20]):
        with pytest.raises(ValueError):
            select_q(prob, grid, SolverConfig(q=1))


def _noisy(seed, scale=1.0):
    n, p, s = 80, 150, 3
    X = draw_design(n, p, 0.5, CovKind.TOEPLITZ, seed)
    b = true_beta(p, s, 1.0)
    noise = np.random.default_rng(seed).standard_normal(n)
    return Problem(X, scale * (X @ b + 0.5 * noise)), b


def test_select_deterministic_and_rescorable():
    prob, _ = _noisy(3)
    cfg = SolverConfig(q=1, eta0=5.0)
    a = select_q(prob, [2, 3, 4, 5], cfg)
    b = select_q(prob, [2, 3, 4, 5], cfg)
    assert a.scores == b.scores and a.chosen_q == b.chosen_q
    for q, sc, f in zip(a.q_grid, a.scores, a.fits):
        assert score_fit(prob, f) == pytest.approx(sc, rel=1e-12)
    assert set(np.flatnonzero(_noisy(3)[1])) <= set(a.chosen_fit.support)


def test_scale_free_argmin_invariant_to_scaling():
    for seed in range(3):
        a = select_q(_noisy(seed)[0], [2, 3, 4, 5], SolverConfig(q=1, eta0=5.0))
        b = select_q(_noisy(seed, 10.0)[0], [2, 3, 4, 5], SolverConfig(q=1, eta0=5.0))
        assert a.chosen_q == b.chosen_q
        diffs = np.array(b.scores) - np.array(a.scores)
        np.testing.assert_allclose(diffs, diffs[0], rtol=1e-6)
