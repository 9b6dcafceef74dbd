import csv
import itertools
import json

import numpy as np
import pytest

from slowkill import bench
from slowkill.bench import (
    CovKind,
    Covariance,
    ResponseModel,
    SyntheticSpec,
    draw_design,
    estimate_rip,
    gen_dataset,
    gen_design,
    gen_response,
    misclass_rate,
    miss_rate,
    pred_error_regression,
    rip_ratio_curve,
    run_experiment,
    true_beta,
)


# -- designs ------------------------------------------------------------------

def test_identity_design_moments():
    X = draw_design(10000, 5, 0.0, CovKind.TOEPLITZ, seed=1)
    np.testing.assert_allclose(X.var(axis=0), 1.0, atol=0.05)
    assert np.max(np.abs(np.corrcoef(X.T) - np.eye(5))) < 0.05


def test_toeplitz_design_moments():
    X = draw_design(10000, 6, 0.5, CovKind.TOEPLITZ, seed=2)
    C = np.corrcoef(X.T)
    assert np.all(np.abs(np.diag(C, 1) - 0.5) < 0.05)
    assert np.all(np.abs(np.diag(C, 2) - 0.25) < 0.05)
    np.testing.assert_allclose(X.var(axis=0), 1.0, atol=0.05)


def test_equicorrelated_design_moments():
    X = draw_design(10000, 6, 0.4, CovKind.EQUAL, seed=3)
    C = np.corrcoef(X.T)
    off = C[~np.eye(6, dtype=bool)]
    assert np.all(np.abs(off - 0.4) < 0.05)


def test_design_deterministic():
    a = draw_design(30, 50, 0.9, CovKind.TOEPLITZ, seed=11)
    b = draw_design(30, 50, 0.9, CovKind.TOEPLITZ, seed=11)
    c = draw_design(30, 50, 0.9, CovKind.TOEPLITZ, seed=12)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)
    spec = SyntheticSpec(n=30, p=50, s=2, tau=0.9, seed=11)
    assert gen_design(spec).tobytes() == a.tobytes()


def test_rows_are_keyed_independently():
    # a longer design begins with the shorter one: row i depends only on (seed, stream, i)
    a = draw_design(10, 20, 0.5, CovKind.TOEPLITZ, seed=5)
    b = draw_design(15, 20, 0.5, CovKind.TOEPLITZ, seed=5)
    np.testing.assert_array_equal(a, b[:10])


def test_bad_tau():
    with pytest.raises(ValueError):
        draw_design(5, 5, 1.0, CovKind.TOEPLITZ, seed=0)
    with pytest.raises(ValueError):
        Covariance(CovKind.EQUAL, -0.1, 4)


# -- signal and response ----------------------------------------------------------

def test_true_beta_layout():
    b = true_beta(25, 3)
    assert (np.flatnonzero(b) + 1).tolist() == [1, 11, 21]
    assert np.flatnonzero(true_beta(5, 1)).tolist() == [0]
    np.testing.assert_array_equal(true_beta(25, 3, 0.4), 0.4 * b)
    with pytest.raises(ValueError):
        true_beta(20, 3)
    with pytest.raises(ValueError):
        SyntheticSpec(n=10, p=20, s=3)


def test_response_models():
    X = draw_design(10000, 3, 0.0, CovKind.IDENTITY, seed=4)
    b = np.array([1.0, 0.0, -0.5])
    np.testing.assert_array_equal(gen_response(X, b, ResponseModel.REGRESSION, 0, sigma=0.0), X @ b)
    y = gen_response(X, b, ResponseModel.REGRESSION, 0, sigma=2.0)
    assert np.var(y - X @ b) == pytest.approx(4.0, rel=0.05)
    yc = gen_response(X, np.array([1.0, 0, 0]), ResponseModel.CLASSIFICATION, 0)
    np.testing.assert_array_equal(yc, (X[:, 0] > 0).astype(float))
    assert yc.mean() == pytest.approx(0.5, abs=0.02)


def test_classification_dataset_has_independent_test_set():
    spec = SyntheticSpec(n=40, p=30, s=2, tau=0.5, model=ResponseModel.CLASSIFICATION, seed=9)
    d = gen_dataset(spec, 0)
    assert d.X_test.shape == d.X.shape
    assert not np.array_equal(d.X, d.X_test)
    assert gen_dataset(spec, 0).X.tobytes() == d.X.tobytes()
    assert not np.array_equal(gen_dataset(spec, 1).X, d.X)


# -- metrics ----------------------------------------------------------------------

def test_miss_rate():
    assert miss_rate([0, 10, 20], [0, 10, 20]) == 0.0
    assert miss_rate([1, 11, 99], [1, 11, 21]) == pytest.approx(1 / 3)
    assert miss_rate([], [1, 2]) == 1.0
    with pytest.raises(ValueError):
        miss_rate([1], [])


def test_pred_error_examples():
    cov = Covariance(CovKind.IDENTITY, 0.0, 4)
    b = np.array([1.0, 0, 2, 0])
    assert pred_error_regression(b, b, cov) == 0.0
    assert pred_error_regression(b + np.eye(4)[0], b, cov) == 10.0


@pytest.mark.parametrize("kind", [CovKind.TOEPLITZ, CovKind.EQUAL])
@pytest.mark.parametrize("tau", [0.0, 0.3, 0.9])
def test_structured_covariance_matches_dense(rng, kind, tau):
    for p in (1, 7, 50):
        cov = Covariance(kind, tau, p)
        d = rng.standard_normal(p)
        dense = cov.dense()
        np.testing.assert_allclose(cov.matvec(d), dense @ d, rtol=1e-10, atol=1e-12)
        assert cov.quad(d) == pytest.approx(float(d @ dense @ d), rel=1e-10)
        assert cov.quad(d) > 0


def test_misclassification():
    X = np.array([[1.0], [-2.0], [0.5], [-0.1]])
    y = (X[:, 0] > 0).astype(float)
    assert misclass_rate([1.0], X, y) == 0.0
    assert misclass_rate([0.0], X, np.array([1.0, 0, 1, 0])) == 50.0
    Xh = np.arange(10.0)[:, None] - 4.5
    yh = np.array([0, 0, 1, 0, 0, 1, 1, 1, 0, 1], float)
    # predictions 1{x - 0.2 > 0}: indices 5..9 -> 1; wrong at 2, 8
    assert misclass_rate([1.0], Xh, yh, intercept=-0.2) == 20.0


# -- restricted isometry ------------------------------------------------------------

def test_rip_orthonormal(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((30, 12)))
    for s in (1, 3, 12):
        lo, hi = estimate_rip(Q, s, num_samples=50, seed=1)
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    lo, hi = estimate_rip(Q, 3, num_samples=10)
    assert 4 * 1 * lo ** 2 / hi ** 2 == pytest.approx(4.0)


def _brute_rip(X, s):
    lo, hi = np.inf, -np.inf
    for J in itertools.combinations(range(X.shape[1]), s):
        ev = np.linalg.eigvalsh(X[:, J].T @ X[:, J])
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    return lo, hi


def test_rip_exhaustive_matches_brute_force(rng):
    X = rng.standard_normal((8, 10))
    for s in (1, 2, 4, 7):
        np.testing.assert_allclose(estimate_rip(X, s, exhaustive=True), _brute_rip(X, s), rtol=1e-10)


def test_rip_duplicated_column():
    X = np.random.default_rng(0).standard_normal((10, 6))
    X[:, 4] = X[:, 1]
    lo, _ = estimate_rip(X, 2, exhaustive=True)
    assert lo == pytest.approx(0.0, abs=1e-10)


def test_rip_refinement_monotone(rng):
    X = rng.standard_normal((20, 40))
    prev_lo, prev_hi = np.inf, -np.inf
    for k in (5, 50, 500):
        lo, hi = estimate_rip(X, 4, num_samples=k, seed=3)
        assert lo <= hi
        assert lo <= prev_lo and hi >= prev_hi
        prev_lo, prev_hi = lo, hi
    blo, bhi = _brute_rip(X[:, :12], 4)
    slo, shi = estimate_rip(X[:, :12], 4, num_samples=200, seed=1)
    assert slo >= blo - 1e-12 and shi <= bhi + 1e-12


def test_rip_errors():
    with pytest.raises(ValueError):
        estimate_rip(np.eye(3), 4)
    with pytest.raises(ValueError):
        estimate_rip(np.eye(3), 1, num_samples=0)


def test_ratio_curve_small_exhaustive():
    n, p, s, tau, seed = 20, 12, 1, 0.5, 4
    rows = rip_ratio_curve(n, p, s, tau, [1, 2, 3], reps=3, seed=seed, exhaustive=True)
    assert [r[0] for r in rows] == [1.0, 2.0, 3.0]
    for j, th in enumerate((1, 2, 3)):
        ratios = []
        for r in range(3):
            X = draw_design(n, p, tau, CovKind.TOEPLITZ, seed, stream=bench.STREAM_DESIGN * 1000 + r)
            lo, _ = _brute_rip(X, th * s + s)
            _, hi = _brute_rip(X, 2 * th * s)
            ratios.append(4 * th * lo ** 2 / hi ** 2)
        assert rows[j][1] == pytest.approx(np.mean(ratios), rel=1e-10)
        assert rows[j][2] == pytest.approx(np.std(ratios, ddof=1) / np.sqrt(3), rel=1e-8)


def test_ratio_curve_one_point_and_domain():
    rows = rip_ratio_curve(30, 40, 2, 0.5, [2], samples=20, reps=2)
    assert len(rows) == 1
    with pytest.raises(ValueError):
        rip_ratio_curve(30, 40, 2, 0.5, [11], samples=5, reps=1)


# -- experiment runner -----------------------------------------------------------

SMALL = SyntheticSpec(n=60, p=200, s=3, tau=0.5, seed=21)


def test_run_experiment_single_replicate():
    summ = run_experiment(SMALL, methods=("slowkill", "iht"), reps=1, T=30)
    assert len(summ.records) == 2
    for m in ("slowkill", "iht"):
        row = summ.row(m)
        rec = [r for r in summ.records if r["method"] == m][0]
        assert row["reps"] == 1 and row["q"] == 4
        assert row["miss_rate_mean"] == rec["miss_rate"]
        assert row["pred_error_mean"] == rec["pred_error"]
        assert row["miss_rate_se"] == 0.0


def test_run_experiment_deterministic_across_workers():
    a = run_experiment(SMALL, methods=("slowkill",), reps=3, T=30, workers=1)
    b = run_experiment(SMALL, methods=("slowkill",), reps=3, T=30, workers=3)
    strip = lambda recs: [{k: v for k, v in r.items() if k != "wall_time"} for r in recs]
    assert strip(a.records) == strip(b.records)


def test_run_experiment_classification():
    spec = SyntheticSpec(n=150, p=200, s=3, tau=0.5, model=ResponseModel.CLASSIFICATION, seed=2)
    summ = run_experiment(spec, methods=("slowkill",), reps=2, T=30)
    row = summ.row("slowkill")
    assert 0.0 <= row["pred_error_mean"] < 20.0
    assert row["model"] == "classification"


def test_run_experiment_rejects_unknown_method():
    with pytest.raises(ValueError):
        run_experiment(SMALL, methods=("lasso",), reps=1)


def test_writers(tmp_path):
    summ = run_experiment(SMALL, methods=("slowkill",), reps=2, T=20)
    bench.write_summary_csv(summ, tmp_path / "s.csv")
    bench.write_records_jsonl(summ, tmp_path / "r.jsonl")
    with open(tmp_path / "s.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == bench.SUMMARY_HEADER and len(rows) == 2
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    assert len(lines) == 2 and json.loads(lines[0])["replicate"] == 0


def test_presets_match_reported_dimensions():
    p41 = bench.PRESETS["table41-toeplitz"]
    assert (p41["n"], p41["p"], p41["s"], p41["tau"]) == (150, 5000, 10, 0.9)
    p42 = bench.PRESETS["table42-equal"]
    assert (p42["n"], p42["p"], p42["s"], p42["tau"]) == (500, 2000, 10, 0.9)
    assert p42["model"] is ResponseModel.CLASSIFICATION and p42["cov_kind"] is CovKind.EQUAL
