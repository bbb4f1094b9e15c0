import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from generators import DOMAINS, random_points, trees
from rkhscert import kernel_core as kc
from rkhscert.domain import DomainError, DomainTag
from rkhscert.psd_engine import (BOUNDARY_CAP, EigenError, HermitianMatrix, PointSet, PsdVerdict,
                                 cholesky_psd_probe, classify, eig_hermitian, gram, psd_check, psd_verdict,
                                 sample_points)

DISC, BALL2 = DomainTag.disc(), DomainTag.ball(2)


@pytest.mark.parametrize("domain", DOMAINS + [DomainTag.ball(3), DomainTag.polydisc(3)], ids=str)
@pytest.mark.parametrize("strategy", ["grid", "uniform_random", "boundary_biased"])
def test_sampling_stays_inside(domain, strategy):
    pts = sample_points(domain, strategy, 40, seed=5)
    assert len(pts) == 40
    slack = domain.slack(pts.coords)
    assert np.all(slack > 0)
    if strategy == "boundary_biased" and domain.kind == "ball":
        assert np.all(np.sqrt(1 - slack) <= 1 - BOUNDARY_CAP + 1e-15)


def test_sampling_is_seeded():
    a = sample_points(BALL2, "boundary_biased", 10, seed=3)
    b = sample_points(BALL2, "boundary_biased", 10, seed=3)
    c = sample_points(BALL2, "boundary_biased", 10, seed=4)
    assert np.array_equal(a.coords, b.coords) and not np.array_equal(a.coords, c.coords)


def test_boundary_biased_concentrates_near_the_boundary():
    r = np.abs(sample_points(DISC, "boundary_biased", 2000, seed=1).coords[:, 0])
    u = np.abs(sample_points(DISC, "uniform_random", 2000, seed=1).coords[:, 0])
    assert np.median(1 - r) < 0.1 * np.median(1 - u)


def test_sampling_rejects_bad_requests():
    with pytest.raises(ValueError):
        sample_points(DISC, "spiral", 5)
    with pytest.raises(ValueError):
        sample_points(DISC, "grid", 0)


def test_point_set_validation_and_prefix():
    with pytest.raises(ValueError):
        PointSet(np.array([[0.1], [0.1 + 1e-12]]), DISC)
    with pytest.raises(DomainError):
        PointSet(np.array([[1.0]]), DISC)
    with pytest.raises(ValueError):
        PointSet(np.zeros((0, 1)), DISC)
    pts = sample_points(DISC, "uniform_random", 10, seed=0)
    assert np.array_equal(pts.prefix(4).coords, pts.coords[:4])
    joined = pts.prefix(4).extend(PointSet(np.array([[0.99]]), DISC))
    assert len(joined) == 5
    with pytest.raises(DomainError):
        pts.extend(sample_points(BALL2, "grid", 2))


def test_point_set_csv_round_trip(tmp_path):
    pts = sample_points(BALL2, "boundary_biased", 12, seed=9, label="bb")
    path = tmp_path / "pts.csv"
    pts.to_csv(path)
    back = PointSet.from_csv(path)
    assert np.array_equal(back.coords, pts.coords)
    assert back.domain == BALL2 and back.seed == 9 and back.label == "bb"


@given(st.integers(1, 30), st.integers(0, 1000))
def test_eig_hermitian_contract(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = HermitianMatrix.from_array(a)
    w, v = eig_hermitian(h)
    assert np.all(np.diff(w) >= 0)
    fro = np.linalg.norm(h.entries)
    assert np.max(np.linalg.norm(h.entries @ v - v * w, axis=0)) <= 1e-9 * n * fro
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-9)
    assert h.hermiticity_defect > 0


def test_hermitian_matrix_basics():
    h = HermitianMatrix.from_array(np.diag([1.0, 3.0]))
    assert h.order == 2 and h.scale == 2.0
    assert h.quadratic_form([1, 1j]) == 4
    with pytest.raises(ValueError):
        HermitianMatrix.from_array(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        eig_hermitian(HermitianMatrix.from_array(np.zeros((0, 0))))
    assert issubclass(EigenError, np.linalg.LinAlgError)


def test_classify_bands():
    assert classify(-1e-10, 1.0, 1e-9) == "psd"
    assert classify(-5e-9, 1.0, 1e-9) == "inconclusive"
    assert classify(-1e-7, 1.0, 1e-9) == "not_psd"


def test_negative_diagonal_gives_verified_witness():
    pts = sample_points(DISC, "uniform_random", 15, seed=2)
    k = kc.difference(kc.HardyDisc(), kc.scale(2, kc.HardyDisc()))
    v = psd_check(k, pts)
    assert v.verdict == "not_psd"
    a = gram(k, pts)
    assert a.quadratic_form(v.witness).real == pytest.approx(v.witness_value)
    assert v.witness_value < 0
    assert set(v.to_json()) == {"min_eigenvalue", "scale", "tolerance", "verdict", "witness_value"}


@pytest.mark.parametrize("domain", DOMAINS, ids=str)
def test_reproducing_kernels_are_psd(domain):
    from generators import builtin_kernels
    pts = random_points(np.random.default_rng(11), domain, 30)
    for k in builtin_kernels(domain):
        assert psd_check(k, pts).verdict == "psd", k.name
        assert psd_check(k, pts, screen=True).verdict == "psd", k.name


@given(trees())
def test_closure_trees_are_psd(case):
    k, pts = case
    assert psd_check(k, pts).verdict == "psd"


def test_cholesky_probe_agrees_with_eigenvalues():
    pd = HermitianMatrix.from_array(np.diag([1.0, 2.0, 3.0]))
    assert cholesky_psd_probe(pd) == "psd"
    nd = HermitianMatrix.from_array(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert cholesky_psd_probe(nd) == "not_psd" == psd_verdict(nd).verdict
    singular = HermitianMatrix.from_array(np.ones((3, 3)))
    assert cholesky_psd_probe(singular) == "inconclusive"
    assert psd_verdict(singular).verdict == "psd"


def test_gram_parallel_matches_serial():
    from concurrent.futures import ThreadPoolExecutor
    import rkhscert.psd_engine as pe
    pts = sample_points(BALL2, "uniform_random", 600, seed=0)
    with ThreadPoolExecutor(4) as ex:
        par = gram(kc.HardyBall(2), pts, executor=ex)
    assert np.array_equal(par.entries, gram(kc.HardyBall(2), pts).entries)
    assert len(pts) > pe.GRAM_BLOCK


def test_gram_domain_mismatch():
    with pytest.raises(DomainError):
        gram(kc.HardyDisc(), sample_points(BALL2, "grid", 3))


def test_gram_error_carries_point_set_label():
    pts = PointSet(np.array([[0.99]]), DISC, "edge")
    with pytest.raises(kc.KernelEvaluationError, match="edge"):
        gram(kc.SeriesBergmanStar(1, 0.0, 5), pts)
