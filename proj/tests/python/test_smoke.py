import json
import math

import pytest

import blowup


def test_bubble_at_origin():
    assert blowup.eval_U(11, 0.0, [0.0] * 10) == 1.0
    assert blowup.eval_U(11, 1.0, [0.0] * 10) == pytest.approx(2.0 ** -9)


def test_kernel_index_is_checked():
    with pytest.raises(blowup.Error):
        blowup.eval_kernel(11, 99, 0.0, [0.0] * 10)


def test_dimension_below_minimum():
    with pytest.raises(blowup.DomainError):
        blowup.eval_U(5, 0.0, [0.0] * 4)


@pytest.mark.parametrize("n", [11, 13, 15])
def test_moment_identities(n):
    m = blowup.moments(n, 1e-10)
    assert m["I1"] / m["I2"] == pytest.approx(4 * (n - 2) / (n + 1), rel=1e-8)
    assert m["I3"] / m["I2"] == pytest.approx(12 / ((n - 2) * (n + 1)), rel=1e-8)


def test_B_beta_form():
    n = 11
    h = (n - 1) / 2
    beta = math.gamma(h) * math.gamma((n - 3) / 2) / math.gamma(h + (n - 3) / 2)
    assert blowup.compute_B(n) == pytest.approx(0.25 * blowup.sphere_area(n - 2) * beta, rel=1e-8)


def test_reduction():
    lam = blowup.critical_lambda(2.0, 1.0, -1.0)
    assert lam == pytest.approx(0.5 ** (1 / 3), rel=1e-14)
    fam = blowup.find_blowup_point(11, 2.0, [("a", 1.0, -1.0), ("b", 2.0, -1.0), ("c", -1.0, -1.0)])
    assert fam["q0"] == "b"
    assert fam["excluded"] == ["c"]
    with pytest.raises(blowup.ValidationError):
        blowup.find_blowup_point(11, 2.0, [("a", 1.0, 1.0)])


def test_run_moments(tmp_path):
    r = blowup.run("moments", n=11, output_dir=str(tmp_path))
    assert r["exit_code"] == 0
    assert (tmp_path / "moments.csv").exists()


def test_run_rejects_bad_config():
    with pytest.raises(blowup.IoError):
        blowup.run("moments", not_a_key=1)
