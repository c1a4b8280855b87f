import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scl_throughput.modem import (
    Constellation,
    ConstellationError,
    GaussHermite,
    GmiCurve,
    MonteCarlo,
    PrecisionError,
    excess_kurtosis,
    gmi,
    gmi_bound,
    gmi_with_error,
    ngmi,
    select_code_rates,
    shape_constellation,
    square_qam,
    throughput,
)
from scl_throughput.modem.rates import RateAssignment
from scl_throughput.modem.shaping import _Quadrature, fd_gradient
from scl_throughput.modem.gmi import LN2


# -- constellations and kurtosis ------------------------------------------


def test_qpsk_kurtosis_is_minus_one():
    assert excess_kurtosis(square_qam(2)) == pytest.approx(-1.0, abs=1e-15)


def test_16qam_kurtosis_by_enumeration():
    levels = np.array([-3, -1, 1, 3])
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    mu2 = np.mean(np.abs(pts) ** 2)
    mu4 = np.mean(np.abs(pts) ** 4)
    assert (mu2, mu4) == (pytest.approx(10.0), pytest.approx(132.0))
    assert excess_kurtosis(square_qam(4)) == pytest.approx(mu4 / mu2**2 - 2)
    assert excess_kurtosis(square_qam(4)) == pytest.approx(-0.68, abs=1e-12)


def test_64qam_kurtosis():
    assert excess_kurtosis(square_qam(6)) == pytest.approx(-0.619047619, abs=1e-9)


def test_gaussian_cloud_kurtosis_is_zero():
    rng = np.random.default_rng(5)
    cloud = rng.standard_normal(2**20) + 1j * rng.standard_normal(2**20)
    c = Constellation(cloud, np.arange(cloud.size))
    assert abs(c.excess_kurtosis) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0.1, 10.0))
def test_kurtosis_rotation_and_scale_invariant(angle, scale):
    base = square_qam(4)
    moved = base.with_points(base.points * scale * np.exp(1j * angle))
    assert moved.excess_kurtosis == pytest.approx(base.excess_kurtosis, abs=1e-12)


def test_constellation_normalised_and_gray():
    c = square_qam(6)
    assert c.mu2 == pytest.approx(1.0)
    # nearest neighbours on the grid differ in exactly one bit
    d = np.abs(c.points[:, None] - c.points[None, :])
    dmin = d[d > 0].min()
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert np.sum(c.bits[i] != c.bits[j]) == 1


def test_constellation_validation():
    with pytest.raises(ConstellationError):
        Constellation(np.ones(3), np.arange(3))
    with pytest.raises(ConstellationError):
        Constellation(np.arange(4) + 1.0, [0, 1, 1, 3])
    with pytest.raises(ConstellationError):
        square_qam(3)


def test_constellation_file_round_trip(tmp_path):
    c = square_qam(4)
    path = tmp_path / "c.txt"
    c.to_file(path)
    first = path.read_text().splitlines()[0].split()
    assert len(first) == 3 and len(first[2]) == 4
    back = Constellation.from_file(path)
    assert np.array_equal(back.points, c.points)
    assert np.array_equal(back.labels, c.labels)


def test_constellation_file_rejects_duplicate_labels(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 0 00\n-1 0 01\n0 1 01\n0 -1 11\n")
    with pytest.raises(ConstellationError):
        Constellation.from_file(path)


# -- GMI -------------------------------------------------------------------


@pytest.mark.parametrize("m", [2, 4, 6])
def test_gmi_noise_free_limit(m):
    assert gmi(square_qam(m), 10**4.0) == pytest.approx(m, abs=1e-3)


def test_gmi_zero_information_limit():
    assert gmi(square_qam(4), 10**-3.0) <= 0.01


def test_bpsk_like_qpsk_gmi_matches_closed_integral():
    # Gray QPSK splits into two independent BPSK channels at half the SNR per dimension;
    # the BPSK mutual information is 1 - E[log2(1 + exp(-2 y a / s2))]
    from scipy.integrate import quad

    snr = 10 ** 0.5
    s2 = 1 / (2 * snr)
    a = np.sqrt(0.5)

    def integrand(y):
        pdf = np.exp(-((y - a) ** 2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)
        return pdf * np.log2(1 + np.exp(-2 * y * a / s2))

    bpsk = 1 - quad(integrand, a - 12 * np.sqrt(s2), a + 12 * np.sqrt(s2))[0]
    assert gmi(square_qam(2), snr) == pytest.approx(2 * bpsk, abs=1e-4)
    assert gmi(square_qam(2), snr, GaussHermite(60)) == pytest.approx(2 * bpsk, abs=1e-6)


@pytest.mark.parametrize("snr_db", [0.0, 7.0, 11.0])
def test_quadrature_agrees_with_monte_carlo(snr_db):
    c = square_qam(2)
    snr = 10 ** (snr_db / 10)
    gh = gmi(c, snr, GaussHermite())
    mc, se = gmi_with_error(c, snr, MonteCarlo(1_000_000, seed=11))
    assert abs(gh - mc) <= 3 * se


def test_precision_errors():
    with pytest.raises(PrecisionError):
        gmi(square_qam(2), 1.0, GaussHermite(3))
    with pytest.raises(PrecisionError):
        gmi(square_qam(2), 1.0, MonteCarlo(100))
    with pytest.raises(ValueError):
        gmi(square_qam(2), 0.0)


def test_gmi_monotone_in_snr():
    c = square_qam(4)
    values = [gmi(c, 10 ** (s / 10)) for s in np.arange(-10, 30, 2.0)]
    assert np.all(np.diff(values) >= -1e-9)
    assert all(0 <= v <= 4 for v in values)


def test_curve_interpolates_quadrature():
    c = square_qam(4)
    curve = GmiCurve(c)
    for s in (3.3, 7.9, 12.1):
        assert curve(s) == pytest.approx(gmi(c, 10 ** (s / 10)), abs=2e-4)
    # below the grid the low-SNR linear law takes over
    assert curve(-25.0) == pytest.approx(curve.values[0] / 10)
    assert curve(-25.0) == pytest.approx(gmi(c, 10 ** -2.5), rel=0.05)
    assert curve(60.0) == pytest.approx(curve.values[-1])


def test_ngmi_arithmetic():
    assert ngmi(6, 6) == 1.0
    assert ngmi(0, 4) == 0.0
    assert ngmi(4.5, 6) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        ngmi(7.0, 6)


# -- shaping ---------------------------------------------------------------


def test_fd_gradient_matches_direct_differences():
    c = square_qam(4)
    quad = _Quadrature(10 ** 0.7, 6)
    rng = np.random.default_rng(0)
    pts = c.points + 0.05 * (rng.standard_normal(16) + 1j * rng.standard_normal(16))
    grad = fd_gradient(pts, c.bits, quad)

    def value(points):
        # same unnormalised objective the gradient differentiates
        total = 0.0
        for a in range(points.size):
            y = points[a] + quad.nodes
            metric = -np.abs(y[:, None] - points[None, :]) ** 2 / quad.sigma2
            lik = np.exp(metric - metric.max(axis=1, keepdims=True))
            for b in range(c.m):
                same = c.bits[:, b] == c.bits[a, b]
                total += np.sum(quad.weights * np.log(lik.sum(1) / lik[:, same].sum(1)))
        return c.m - total / (points.size * LN2)

    h = 1e-5
    for j in (0, 5, 15):
        e = np.zeros(16)
        e[j] = h
        d_re = (value(pts + e) - value(pts - e)) / (2 * h)
        d_im = (value(pts + 1j * e) - value(pts - 1j * e)) / (2 * h)
        assert grad[j].real == pytest.approx(d_re, rel=1e-4, abs=1e-7)
        assert grad[j].imag == pytest.approx(d_im, rel=1e-4, abs=1e-7)


def test_zero_iterations_returns_square_qam():
    c = shape_constellation(4, 7.0, iters=0)
    assert np.allclose(c.points, square_qam(4).points)
    assert c.excess_kurtosis == pytest.approx(-0.68)


def test_shaping_never_loses_gmi():
    snr = 10 ** 0.7
    c = shape_constellation(4, 7.0, iters=20, seed=3)
    assert gmi(c, snr) >= gmi(square_qam(4), snr)


def test_unsupported_shaping_order():
    with pytest.raises(ConstellationError):
        shape_constellation(8, 15.0)


# -- code rates -------------------------------------------------------------


def brute(ngmi_values, m, k):
    best = 0.0
    cands = np.unique(ngmi_values)
    for size in range(1, min(k, cands.size) + 1):
        for subset in itertools.combinations(cands, size):
            sel = np.array(subset)
            pos = np.searchsorted(sel, ngmi_values, side="right") - 1
            r = np.where(pos >= 0, sel[np.maximum(pos, 0)], 0.0)
            best = max(best, float(np.sum(2 * 50e9 * m * r)))
    return best


def test_single_rate_example():
    a = select_code_rates([0.9, 0.8, 0.7], 1.0, 0.5, 1)
    assert a.rate_set == (0.7,)
    assert a.total_throughput == pytest.approx(2.1)


def test_enough_rates_reach_the_bound():
    rng = np.random.default_rng(2)
    n = rng.uniform(0.3, 0.95, 9)
    a = select_code_rates(n, 6, 50e9, 9)
    assert a.total_throughput == pytest.approx(gmi_bound(n, 6, 50e9))
    assert np.allclose(a.rates, n)


def test_dp_equals_exhaustive_search():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(1, 13))
        k = int(rng.integers(1, 4))
        values = rng.uniform(0, 1, n)
        m = rng.choice([4.0, 6.0], n)
        got = select_code_rates(values, m, 50e9, k)
        assert got.total_throughput == pytest.approx(brute(values, m, k), rel=1e-12)
        assigned = ~np.isnan(got.rates)
        assert len(got.rate_set) <= k
        assert np.all(got.rates[assigned] <= values[assigned])
        assert set(got.rates[assigned]) <= set(got.rate_set)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30))
def test_throughput_monotone_in_k_and_bounded(values):
    values = np.array(values)
    prev = -1.0
    bound = gmi_bound(values, 6, 50e9)
    for k in range(1, 6):
        t = select_code_rates(values, 6, 50e9, k).total_throughput
        assert t >= prev - 1e-6
        assert t <= bound * (1 + 1e-12) + 1e-6
        prev = t


def test_rate_validation():
    with pytest.raises(ValueError):
        select_code_rates([0.5], 4, 50e9, 0)
    with pytest.raises(ValueError):
        select_code_rates([1.5], 4, 50e9, 1)


def test_throughput_arithmetic():
    one = RateAssignment((1.0,), np.array([1.0]), np.array([6.0]), np.array([50e9]))
    assert throughput(one) == pytest.approx(600e9)
    empty = RateAssignment((), np.array([np.nan]), np.array([6.0]), np.array([50e9]))
    assert throughput(empty) == 0.0
    full = RateAssignment((0.8,), np.full(364, 0.8), np.full(364, 6.0), np.full(364, 50e9))
    assert throughput(full) == pytest.approx(174.72e12)
