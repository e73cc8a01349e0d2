import math

import numpy as np
import pytest

from dalab import bounds
from dalab.concentration import (REPORT_COLUMNS, McConfig, binomial_margin, sample,
                                 verify_ddan_deviation, verify_loss_hoeffding,
                                 verify_mean_embedding, verify_mmd_deviation)
from dalab.errors import ConfigurationError
from dalab.nn import NetworkParams
from dalab.trainers import AdversarialModel


def test_config_validation():
    for bad in (dict(trials=50), dict(eps_grid=()), dict(eps_grid=(0.1, -1)),
                dict(distribution="cauchy"), dict(sizes=(0,))):
        with pytest.raises(ConfigurationError):
            McConfig(**bad)
    assert McConfig(sizes=(10, 50)).reference == 1000


def test_margin():
    assert binomial_margin(0.5, 100) == pytest.approx(0.15)
    assert binomial_margin(1.5, 100) == 0.0


def test_sampler_shapes_and_offset():
    rng = np.random.default_rng(0)
    for dist in ("gaussian", "uniform", "mixture"):
        X = sample(dist, 20000, rng, 3, offset=2.0)
        assert X.shape == (20000, 3)
        assert X[:, 0].mean() == pytest.approx(2.0, abs=0.05)
    assert sample("point", (4, 5), rng).shape == (4, 5, 2)


def test_hoeffding_examples():
    rep = verify_loss_hoeffding(McConfig(sizes=(50, 100, 200), eps_grid=(0.2, 1.5)))
    assert rep.passed
    big = [r for r in rep.rows if r.eps == 1.5]
    assert all(r.violations == 0 for r in big)
    row = [r for r in rep.rows if r.N == 100 and r.eps == 0.2][0]
    assert row.freq <= row.bound
    assert row.bound == bounds.hoeffding_tail(100, 0.2, 1.0)
    freqs = [r.freq for r in rep.rows if r.eps == 0.2]
    assert freqs[0] >= freqs[1] >= freqs[2]


def test_hoeffding_report_is_reproducible():
    cfg = McConfig(trials=300, sizes=(30, 60), eps_grid=(0.1,), seed=3)
    text = verify_loss_hoeffding(cfg).to_csv()
    assert text == verify_loss_hoeffding(cfg).to_csv()
    assert text.splitlines()[0] == ",".join(REPORT_COLUMNS)


def test_mean_embedding_point_mass():
    rep = verify_mean_embedding(McConfig(trials=100, sizes=(20,), eps_grid=(0.1,),
                                         distribution="point"))
    assert all(r.violations == 0 for r in rep.rows)


def test_mean_embedding_gaussian():
    rep = verify_mean_embedding(McConfig(trials=500, sizes=(100,), eps_grid=(0.5,)))
    row = rep.rows[0]
    assert row.freq <= row.bound + row.margin
    s2, C = rep.meta["sigma2"], rep.meta["C"]
    assert row.bound == pytest.approx(bounds.mean_embedding_tail(100, 0.5, math.sqrt(s2), C))
    assert rep.meta["constants"] == "estimated"


def test_mean_embedding_tail_is_rescaled_concentration_a():
    for N, eps, s, C in ((100, 0.5, 0.8, 1.3), (1000, 0.2, 1.0, 0.4)):
        assert bounds.mean_embedding_tail(N, eps, s, C) == pytest.approx(
            math.exp(-bounds.concentration_a(N, 4 * eps, s, C)), rel=1e-12)


def test_mmd_same_distribution():
    rep = verify_mmd_deviation(McConfig(trials=100, sizes=(400,), eps_grid=(0.5,), shift=0.0))
    assert rep.meta["D_reference"] < 0.05
    assert rep.rows[0].violations == 0


def test_mmd_frequency_nonincreasing_in_n():
    rep = verify_mmd_deviation(McConfig(trials=100, sizes=(100, 400, 1600), eps_grid=(0.05,)))
    freqs = [r.freq for r in rep.rows]
    assert freqs[0] >= freqs[1] >= freqs[2]
    assert rep.passed


def test_mmd_reference_too_small():
    with pytest.raises(ConfigurationError):
        verify_mmd_deviation(McConfig(trials=100, sizes=(100,), reference_size=500))
    with pytest.raises(ConfigurationError):
        verify_ddan_deviation(McConfig(trials=100, sizes=(100,), reference_size=500))


def test_ddan_constant_discriminator():
    model = AdversarialModel.create((2, 8, 2), seed=0)
    model.discriminator = NetworkParams([(np.zeros_like(W), np.zeros_like(b))
                                         for W, b in model.discriminator.layers])
    rep = verify_ddan_deviation(McConfig(trials=100, sizes=(50,), eps_grid=(0.01,)), model)
    assert rep.meta["D_reference"] == 0.0
    assert rep.rows[0].violations == 0


def test_ddan_random_discriminator_and_rate():
    cfg = McConfig(trials=500, sizes=(400, 1600, 6400), eps_grid=(0.3,))
    rep = verify_ddan_deviation(cfg)
    assert rep.rows[0].freq <= rep.rows[0].bound + rep.rows[0].margin
    med = rep.meta["median_deviation"]
    slope = np.polyfit(np.log(list(med)), np.log(list(med.values())), 1)[0]
    assert abs(slope + 0.5) <= 0.15


def test_vacuous_rows_are_excluded():
    rep = verify_loss_hoeffding(McConfig(trials=200, sizes=(2,), eps_grid=(0.05,)))
    assert rep.rows[0].vacuous and rep.passed
    assert "vacuous" in rep.to_csv()
