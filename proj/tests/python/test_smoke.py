import math
from pathlib import Path

import numpy as np
import pytest

import simlearn

ROOT = Path(__file__).resolve().parents[2]


def softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def test_wgcc_hand_value():
    y = np.array([0.0, 1.0, 0.0, 0.0])
    yhat = np.array([0.1, 0.4, 0.3, 0.2])
    assert simlearn.wgcc(y, yhat, 2, 2, 0.7) == pytest.approx(0.7 * -math.log(0.4), abs=1e-12)


def test_sll_reduces_to_target_cce():
    y = np.array([0.0, 1.0, 0.0, 0.0, 0.0])
    p = np.array([0.2, 0.3, 0.1, 0.25, 0.15])
    expected = simlearn.cce(y[:3], p[:3])
    assert simlearn.sll(y, p, 3, 2, lam=1.0, alpha=0.0, beta=0.0) == expected


def test_penalty_value():
    y = np.array([1.0, 0.0, 0.0])
    p = np.array([0.5, 0.3, 0.2])
    assert simlearn.group_penalty(y, p, 1, 2, alpha=2.0, beta=0.0) == pytest.approx(1.0)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(0)
    k, m = 3, 4
    z = rng.uniform(-2, 2, k + m)
    y = np.zeros(k + m)
    y[5] = 1.0
    g = simlearn.sll_grad_logits(y, z, k, m, lam=0.6, alpha=1.3, beta=0.4)
    h = 1e-5
    fd = np.empty_like(z)
    for i in range(z.size):
        up, down = z.copy(), z.copy()
        up[i] += h
        down[i] -= h
        fd[i] = (simlearn.sll(y, softmax(up), k, m, 0.6, 1.3, 0.4) - simlearn.sll(y, softmax(down), k, m, 0.6, 1.3, 0.4)) / (2 * h)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6


def test_dacc_ignores_auxiliary_outputs():
    p = np.array([[0.1, 0.2, 0.15, 0.3, 0.25]])
    assert simlearn.dacc(p, [1], 3, 2) == 1.0
    assert simlearn.accuracy(p, [1]) == 0.0


def test_auc_and_correlation():
    scores = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.2, 0.8]])
    per_class, macro = simlearn.roc_auc_ovr(scores, [0, 0, 1, 1])
    assert per_class == [1.0, 1.0]
    assert macro == 1.0
    assert simlearn.mean_abs_correlation([[1, 2, 3, 4], [1, 3, 2, 4]]) == pytest.approx(0.8)


def test_shape_error_is_value_error():
    with pytest.raises(ValueError):
        simlearn.cce(np.array([1.0, 0.0]), np.array([1.0]))


def test_bad_config_raises(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("version: 1\ntraining:\n  batch_size: 7\n")
    with pytest.raises(simlearn.ConfigError, match="training.batch_size"):
        simlearn.run_experiment(cfg, tmp_path / "out")


def test_quick_experiment_writes_summary(tmp_path):
    summary = simlearn.run_experiment(ROOT / "configs" / "quick.yaml", tmp_path)
    lines = Path(summary).read_text().splitlines()
    assert lines[0].startswith("run,mode,lambda")
    assert any(line.startswith("sl_l0.5_s0,") for line in lines)
