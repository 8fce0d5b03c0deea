import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from phasefuse import dsp
from phasefuse.dataset_io import harmonic_test_utterance
from phasefuse.dsp import FeatureMap
from phasefuse.entropy import (EntropyConfig, EntropyCurve, analyze_utterance, entropy_means,
                               entropy_report, frame_entropy, global_minmax_normalize, map_entropy,
                               random_noise_map)

from oracles import histogram_entropy


def fmap(v):
    return FeatureMap(np.asarray(v, dtype=float), dsp.MAGNITUDE, "synthetic")


# --- normalisation -----------------------------------------------------------

def test_minmax_midpoint():
    out = global_minmax_normalize(fmap([[2.0, 3.0, 4.0]])).values
    assert out.tolist() == [[0.0, 0.5, 1.0]]


def test_minmax_constant_map():
    assert np.all(global_minmax_normalize(fmap(np.full((3, 4), 7.0))).values == 0.5)


@given(arrays(float, (5, 6), elements=st.floats(-1e6, 1e6)))
def test_minmax_range(v):
    out = global_minmax_normalize(fmap(v)).values
    if v.max() > v.min():
        assert out.min() == 0.0 and out.max() == 1.0
    else:
        assert np.all(out == 0.5)


# --- frame entropy -----------------------------------------------------------

def test_constant_frame_entropy_zero():
    assert frame_entropy(np.full((1, 50), 0.3)).values[0] == 0.0


def test_one_value_per_bin_is_six_bits():
    v = (np.arange(64) + 0.5) / 64
    assert frame_entropy(v[None], EntropyConfig(n_bins=64)).values[0] == pytest.approx(6.0, abs=1e-12)


def test_right_edge_falls_in_last_bin():
    v = np.array([[1.0, 1.0, 31.5 / 32]])
    assert frame_entropy(v).values[0] == 0.0


def test_uniform_frames_monte_carlo():
    rng = np.random.default_rng(0)
    ent = frame_entropy(rng.random((10_000, 108)), EntropyConfig(32)).values
    assert abs(ent.mean() - 4.79) <= 0.05


@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 40)), elements=st.floats(0, 1)),
       st.integers(2, 40))
def test_matches_histogram_oracle(v, bins):
    got = frame_entropy(v, EntropyConfig(bins)).values
    for t in range(v.shape[0]):
        assert got[t] == pytest.approx(histogram_entropy(v[t], bins), abs=1e-12)
        assert 0 <= got[t] <= math.log2(min(bins, v.shape[1])) + 1e-12


@given(arrays(float, (3, 30), elements=st.floats(0, 1)), st.randoms(use_true_random=False))
def test_permutation_invariant(v, r):
    perm = list(range(v.shape[1]))
    r.shuffle(perm)
    np.testing.assert_array_equal(frame_entropy(v).values, frame_entropy(v[:, perm]).values)


@given(arrays(float, (4, 20), elements=st.floats(-10, 10)),
       st.floats(0.5, 8.0), st.floats(-5, 5))
def test_affine_rescaling_invariant(v, a, b):
    # power-of-two scale keeps the affine map exact in floating point
    a = 2.0 ** round(math.log2(a))
    b = round(b)
    np.testing.assert_array_equal(map_entropy(fmap(v)).values, map_entropy(fmap(a * v + b)).values)


def test_config_validation():
    with pytest.raises(ValueError):
        EntropyConfig(n_bins=1)


# --- noise baseline ----------------------------------------------------------

def test_noise_map_deterministic():
    np.testing.assert_array_equal(random_noise_map(10, 7, 3).values, random_noise_map(10, 7, 3).values)


def test_noise_map_range_and_mean():
    v = random_noise_map(1000, 1000, 0).values
    assert v.min() >= 0 and v.max() < 1
    assert abs(v.mean() - 0.5) <= 0.002


# --- report ------------------------------------------------------------------

def curve(values, label):
    return EntropyCurve(np.asarray(values, float), np.arange(len(values)) * 0.016, label)


def test_report_rows_and_identical_columns():
    text = entropy_report([curve([1.0, 2.0, 3.0], "a"), curve([1.0, 2.0, 3.0], "b")])
    lines = text.strip().split("\n")
    assert len(lines) == 4 and lines[0] == "time_s,a,b"
    for row in lines[1:]:
        cells = row.split(",")
        assert cells[1] == cells[2]


def test_mean_of_zero_curve():
    assert entropy_means([curve([0.0] * 5, "z")]) == {"z": 0.0}


def test_report_length_mismatch():
    with pytest.raises(ValueError):
        entropy_report([curve([1.0], "a"), curve([1.0, 2.0], "b")])


# --- utterance analysis ------------------------------------------------------

def test_harmonic_utterance_ordering():
    res = analyze_utterance(harmonic_test_utterance()).means()
    assert res["cqt_phase"] > res["cqt_magnitude_voiced"]
    assert res["noise"] - res["cqt_phase"] <= 0.15


def test_spoof_phase_entropy_near_noise():
    from phasefuse.featmap import FeatureCorpusSpec, synth_feature_corpus
    items = synth_feature_corpus(FeatureCorpusSpec(20, T=400, D=108, seed=1))
    spoof = [it for it in items if it.label == 0]
    e_phase = np.mean([map_entropy(it.phase).mean for it in spoof])
    e_noise = np.mean([map_entropy(random_noise_map(400, 108, i)).mean for i in range(20)])
    assert abs(e_phase - e_noise) <= 0.1


def test_analyze_unknown_feature():
    with pytest.raises(ValueError):
        analyze_utterance(harmonic_test_utterance(), "mfcc")
