import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from phasefuse import dsp
from phasefuse.dataset_io import Waveform, WavError
from phasefuse.dsp import (CqtConfig, ComplexSpectrogram, FeatureMap, LfccConfig, StftConfig, cqt,
                           delta, extract_pair, lfcc, log_power, phase, read_feature_cache, stft,
                           write_feature_cache)

from oracles import dft_bin, regression_delta, windowed_correlation

SR = 16000


def tone(freq, n=SR, amp=1.0):
    return Waveform(amp * np.cos(2 * np.pi * freq * np.arange(n) / SR), SR, "tone")


def spec_of(values, kind="dft"):
    values = np.atleast_2d(np.asarray(values, dtype=complex))
    return ComplexSpectrogram(values, np.zeros(values.shape[0]), kind)


# --- stft --------------------------------------------------------------------

def test_stft_shape_one_second():
    s = stft(Waveform(np.zeros(SR), SR))
    assert s.values.shape == (30, 513)
    assert np.all(s.values == 0)


def test_stft_1khz_peaks_at_bin_64():
    mag = np.abs(stft(tone(1000.0)).values)
    assert np.all(mag.argmax(axis=1) == 64)


def test_stft_matches_direct_dft(rng):
    x = rng.standard_normal(3000)
    s = stft(Waveform(x, SR))
    w = np.hanning(1025)[:-1]  # periodic Hann
    frame = x[512:512 + 1024] * w
    for k in (0, 1, 64, 300, 512):
        assert abs(s.values[1, k] - dft_bin(frame, k, 1024)) < 1e-9


def test_stft_frame_times_and_count():
    s = stft(Waveform(np.zeros(5000), SR))
    assert s.values.shape[0] == (5000 - 1024) // 512 + 1
    assert s.frame_times[1] - s.frame_times[0] == pytest.approx(512 / SR)


def test_stft_too_short():
    with pytest.raises(ValueError, match="shorter"):
        stft(Waveform(np.zeros(1000), SR))


def test_stft_rejects_other_rates():
    with pytest.raises(WavError):
        stft(Waveform(np.zeros(4000), 8000))


@given(st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3), st.integers(0, 2 ** 31))
def test_stft_linear(a, seed):
    x = np.random.default_rng(seed).standard_normal(2048)
    base = stft(Waveform(x, SR)).values
    scaled = stft(Waveform(a * x, SR)).values
    assert np.max(np.abs(scaled - a * base)) <= 1e-10 * np.max(np.abs(a * base))


def test_real_input_dc_phase_is_zero_or_pi(rng):
    ph = phase(stft(Waveform(rng.standard_normal(4096), SR))).values[:, 0]
    assert np.all((ph == 0) | (ph == np.pi))


def test_stft_config_validation():
    with pytest.raises(ValueError):
        StftConfig(window_ms=128.0)  # 2048-sample window > n_fft
    assert StftConfig().win_length == 1024 and StftConfig().hop_length == 512


# --- cqt ---------------------------------------------------------------------

def test_cqt_dimension_and_hop():
    s = cqt(tone(250.0, 2 * SR))
    assert s.values.shape[1] == 108
    assert s.frame_times[1] - s.frame_times[0] == pytest.approx(256 / SR)


def test_cqt_250hz_peaks_at_bin_48():
    cfg = CqtConfig()
    assert cfg.center_frequencies()[48] == pytest.approx(250.0)
    mag = np.abs(cqt(tone(250.0, 2 * SR)).values)
    assert np.all(mag.argmax(axis=1) == 48)


def test_cqt_zero_in_zero_out():
    assert np.all(cqt(Waveform(np.zeros(2 * SR), SR)).values == 0)


def test_cqt_geometric_spacing():
    f = CqtConfig().center_frequencies()
    np.testing.assert_allclose(f[1:] / f[:-1], 2 ** (1 / 12), rtol=1e-14)
    assert f[0] == 15.625 and f[-1] * 2 ** (1 / 12) == pytest.approx(8000.0)


def test_cqt_matches_windowed_correlation(rng):
    cfg = CqtConfig()
    x = rng.standard_normal(2 * SR)
    s = cqt(Waveform(x, SR), cfg)
    lengths = cfg.kernel_lengths()
    centre0 = (lengths.max() - 1) / 2
    for t in (0, 3):
        for k in (0, 30, 48, 107):
            want = windowed_correlation(x, centre0 + t * 256, cfg.center_frequencies()[k], lengths[k])
            assert abs(s.values[t, k] - want) < 1e-9 * max(1.0, abs(want))


def test_cqt_too_short():
    with pytest.raises(ValueError, match="shorter"):
        cqt(Waveform(np.zeros(1000), SR))


def test_cqt_config_invariants():
    with pytest.raises(ValueError):
        CqtConfig(n_octaves=8)
    with pytest.raises(ValueError):
        CqtConfig(f_min=20.0)


# --- log power / phase -------------------------------------------------------

@pytest.mark.parametrize("z, want", [(1.0, 0.0), (0.0, -100.0), (10.0, 20.0), (1j, 0.0)])
def test_log_power_examples(z, want):
    assert log_power(spec_of([z])).values[0, 0] == pytest.approx(want, abs=1e-12)


@given(arrays(complex, (3, 4), elements=st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3)))
def test_log_power_scale_by_ten_adds_20db(z):
    base = log_power(spec_of(z)).values
    np.testing.assert_allclose(log_power(spec_of(10 * z)).values - base, 20.0, atol=1e-9)


@pytest.mark.parametrize("z, want", [(1j, np.pi / 2), (0.0, 0.0), (-1.0, np.pi), (-1 - 0j, np.pi)])
def test_phase_examples(z, want):
    assert phase(spec_of([z])).values[0, 0] == pytest.approx(want, abs=1e-15)


@given(arrays(complex, (4, 5), elements=st.complex_numbers(max_magnitude=1e6, allow_nan=False)))
def test_phase_range(z):
    ph = phase(spec_of(z)).values
    assert np.all(ph > -np.pi) and np.all(ph <= np.pi)


def test_feature_map_rejects_bad_phase():
    with pytest.raises(ValueError):
        FeatureMap(np.full((2, 2), -np.pi), dsp.PHASE, "dft")
    with pytest.raises(ValueError):
        FeatureMap(np.full((2, 2), np.nan), dsp.MAGNITUDE, "dft")


# --- delta / lfcc ------------------------------------------------------------

def test_delta_constant_is_zero():
    assert np.all(delta(np.full((10, 3), 4.2)) == 0)


def test_delta_linear_interior_is_one():
    d = delta(np.arange(20, dtype=float)[:, None])
    np.testing.assert_allclose(d[2:-2, 0], 1.0)


def test_delta_single_frame():
    assert np.all(delta(np.ones((1, 5))) == 0)


@given(arrays(float, st.tuples(st.integers(1, 12), st.integers(1, 3)), elements=st.floats(-100, 100)),
       st.sampled_from([3, 5, 7]))
def test_delta_matches_formula(values, width):
    got = delta(values, width)
    for j in range(values.shape[1]):
        np.testing.assert_allclose(got[:, j], regression_delta(list(values[:, j]), (width - 1) // 2), atol=1e-9)


def test_delta_width_validation():
    with pytest.raises(ValueError):
        delta(np.ones((3, 3)), 4)


def test_lfcc_dimension():
    f = lfcc(tone(440.0))
    assert f.D == 60 == LfccConfig().dim and f.channel_kind == dsp.CEPSTRAL
    assert f.T == (SR - 320) // 160 + 1


def test_lfcc_silence_constant_cepstra_zero_deltas():
    f = lfcc(Waveform(np.zeros(SR), SR)).values
    assert np.all(f[:, 20:] == 0)
    assert np.all(f[:, :20] == f[0, :20])


def test_lfcc_white_noise_c0_dominates():
    rng = np.random.default_rng(0)
    means = np.zeros(20)
    for _ in range(100):
        means += np.abs(lfcc(Waveform(rng.uniform(-0.5, 0.5, 3200), SR)).values[:, :20]).mean(axis=0)
    assert np.argmax(means) == 0
    assert means[0] > np.max(means[1:])


def test_lfcc_filterbank_covers_band():
    fb = dsp.linear_filterbank(20, 512)
    assert fb.shape == (20, 257)
    assert np.all(fb.max(axis=1) > 0.5)


# --- pairings and cache ------------------------------------------------------

@pytest.mark.parametrize("pairing, dims", [("lps", (513, 513)), ("cqt", (108, 108)), ("lfcc", (60, 513))])
def test_extract_pair_dims(pairing, dims):
    mag, ph = extract_pair(tone(300.0, 2 * SR), pairing)
    assert (mag.D, ph.D) == dims and mag.T == ph.T
    assert ph.channel_kind == dsp.PHASE


def test_extract_without_phase():
    mag, ph = extract_pair(tone(300.0, 2 * SR), "cqt", with_phase=False)
    assert ph is None and mag.D == 108


def test_extract_unknown_pairing():
    with pytest.raises(ValueError):
        extract_pair(tone(300.0), "mfcc")


def test_feature_cache_layout_and_roundtrip(tmp_path, rng):
    vals = rng.uniform(-np.pi, np.pi, (7, 5))
    vals[0, 0] = np.pi
    write_feature_cache(tmp_path / "x.pffc", FeatureMap(vals, dsp.PHASE, "cqt"), "utt1")
    raw = (tmp_path / "x.pffc").read_bytes()
    assert raw[:4] == b"PFFC"
    version, hlen = struct.unpack_from("<HI", raw, 4)
    assert version == 1 and len(raw) == 10 + hlen + 7 * 5 * 4
    utt, fm = read_feature_cache(tmp_path / "x.pffc")
    assert utt == "utt1" and fm.channel_kind == dsp.PHASE and fm.source == "cqt"
    np.testing.assert_array_equal(fm.values, vals.astype(np.float32).clip(max=np.float32(np.pi)))


def test_feature_cache_bad_magic(tmp_path):
    (tmp_path / "bad").write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(ValueError):
        read_feature_cache(tmp_path / "bad")
