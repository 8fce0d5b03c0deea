import numpy as np
import pytest

from phasefuse.models import (A_MAGNITUDE_ONLY, BackendConfig, PhaseNetConfig, backend_preset,
                              build_backend, build_framework, build_phase_network,
                              framework_from_config, phase_config_for)
from phasefuse.nn import param_count


def test_phase_net_cqt_shape():
    net = build_phase_network(phase_config_for("cqt"))
    assert net(np.zeros((2, 1, 400, 108), np.float32)).shape == (2, 1, 400, 108)


def test_phase_net_lfcc_shape():
    net = build_phase_network(phase_config_for("lfcc"))
    x = np.random.default_rng(0).standard_normal((1, 1, 400, 513)).astype(np.float32)
    assert net.body(x).shape == (1, 1, 400, 257)
    assert net(x).shape == (1, 1, 400, 60)


@pytest.mark.parametrize("pairing", ["lps", "cqt", "lfcc"])
def test_phase_net_param_count(pairing):
    n = param_count(build_phase_network(phase_config_for(pairing)))
    assert n == 40 + 8 + 148 + 8 + 5 == 209
    assert 150 <= n <= 300


def test_phase_net_config_rules():
    assert (phase_config_for("lfcc").stride, phase_config_for("lfcc").use_adaptive_pool) == (2, True)
    for p in ("lps", "cqt"):
        assert (phase_config_for(p).stride, phase_config_for(p).use_adaptive_pool) == (1, False)
    with pytest.raises(ValueError):
        PhaseNetConfig(stride=3)
    with pytest.raises(ValueError):
        PhaseNetConfig(use_adaptive_pool=True)


def test_phase_net_target_too_large():
    net = build_phase_network(PhaseNetConfig(2, True, 100))
    with pytest.raises(ValueError):
        net(np.zeros((1, 1, 8, 60), np.float32))


def test_lite_forward_logits():
    model = build_framework("b", "cqt")
    assert model(np.zeros((2, 1, 400, 108), np.float32), np.zeros((2, 1, 400, 108), np.float32)).shape == (2, 2)


@pytest.mark.parametrize("pairing", ["lps", "cqt", "lfcc"])
def test_counting_identities(pairing):
    a, b, c = (build_framework(k, pairing) for k in "abc")
    phase = param_count(c.phase_net)
    stem = c.backend.stem
    extra_in = stem.weight.shape[0] * stem.weight.shape[2] * stem.weight.shape[3]
    assert param_count(c) - param_count(b) == phase
    assert param_count(c) - param_count(a) == phase + extra_in
    assert param_count(b.backend) == param_count(c.backend)


def test_input_channels():
    assert build_framework("a", "cqt").backend.cfg.in_channels == 1
    assert build_framework("b", "cqt").backend.cfg.in_channels == 2
    assert build_framework("c", "cqt").backend.cfg.in_channels == 2
    assert build_framework("a", "cqt").kind == A_MAGNITUDE_ONLY and build_framework("a", "cqt").phase_net is None


def test_lite_size():
    n = param_count(build_backend(backend_preset("lite", 2)))
    assert 2e4 <= n <= 1e5


def test_paper_scale_size():
    n = param_count(build_backend(backend_preset("paper_scale", 2)))
    assert 0.756e6 <= n <= 0.924e6


def test_lfcc_framework_b_pools_phase():
    model = build_framework("b", "lfcc")
    out = model(np.zeros((1, 1, 400, 60), np.float32), np.zeros((1, 1, 400, 513), np.float32))
    assert out.shape == (1, 2)


def test_mismatched_dims_rejected():
    with pytest.raises(ValueError):
        build_framework("b", "cqt")(np.zeros((1, 1, 400, 108), np.float32), np.zeros((1, 1, 400, 60), np.float32))
    with pytest.raises(ValueError):
        build_framework("c", "cqt")(np.zeros((1, 1, 400, 108), np.float32))


def test_backend_config_validation():
    with pytest.raises(ValueError):
        BackendConfig(in_channels=3)
    with pytest.raises(ValueError):
        BackendConfig(stage_widths=[6, 16, 32])


def test_config_roundtrip_rebuilds_same_model():
    m = build_framework("c", "lfcc", seed=4)
    clone = framework_from_config(m.config())
    clone.load_state_dict(m.state_dict())
    rng = np.random.default_rng(0)
    mag = rng.standard_normal((1, 1, 400, 60)).astype(np.float32)
    ph = rng.uniform(-3, 3, (1, 1, 400, 513)).astype(np.float32)
    m.eval(), clone.eval()
    np.testing.assert_array_equal(m(mag, ph), clone(mag, ph))


def test_same_seed_same_weights():
    a, b = build_framework("c", "cqt", seed=9), build_framework("c", "cqt", seed=9)
    for (k, v), (_, w) in zip(a.state_dict().items(), b.state_dict().items()):
        np.testing.assert_array_equal(v, w, err_msg=k)
