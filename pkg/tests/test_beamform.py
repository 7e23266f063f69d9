import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from privsum.beamform import (SNR_CAP_DB, Beamformer, SceneError, SingularCovariance, beam_weights,
                              estimate_covariance, free_field_gain, hann, input_snr_db, istft, make_scene,
                              node_payload, output_snr, overlap_add, simulate_observations, stft,
                              transfer_vector, weighted_observation)

FS, V = 8000, 343.0


def random_pd(rng, k, bins=3):
    a = rng.standard_normal((bins, k, k)) + 1j * rng.standard_normal((bins, k, k))
    return a @ np.conj(np.transpose(a, (0, 2, 1))) + 0.1 * np.eye(k)


# --- framing ---


def test_hann_partition_of_unity():
    w = hann(224)
    assert np.allclose(w[:112] + w[112:], 1.0, atol=1e-12)


def test_stft_of_zeros():
    X = stft(np.zeros(1000), 224)
    assert X.shape[-1] == 113 and np.all(X == 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(224, 3000), st.sampled_from([64, 224, 256]), st.integers(0, 10_000))
def test_stft_roundtrip(length, frame_len, seed):
    x = np.random.default_rng(seed).standard_normal((2, length))
    assert np.max(np.abs(istft(stft(x, frame_len), frame_len, length=length) - x)) < 1e-10


def test_stft_tone_lands_in_its_bin():
    n = np.arange(4000)
    x = np.cos(2 * np.pi * 20 * FS / 224 * n / FS)
    X = stft(x, 224)
    interior = np.abs(X[3:-3])
    assert np.all(interior.argmax(axis=-1) == 20)


def test_stft_short_signal():
    with pytest.raises(ValueError):
        stft(np.zeros(10), 224, center=False)
    with pytest.raises(ValueError):
        stft(np.zeros(100), 223)


def test_overlap_add_example():
    frames = np.ones((3, 4))
    assert np.array_equal(overlap_add(frames, 2, center=False), [1, 1, 2, 2, 2, 2, 1, 1])


# --- covariance and weights ---


def test_covariance_single_node():
    X = np.array([[[1 + 1j], [1 - 1j], [2.0]]])  # one node, three frames, one bin
    R = estimate_covariance(X, loading=0.0)
    assert R.shape == (1, 1, 1)
    assert np.isclose(R[0, 0, 0], (2 + 2 + 4) / 3)


def test_covariance_loading_and_dsb(rng):
    X = rng.standard_normal((4, 50, 5)) + 1j * rng.standard_normal((4, 50, 5))
    R0 = estimate_covariance(X, loading=0.0)
    R = estimate_covariance(X, loading=1e-3)
    eps = 1e-3 * np.trace(R0, axis1=1, axis2=2).real / 4
    assert np.allclose(R - R0, eps[:, None, None] * np.eye(4))
    assert np.allclose(R0, np.conj(np.transpose(R0, (0, 2, 1))))
    D = estimate_covariance(X, "dsb", loading=0.0)
    assert np.allclose(D, R0 * np.eye(4))
    with pytest.raises(ValueError):
        estimate_covariance(X[:, :1], min_frames=2)
    with pytest.raises(ValueError):
        estimate_covariance(X, "gsc")


def test_identity_covariance_gives_matched_filter(rng):
    d = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    w = beam_weights(np.broadcast_to(np.eye(5), (3, 5, 5)), d)
    norms = np.einsum("bk,bk->b", np.conj(d), d)
    assert np.allclose(w, d / norms[:, None])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_distortionless_and_scale_invariant(k, seed, scale):
    rng = np.random.default_rng(seed)
    R = random_pd(rng, k)
    d = rng.standard_normal((3, k)) + 1j * rng.standard_normal((3, k))
    w = beam_weights(R, d)
    assert np.allclose(np.einsum("bk,bk->b", np.conj(w), d), 1.0, atol=1e-8)
    assert np.allclose(beam_weights(scale * R, d), w, atol=1e-8)


def test_mvdr_minimises_output_power(rng):
    R = random_pd(rng, 4, bins=1)
    d = rng.standard_normal((1, 4)) + 1j * rng.standard_normal((1, 4))
    w = beam_weights(R, d)[0]
    best = np.real(np.conj(w) @ R[0] @ w)
    for _ in range(200):
        v = w + 0.1 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        v = v / np.conj(np.conj(v) @ d[0])  # keep v^H d = 1
        assert np.real(np.conj(v) @ R[0] @ v) >= best - 1e-12


def test_singular_covariance():
    R = np.zeros((1, 3, 3))
    R[0, 0, 0] = 1.0
    with pytest.raises(SingularCovariance):
        beam_weights(R, np.ones((1, 3)))
    # loading rescues a rank-one estimate
    X = np.ones((3, 10, 1), dtype=complex)
    w = beam_weights(estimate_covariance(X, loading=1e-6), np.ones((1, 3)))
    assert np.allclose(w.sum(), 1.0)


def test_weighted_observation():
    assert np.allclose(weighted_observation([1j, 2], [1j, 3 + 1j]), [-1, 6])
    rng = np.random.default_rng(1)
    w = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    X = rng.standard_normal((6, 9)) + 1j * rng.standard_normal((6, 9))
    dense = np.real(w @ X)
    assert np.allclose(weighted_observation(w[:, None], X).sum(axis=0), dense)


def test_node_payload_sums_to_beamformer_output(rng):
    k, t, L = 5, 7, 32
    X = rng.standard_normal((k, t, L // 2 + 1)) + 1j * rng.standard_normal((k, t, L // 2 + 1))
    X[..., 0] = X[..., 0].real
    X[..., -1] = X[..., -1].real
    w = rng.standard_normal((L // 2 + 1, k)) + 1j * rng.standard_normal((L // 2 + 1, k))
    direct = np.fft.irfft(np.einsum("bk,ktb->tb", np.conj(w), X), L, axis=-1)
    assert np.allclose(node_payload(w, X, L).sum(axis=0), direct, atol=1e-12)


def test_pipeline_linearity(rng):
    pos = rng.uniform(-10, 10, (6, 2)) + 0.5
    d = transfer_vector(pos, (0, 0), 224, FS, V)
    x1, x2 = rng.standard_normal((2, 6, 3000))
    bf = Beamformer("mvdr").fit(stft(x1 + x2), d)
    a, b = 0.7, -2.3
    lhs = bf.transform(stft(a * x1 + b * x2))
    rhs = a * bf.transform(stft(x1)) + b * bf.transform(stft(x2))
    assert np.max(np.abs(lhs - rhs)) < 1e-10


# --- SNR ---


def test_output_snr():
    clean = np.ones(10)
    assert output_snr(clean, clean) == SNR_CAP_DB
    assert output_snr(np.zeros(10) + 1, np.zeros(10) + 1) == SNR_CAP_DB
    assert np.isclose(output_snr(2 * clean, clean), 0.0)
    assert np.isclose(output_snr(1.1 * clean, clean), 20.0)
    assert output_snr(clean, np.zeros(10)) == -SNR_CAP_DB
    with pytest.raises(ValueError):
        output_snr(np.zeros(10), np.zeros(10))
    with pytest.raises(ValueError):
        output_snr(np.zeros(3), np.zeros(4))


# --- scene ---


def test_free_field_gain():
    g = free_field_gain([1.0, 2.0, 4.0], [0.0, 100.0], V)
    assert g.shape == (2, 3)
    assert np.allclose(np.abs(g[:, 0]) / np.abs(g[:, 1]), 2.0)
    assert np.allclose(np.abs(g[:, 1]) / np.abs(g[:, 2]), 2.0)
    assert np.allclose(g[0], [1.0, 0.5, 0.25])
    assert np.isclose(np.angle(g[1, 0]), np.angle(np.exp(-2j * np.pi * 100 / V)))


def test_pure_delay_without_noise():
    scene = make_scene(0.5, seed=3, noise_var=0.0, interferer=False)
    delay = 40
    r = V / FS * delay
    sig = simulate_observations(scene, [[r, 0.0]], 0.5, seed=0)
    n = sig.total.shape[1]
    expected = scene.source_signal[scene.lead - delay:scene.lead - delay + n] / r
    assert np.max(np.abs(sig.total[0] - expected)) < 1e-10
    assert np.all(sig.interferer == 0) and np.all(sig.noise == 0)


def test_per_node_snr_matches_closed_form():
    scene = make_scene(2.0, seed=5, interferer=False, noise_var=0.01)
    pos = np.array([[3.0, 4.0], [10.0, 0.0], [0.0, -20.0]])
    sig = simulate_observations(scene, pos, 2.0, seed=1)
    for i in range(3):
        measured = 10 * np.log10(np.mean(sig.source[i] ** 2) / np.mean(sig.noise[i] ** 2))
        assert abs(measured - input_snr_db(scene, pos[i], 1.0)) < 0.5
    assert np.isclose(input_snr_db(scene, pos[0], 1.0), 10 * np.log10(1 / 25 / 0.01))


def test_scene_errors():
    scene = make_scene(0.2, seed=0)
    with pytest.raises(SceneError):
        simulate_observations(scene, [[0.0, 0.0]], 0.2)
    with pytest.raises(SceneError):
        simulate_observations(scene, [[5.0, 5.0]], 5.0)
    with pytest.raises(SceneError):
        transfer_vector([[0.0, 0.0]], (0.0, 0.0), 224, FS, V)


def test_make_scene_geometry():
    for s in range(20):
        scene = make_scene(0.1, arena_radius=25.0, seed=s)
        assert np.isclose(np.hypot(*scene.interferer_pos), 12.5)
        assert np.isclose(np.var(scene.source_signal), 1.0)


# --- end to end without the network ---


def dsb_snr(k, seed):
    rng = np.random.default_rng(seed)
    scene = make_scene(0.5, seed=rng.integers(1 << 30), interferer=False)
    rad = 25 * np.sqrt(rng.random(k))
    th = 2 * np.pi * rng.random(k)
    pos = np.column_stack([rad * np.cos(th), rad * np.sin(th)])
    sig = simulate_observations(scene, pos, 0.5, seed=rng.integers(1 << 30))
    Xs, Xr = stft(sig.source), stft(sig.noise)
    bf = Beamformer("dsb").fit(Xs + Xr, transfer_vector(pos, scene.source_pos, 224, FS, V))
    n = sig.source.shape[1]
    clean = overlap_add(bf.predict(Xs), 112, n)
    return output_snr(clean + overlap_add(bf.predict(Xr), 112, n), clean)


def test_dsb_improves_with_more_nodes():
    counts = [1, 2, 4, 8, 16, 32]
    means = [np.mean([dsb_snr(k, 1000 * k + t) for t in range(50)]) for k in counts]
    assert all(b > a for a, b in zip(means, means[1:])), means


def test_beamformer_estimator_api():
    bf = Beamformer(flavor="dsb", loading=1e-4)
    assert bf.get_params() == {"flavor": "dsb", "frame_len": 224, "loading": 1e-4, "min_frames": 2}
    assert clone(bf).get_params() == bf.get_params()
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        bf.transform(np.zeros((1, 3, 113)))
