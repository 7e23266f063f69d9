"""Free-field acoustic scene simulation and DSB / MVDR beamforming.

Node signals are a delayed, 1/r-attenuated talker plus an interfering talker
plus independent white noise.  Processing is frame based: a periodic Hann
window with 50% overlap, so analysis frames overlap-add back to the signal
without a synthesis window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window, lfilter
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

SNR_CAP_DB = 300.0


class SceneError(ValueError):
    pass


class SingularCovariance(np.linalg.LinAlgError):
    pass


def colored_noise(length: int, rng, pole: float = 0.9) -> np.ndarray:
    """Unit-variance AR(1) noise, a crude stand-in for a talker's low-pass spectrum."""
    white = rng.standard_normal(length)
    x = lfilter([1.0], [1.0, -pole], white)
    return x / np.std(x)


@dataclass(frozen=True)
class AcousticScene:
    source_pos: tuple
    interferer_pos: tuple | None
    source_signal: np.ndarray
    interferer_signal: np.ndarray | None
    noise_var: float = 0.01
    sample_rate: int = 8000
    speed_of_sound: float = 343.0
    lead: int = 0  # samples of signal history before t = 0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise SceneError("sample_rate must be positive")
        if self.interferer_pos is not None and np.allclose(self.source_pos, self.interferer_pos):
            raise SceneError("interferer must not coincide with the source")


def make_scene(duration: float, arena_radius: float = 25.0, seed=None, noise_var: float = 0.01,
               source_power: float = 1.0, interferer_power: float = 0.5, interferer: bool = True,
               sample_rate: int = 8000, speed_of_sound: float = 343.0) -> AcousticScene:
    """Talker at the arena centre; interferer uniform on the half-radius ring."""
    rng = np.random.default_rng(seed)
    # the farthest node-to-talker path is below 1.5 arena radii
    lead = int(math.ceil(1.5 * arena_radius / speed_of_sound * sample_rate)) + 64
    length = int(round(duration * sample_rate)) + lead
    src = math.sqrt(source_power) * colored_noise(length, rng)
    angle = 2 * math.pi * rng.random()
    if interferer:
        ipos = (0.5 * arena_radius * math.cos(angle), 0.5 * arena_radius * math.sin(angle))
        isig = math.sqrt(interferer_power) * colored_noise(length, rng, pole=0.7)
    else:
        ipos, isig = None, None
    return AcousticScene(source_pos=(0.0, 0.0), interferer_pos=ipos, source_signal=src,
                         interferer_signal=isig, noise_var=noise_var, sample_rate=sample_rate,
                         speed_of_sound=speed_of_sound, lead=lead)


def _distances(positions, point) -> np.ndarray:
    r = np.linalg.norm(np.asarray(positions, dtype=float).reshape(-1, 2) - np.asarray(point, dtype=float), axis=1)
    if np.any(r < 1e-9):
        raise SceneError("a node coincides with a source position")
    return r


def free_field_gain(r, freqs, speed_of_sound: float) -> np.ndarray:
    """``(1/r) exp(-j 2 pi f r / v)``, shape ``(len(freqs), len(r))``."""
    r = np.asarray(r, dtype=float)
    f = np.asarray(freqs, dtype=float)[:, None]
    return np.exp(-2j * np.pi * f * r[None, :] / speed_of_sound) / r[None, :]


def transfer_vector(positions, source_pos, frame_len: int, sample_rate: int, speed_of_sound: float) -> np.ndarray:
    freqs = np.fft.rfftfreq(frame_len, 1.0 / sample_rate)
    return free_field_gain(_distances(positions, source_pos), freqs, speed_of_sound)


def _propagate(signal: np.ndarray, r: np.ndarray, scene: AcousticScene, length: int) -> np.ndarray:
    lead = scene.lead
    max_delay = r.max() / scene.speed_of_sound * scene.sample_rate
    if max_delay > lead:
        raise SceneError("node lies beyond the simulated propagation range")
    nfft = 1 << int(math.ceil(math.log2(len(signal) + 1)))
    spec = np.fft.rfft(signal, nfft)
    freqs = np.fft.rfftfreq(nfft, 1.0 / scene.sample_rate)
    out = np.fft.irfft(spec[None, :] * free_field_gain(r, freqs, scene.speed_of_sound).T, nfft, axis=1)
    return out[:, lead:lead + length]


@dataclass
class NodeSignals:
    source: np.ndarray
    interferer: np.ndarray
    noise: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.source + self.interferer + self.noise


def simulate_observations(scene: AcousticScene, positions, duration: float, seed=None) -> NodeSignals:
    """Per-node signal components, each shaped ``(nodes, samples)``."""
    length = int(round(duration * scene.sample_rate))
    if length > len(scene.source_signal) - scene.lead:
        raise SceneError("duration exceeds the scene's signal length")
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    src = _propagate(scene.source_signal, _distances(positions, scene.source_pos), scene, length)
    if scene.interferer_pos is not None:
        itf = _propagate(scene.interferer_signal, _distances(positions, scene.interferer_pos), scene, length)
    else:
        itf = np.zeros_like(src)
    rng = np.random.default_rng(seed)
    noise = math.sqrt(scene.noise_var) * rng.standard_normal(src.shape)
    return NodeSignals(src, itf, noise)


def input_snr_db(scene: AcousticScene, position, source_power: float, interferer_power: float = 0.0) -> float:
    """Closed-form per-node SNR from 1/r^2 power decay and the noise variance."""
    rs = _distances([position], scene.source_pos)[0]
    noise = scene.noise_var
    if scene.interferer_pos is not None:
        noise += interferer_power / _distances([position], scene.interferer_pos)[0] ** 2
    return 10 * math.log10(source_power / rs**2 / noise)


# --- framing -------------------------------------------------------------------


def hann(frame_len: int) -> np.ndarray:
    """Periodic Hann; at hop ``frame_len/2`` shifted copies sum to exactly one."""
    return get_window("hann", frame_len, fftbins=True)


def stft(signal, frame_len: int = 224, hop: int | None = None, center: bool = True) -> np.ndarray:
    """Hann-windowed STFT over the last axis -> ``(..., frames, frame_len//2 + 1)``.

    With ``center`` the signal is zero-padded by one hop on each side so that
    every original sample is covered by two frames.
    """
    if frame_len % 2:
        raise ValueError("frame_len must be even")
    hop = frame_len // 2 if hop is None else hop
    x = np.asarray(signal, dtype=float)
    if center:
        pad = [(0, 0)] * (x.ndim - 1) + [(hop, hop + (-x.shape[-1]) % hop)]
        x = np.pad(x, pad)
    if x.shape[-1] < frame_len:
        raise ValueError("signal is shorter than one frame")
    n_frames = 1 + (x.shape[-1] - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(x[..., idx] * hann(frame_len), axis=-1)


def overlap_add(frames, hop: int, length: int | None = None, center: bool = True) -> np.ndarray:
    """Overlap-add real time-domain frames ``(..., n_frames, frame_len)``."""
    frames = np.asarray(frames, dtype=float)
    n_frames, frame_len = frames.shape[-2:]
    out = np.zeros(frames.shape[:-2] + (hop * (n_frames - 1) + frame_len,))
    for t in range(n_frames):
        out[..., t * hop:t * hop + frame_len] += frames[..., t, :]
    if center:
        out = out[..., hop:]
    if length is not None:
        out = out[..., :length]
    return out


def istft(spec, frame_len: int = 224, hop: int | None = None, length: int | None = None, center: bool = True) -> np.ndarray:
    hop = frame_len // 2 if hop is None else hop
    return overlap_add(np.fft.irfft(spec, frame_len, axis=-1), hop, length, center)


# --- beamformer ----------------------------------------------------------------


def estimate_covariance(frames, flavor: str = "mvdr", min_frames: int = 2, loading: float = 1e-6) -> np.ndarray:
    """Per-bin sample covariance from ``frames`` shaped ``(nodes, n_frames, bins)``.

    Returns ``(bins, nodes, nodes)``.  Diagonal loading of
    ``loading * trace(R) / nodes`` is added; the ``dsb`` flavor keeps only the
    diagonal.
    """
    X = np.asarray(frames)
    if X.ndim != 3:
        raise ValueError("frames must be (nodes, n_frames, bins)")
    k, t, _ = X.shape
    if t < min_frames:
        raise ValueError(f"need at least {min_frames} frames, got {t}")
    Xb = np.transpose(X, (2, 0, 1))
    R = Xb @ np.conj(np.transpose(Xb, (0, 2, 1))) / t
    if flavor == "dsb":
        R = R * np.eye(k)[None]
    elif flavor != "mvdr":
        raise ValueError(f"unknown flavor {flavor!r}")
    eps = loading * np.real(np.trace(R, axis1=1, axis2=2)) / k
    return R + eps[:, None, None] * np.eye(k)[None]


def beam_weights(R, d) -> np.ndarray:
    """``w = R^-1 d / (d^H R^-1 d)`` per bin; ``R`` is ``(bins, k, k)``, ``d`` is ``(bins, k)``."""
    R = np.asarray(R)
    d = np.asarray(d)
    if not np.all(np.any(d != 0, axis=-1)):
        raise ValueError("transfer vector is zero")
    cond = np.linalg.cond(R)
    if not np.all(np.isfinite(cond)) or np.any(cond > 1e13):
        raise SingularCovariance("covariance is singular after regularization")
    rinv_d = np.linalg.solve(R, d[..., None])[..., 0]
    denom = np.einsum("bk,bk->b", np.conj(d), rinv_d)
    return rinv_d / denom[:, None]


def weighted_observation(coef, x) -> np.ndarray:
    """``real(coef * x)`` componentwise."""
    return np.real(np.asarray(coef) * np.asarray(x))


def node_payload(weights, frames, frame_len: int) -> np.ndarray:
    """Each node's share of the beamformer output, as real time-domain frames.

    ``weights`` is ``(bins, k)``, ``frames`` is ``(k, n_frames, bins)``; returns
    ``(k, n_frames, frame_len)``.  The per-bin coefficient is ``conj(w)`` so
    the network sum is ``w^H x`` and a distortionless ``w`` passes the talker.
    """
    coef = np.conj(np.asarray(weights)).T[:, None, :]
    return np.fft.irfft(coef * np.asarray(frames), frame_len, axis=-1)


def output_snr(enhanced, clean) -> float:
    """``10 log10(|clean|^2 / |enhanced - clean|^2)``, clipped to +/- ``SNR_CAP_DB``."""
    enhanced = np.asarray(enhanced, dtype=float)
    clean = np.asarray(clean, dtype=float)
    if enhanced.shape != clean.shape:
        raise ValueError("enhanced and clean streams must be aligned")
    if clean.size == 0:
        raise ValueError("empty signal")
    sig = float(np.sum(clean**2))
    res = float(np.sum((enhanced - clean) ** 2))
    if sig == 0.0 and res == 0.0:
        raise ValueError("zero-power reference")
    if res == 0.0:
        return SNR_CAP_DB
    if sig == 0.0:
        return -SNR_CAP_DB
    return float(np.clip(10 * math.log10(sig / res), -SNR_CAP_DB, SNR_CAP_DB))


class Beamformer(BaseEstimator):
    """Covariance-based DSB / MVDR beamformer.

    ``fit(X, d)`` estimates per-bin weights from STFT frames ``X`` of shape
    ``(nodes, n_frames, bins)`` and a transfer vector ``d`` of shape
    ``(bins, nodes)``.  ``transform`` returns per-node payload frames and
    ``predict`` the beamformed time-domain frames.
    """

    def __init__(self, flavor="mvdr", frame_len=224, loading=1e-6, min_frames=2):
        self.flavor = flavor
        self.frame_len = frame_len
        self.loading = loading
        self.min_frames = min_frames

    def fit(self, X, d):
        R = estimate_covariance(X, self.flavor, self.min_frames, self.loading)
        self.covariance_ = R
        self.weights_ = beam_weights(R, d)
        self.distortion_ = np.abs(np.einsum("bk,bk->b", np.conj(self.weights_), d) - 1.0)
        return self

    def transform(self, X):
        check_is_fitted(self, "weights_")
        return node_payload(self.weights_, X, self.frame_len)

    def predict(self, X):
        return self.transform(X).sum(axis=0)
