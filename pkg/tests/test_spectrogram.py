import numpy as np
import pytest

from upcall.audio_ingest import AudioClip
from upcall.spectrogram import Scale, hann, read_pgm, render, stft_spectrogram

RATE = 2000


def dft_magnitude(frame):
    """O(N^2) DFT magnitude of one real frame, bins 0..N/2."""
    n = len(frame)
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    basis = np.exp(-2j * np.pi * k * t / n)
    return np.abs(basis @ frame)


def sine(freq, amp=1.0):
    t = np.arange(4000) / RATE
    return AudioClip(amp * np.sin(2 * np.pi * freq * t))


def test_default_shape_and_axes():
    s = stft_spectrogram(AudioClip(np.zeros(4000)))
    assert s.shape == (129, 30)
    assert s.bin_hz == 7.8125
    assert s.frame_s == 0.064
    assert np.all(s.values == 0)


def test_symmetric_hann():
    w = hann(256)
    assert w[0] == 0.0 and w[-1] == 0.0
    np.testing.assert_allclose(w, w[::-1], atol=1e-15)


def test_sine_peak_bin():
    s = stft_spectrogram(sine(200.0))
    assert np.all(np.argmax(s.values, axis=0) == 26)


def test_matches_brute_force_dft():
    x = np.random.default_rng(0).normal(size=4000)
    s = stft_spectrogram(AudioClip(x / 10))
    w = hann(256)
    for j in (0, 7, 29):
        frame = x[j * 128 : j * 128 + 256] / 10 * w
        expected = dft_magnitude(frame)
        np.testing.assert_allclose(s.values[:, j], expected, rtol=1e-9, atol=1e-12)


def test_power_scale():
    clip = sine(100.0, 0.3)
    mag = stft_spectrogram(clip).values
    pw = stft_spectrogram(clip, scale=Scale.POWER).values
    np.testing.assert_allclose(pw, mag**2)


def test_scaling_is_linear():
    x = np.random.default_rng(2).normal(size=4000) * 0.1
    a = stft_spectrogram(AudioClip(x)).values
    b = stft_spectrogram(AudioClip(x * 3.0)).values
    np.testing.assert_allclose(b, 3.0 * a, rtol=1e-12)


def test_impulse_shift_moves_one_frame():
    x = np.zeros(4000)
    x[1500] = 1.0
    y = np.roll(x, 128)
    a = stft_spectrogram(AudioClip(x)).values
    b = stft_spectrogram(AudioClip(y)).values
    np.testing.assert_allclose(b[:, 1:], a[:, :-1], atol=1e-12)


def test_short_input_rejected():
    with pytest.raises(ValueError, match="shorter"):
        stft_spectrogram(np.zeros(100))


def test_odd_window_rejected():
    with pytest.raises(ValueError):
        stft_spectrogram(np.zeros(4000), window_len=255)


def test_pgm_orientation(tmp_path):
    values = np.zeros((129, 30))
    values[0, :] = 1.0  # lowest frequency
    s = stft_spectrogram(AudioClip(np.zeros(4000))).with_values(values)
    render(s, tmp_path / "x.pgm")
    img = read_pgm(tmp_path / "x.pgm")
    assert img.shape == (129, 30)
    assert np.all(img[-1] == 255) and np.all(img[:-1] == 0)
