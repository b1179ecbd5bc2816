import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.io import wavfile

from hpcprosody import signal, synth
from hpcprosody.errors import PitchError, UnvoicedUtteranceError, WavFormatError

SR = 22050


def _wav_bytes(data, rate=SR):
    buf = io.BytesIO()
    wavfile.write(buf, rate, data)
    return buf.getvalue()


def _write(tmp_path, data, rate=SR, name="x.wav"):
    path = tmp_path / name
    path.write_bytes(_wav_bytes(data, rate))
    return path


def _sine(f0, seconds=1.0, sr=SR, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return signal.Waveform(amp * np.sin(2 * np.pi * f0 * t), sr)


# -- load_wav -----------------------------------------------------------------

def test_load_silence(tmp_path):
    w = signal.load_wav(_write(tmp_path, np.zeros(SR, dtype=np.int16)))
    assert w.sample_rate == SR and len(w) == SR and not np.any(w.samples)


def test_pcm_scaling(tmp_path):
    w = signal.load_wav(_write(tmp_path, np.array([32767, -32768, 0, 16384], dtype=np.int16)))
    assert w.samples[0] == 32767 / 32768
    assert w.samples[1] == -1.0
    assert w.samples[3] == 0.5


def test_float_wav(tmp_path):
    data = np.array([0.25, -0.5, 1.0], dtype=np.float32)
    w = signal.load_wav(_write(tmp_path, data, 16000))
    assert np.array_equal(w.samples, data.astype(float)) and w.sample_rate == 16000


def test_stereo_rejected(tmp_path):
    with pytest.raises(WavFormatError, match="unsupported channel count"):
        signal.load_wav(_write(tmp_path, np.zeros((100, 2), dtype=np.int16)))


def test_unsupported_codec(tmp_path):
    with pytest.raises(WavFormatError, match="unsupported codec"):
        signal.load_wav(_write(tmp_path, np.zeros(100, dtype=np.uint8)))


def test_malformed_header(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"RIFX" + b"\0" * 40)
    with pytest.raises(WavFormatError, match="malformed"):
        signal.load_wav(path)


def test_write_then_load(tmp_path):
    w = _sine(200, 0.1)
    signal.write_wav(tmp_path / "a.wav", w)
    back = signal.load_wav(tmp_path / "a.wav")
    assert np.max(np.abs(back.samples - w.samples)) <= 1 / 32768


@pytest.mark.parametrize("kwargs, message", [
    (dict(samples=np.zeros((2, 2)), sample_rate=SR), "mono"),
    (dict(samples=np.zeros(10), sample_rate=4000), "sample rate"),
    (dict(samples=np.array([0.0, np.nan]), sample_rate=SR), "non-finite"),
])
def test_waveform_invariants(kwargs, message):
    with pytest.raises(WavFormatError, match=message):
        signal.Waveform(**kwargs)


# -- track_pitch ---------------------------------------------------------------

def _autocorr_f0(x, sr, f0_min=55.0, f0_max=500.0):
    """Oracle: peak of the full-signal autocorrelation within the search range."""
    n = len(x)
    spec = np.fft.rfft(x, 2 * n)
    ac = np.fft.irfft(np.abs(spec) ** 2)[:n]
    lo, hi = int(sr / f0_max), int(sr / f0_min) + 1
    k = lo + int(np.argmax(ac[lo:hi]))
    # parabolic refinement of the peak
    a, b, c = ac[k - 1], ac[k], ac[k + 1]
    return sr / (k + 0.5 * (a - c) / (a - 2 * b + c))


def test_sine_220():
    w = _sine(220.0)
    oracle = _autocorr_f0(w.samples, SR)
    assert abs(oracle - 220.0) / 220.0 < 0.005
    p = signal.track_pitch(w)
    interior = slice(10, len(p) - 10)
    f = p.f0[interior]
    share = np.mean((f >= oracle * 0.98) & (f <= oracle * 1.02))
    assert share >= 0.95


def test_white_noise_unvoiced():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(SR)
    x *= 0.1 / np.sqrt(np.mean(x ** 2))  # -20 dBFS rms
    w = signal.Waveform(x, SR)
    cfg = signal.PitchConfig()
    # oracle: per-frame NCCF peak over the lag range stays below the threshold
    centers = np.round(np.arange(signal.n_frames(SR, SR)) * 0.005 * SR).astype(int)
    nccf = signal.frame_nccf(x, centers, int(0.025 * SR), int(SR / cfg.f0_max), int(SR / cfg.f0_min))
    assert np.mean(nccf.max(axis=1) < cfg.voicing_threshold) >= 0.9
    p = signal.track_pitch(w)
    assert np.mean(p.f0 == 0) >= 0.9


def test_zeros_unvoiced():
    p = signal.track_pitch(signal.Waveform(np.zeros(SR // 2), SR))
    assert np.all(p.f0 == 0)


def test_frame_count_and_hop():
    for n in (SR // 2, SR // 2 + 37, 12345):
        w = signal.Waveform(np.zeros(n), SR)
        p = signal.track_pitch(w)
        assert p.hop_seconds == 0.005
        assert len(p) == int(np.floor(n / SR / 0.005)) + 1


def test_voiced_within_range():
    w, _ = synth.harmonic_tone(lambda t: 60 + 600 * t, duration=1.0)
    cfg = signal.PitchConfig(f0_min=80, f0_max=400)
    p = signal.track_pitch(w, cfg)
    v = p.f0[p.f0 > 0]
    assert len(v) and v.min() >= 80 and v.max() <= 400


def test_short_waveform_rejected():
    with pytest.raises(PitchError, match="shorter than one analysis window"):
        signal.track_pitch(signal.Waveform(np.zeros(100), SR))


def test_range_checks():
    with pytest.raises(PitchError):
        signal.PitchConfig(f0_min=300, f0_max=200)
    with pytest.raises(PitchError, match="sample_rate/4"):
        signal.track_pitch(signal.Waveform(np.zeros(8000), 8000), signal.PitchConfig(f0_max=2500))


def test_determinism():
    u = synth.synthesize("my name is anna", "f2")
    a, b = signal.track_pitch(u.waveform), signal.track_pitch(u.waveform)
    assert a.f0.tobytes() == b.f0.tobytes() and a.nccf_peak.tobytes() == b.nccf_peak.tobytes()


def test_median_filter_option():
    u = synth.synthesize("hello yellow lemon", "m2")
    plain = signal.track_pitch(u.waveform)
    filt = signal.track_pitch(u.waveform, signal.PitchConfig(median_filter=True))
    assert np.array_equal(plain.f0 > 0, filt.f0 > 0)
    j = np.nonzero((plain.f0[:-2] > 0) & (plain.f0[1:-1] > 0) & (plain.f0[2:] > 0))[0][5] + 1
    assert filt.f0[j] == np.median(plain.f0[j - 1:j + 2])


@settings(max_examples=12, deadline=None)
@given(st.floats(80.0, 200.0))
def test_octave_shift(f0):
    lo = signal.track_pitch(synth.harmonic_tone(f0, 0.5)[0])
    hi = signal.track_pitch(synth.harmonic_tone(2 * f0, 0.5)[0])
    ratio = np.median(hi.f0[hi.f0 > 0]) / np.median(lo.f0[lo.f0 > 0])
    assert abs(ratio - 2.0) <= 0.06


def test_time_shift_covariance():
    u = synth.synthesize("we were away a year ago", "f1")
    x = u.waveform.samples
    pad = np.concatenate([np.zeros(int(0.05 * SR)), x])
    a = signal.track_pitch(u.waveform)
    b = signal.track_pitch(signal.Waveform(pad, SR))
    onset_a = np.nonzero(a.f0 > 0)[0]
    onset_b = np.nonzero(b.f0 > 0)[0]
    assert abs((onset_b[0] - onset_a[0]) - 10) <= 1
    assert abs((onset_b[-1] - onset_a[-1]) - 10) <= 1


# -- interpolate_unvoiced ----------------------------------------------------

def _track(f0):
    f0 = np.asarray(f0, dtype=float)
    return signal.PitchTrack(f0, np.zeros_like(f0))


def test_midpoint():
    c = signal.interpolate_unvoiced(_track([100.0, 0.0, 200.0]))
    assert c.log_f0[1] == pytest.approx((np.log(100) + np.log(200)) / 2, abs=1e-15)
    assert list(c.voiced_mask) == [True, False, True]


def test_all_voiced_identity():
    f0 = np.array([100.0, 120.0, 95.0, 300.0])
    c = signal.interpolate_unvoiced(_track(f0))
    assert np.array_equal(c.log_f0, np.log(f0))


def test_edge_hold():
    c = signal.interpolate_unvoiced(_track([0.0, 150.0, 0.0]))
    assert np.array_equal(c.log_f0, np.full(3, np.log(150.0)))


def test_unvoiced_error():
    with pytest.raises(UnvoicedUtteranceError, match="unvoiced utterance"):
        signal.interpolate_unvoiced(_track([0.0, 0.0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.one_of(st.just(0.0), st.floats(60.0, 480.0)), min_size=1, max_size=40))
def test_interpolation_properties(f0):
    if not any(f > 0 for f in f0):
        return
    c = signal.interpolate_unvoiced(_track(f0))
    f0 = np.array(f0)
    v = f0 > 0
    assert np.all(np.isfinite(c.log_f0))
    assert np.array_equal(c.log_f0[v], np.log(f0[v]))
    idx = np.nonzero(v)[0]
    for a, b in zip(idx[:-1], idx[1:]):
        for j in range(a + 1, b):
            expect = c.log_f0[a] + (c.log_f0[b] - c.log_f0[a]) * (j - a) / (b - a)
            assert c.log_f0[j] == pytest.approx(expect, abs=1e-12)
    # idempotence: re-interpolating an all-voiced copy is the identity
    again = signal.interpolate_unvoiced(_track(np.exp(c.log_f0)))
    assert np.allclose(again.log_f0, c.log_f0, atol=1e-12, rtol=0)
