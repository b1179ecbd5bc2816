"""Audio ingestion, pitch tracking and the continuous log-f0 trajectory.

The tracker follows the RAPT recipe: a normalized cross-correlation
function (NCCF) is evaluated per 5 ms frame, its strongest peaks become
period candidates, and a dynamic-programming pass picks one candidate (or
the unvoiced hypothesis) per frame so that local correlation strength and
contour smoothness are traded off.
"""

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import PitchError, UnvoicedUtteranceError, WavFormatError

HOP_SECONDS = 0.005


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono PCM audio with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise WavFormatError("unsupported channel count: waveform must be mono")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate < 8000:
            raise WavFormatError(f"sample rate must be an integer >= 8000, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise WavFormatError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", _frozen(samples))
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)


def load_wav(path):
    """Read a mono 16-bit PCM or IEEE-float RIFF/WAVE file.

    Multi-channel files are rejected rather than downmixed.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, OSError) as exc:
        raise WavFormatError(f"{path}: malformed or unsupported WAV file ({exc})") from exc
    if data.ndim != 1:
        raise WavFormatError(f"{path}: unsupported channel count {data.shape[1]}")
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(float)
    else:
        raise WavFormatError(f"{path}: unsupported codec (sample type {data.dtype})")
    return Waveform(samples, rate)


def write_wav(path, w):
    """Write ``w`` as 16-bit PCM; the bytes depend only on the samples."""
    pcm = np.clip(np.round(np.asarray(w.samples) * 32768.0), -32768, 32767).astype("<i2")
    wavfile.write(path, w.sample_rate, pcm)


@dataclass(frozen=True)
class PitchConfig:
    """Tracker settings.

    ``lag_weight`` biases candidate selection toward short periods (guards
    against sub-harmonic picks), ``freq_weight`` scales the cost of an
    |delta log f0| jump between consecutive voiced frames and
    ``voicing_cost`` is charged on every voiced/unvoiced switch. Voiced
    runs shorter than ``min_voiced_frames`` are dropped after the search.
    """

    f0_min: float = 55.0
    f0_max: float = 500.0
    voicing_threshold: float = 0.3
    window_seconds: float = 0.025
    n_candidates: int = 10
    lag_weight: float = 0.3
    freq_weight: float = 2.0
    voicing_cost: float = 0.1
    min_voiced_frames: int = 4
    median_filter: bool = False

    def __post_init__(self):
        if not 0 < self.f0_min < self.f0_max:
            raise PitchError(f"need 0 < f0_min < f0_max, got [{self.f0_min}, {self.f0_max}]")
        if self.n_candidates < 2:
            raise PitchError("n_candidates counts the unvoiced hypothesis and must be >= 2")


@dataclass(frozen=True, eq=False)
class PitchTrack:
    """Per-frame f0 (0.0 marks unvoiced) and chosen NCCF peak."""

    f0: np.ndarray
    nccf_peak: np.ndarray
    hop_seconds: float = HOP_SECONDS

    def __post_init__(self):
        object.__setattr__(self, "f0", _frozen(self.f0))
        object.__setattr__(self, "nccf_peak", _frozen(self.nccf_peak))

    @property
    def voiced(self):
        return self.f0 > 0

    @property
    def times(self):
        return np.arange(len(self.f0)) * self.hop_seconds

    def __len__(self):
        return len(self.f0)


@dataclass(frozen=True, eq=False)
class ContinuousLogF0Track:
    log_f0: np.ndarray
    voiced_mask: np.ndarray
    hop_seconds: float = HOP_SECONDS

    def __post_init__(self):
        log_f0 = _frozen(self.log_f0)
        if not np.all(np.isfinite(log_f0)):
            raise PitchError("continuous log-f0 track must be finite everywhere")
        object.__setattr__(self, "log_f0", log_f0)
        object.__setattr__(self, "voiced_mask", _frozen(self.voiced_mask, bool))
        if self.voiced_mask.shape != log_f0.shape:
            raise PitchError("voiced mask and log-f0 lengths differ")

    @property
    def times(self):
        return np.arange(len(self.log_f0)) * self.hop_seconds

    @property
    def duration(self):
        return len(self.log_f0) * self.hop_seconds

    def voiced_median(self):
        """Median log-f0 over voiced frames only."""
        if not self.voiced_mask.any():
            raise UnvoicedUtteranceError("unvoiced utterance")
        return float(np.median(self.log_f0[self.voiced_mask]))

    def shifted(self, c):
        return ContinuousLogF0Track(self.log_f0 + c, self.voiced_mask, self.hop_seconds)

    def __len__(self):
        return len(self.log_f0)


def n_frames(n_samples, sample_rate, hop=HOP_SECONDS):
    return int(np.floor(n_samples / sample_rate / hop + 1e-9)) + 1


def frame_nccf(x, centers, window, lag_lo, lag_hi):
    """NCCF for each frame center over lags ``lag_lo..lag_hi`` inclusive.

    For lag ``k`` the two ``window``-sample segments compared are
    ``k`` samples apart and placed symmetrically about the center, so the
    estimate describes the frame instant rather than a point ``k / 2``
    later. Returns an array of shape (len(centers), lag_hi - lag_lo + 1).
    """
    x = np.asarray(x, dtype=float)
    centers = np.asarray(centers, dtype=int)
    half = window // 2
    pad = half + lag_hi
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad + window)])
    sq = np.concatenate([[0.0], np.cumsum(xp * xp)])
    floor = 1e-10 * window
    out = np.zeros((len(centers), lag_hi - lag_lo + 1))
    for j, k in enumerate(range(lag_lo, lag_hi + 1)):
        prod = np.concatenate([[0.0], np.cumsum(xp[:-k] * xp[k:])])
        s = centers + pad - half - k // 2
        num = prod[s + window] - prod[s]
        e0 = sq[s + window] - sq[s]
        ek = sq[s + k + window] - sq[s + k]
        den = np.sqrt(np.maximum(e0, 0.0) * np.maximum(ek, 0.0))
        ok = (den > floor) & (e0 > floor)
        out[ok, j] = num[ok] / den[ok]
    return out


def _candidates(row, lag_lo, k_min, k_max, max_cands):
    """Parabolically refined NCCF peaks inside [k_min, k_max]."""
    inner = row[1:-1]
    is_peak = (inner >= row[:-2]) & (inner > row[2:]) & (inner > 0)
    idx = np.nonzero(is_peak)[0] + 1
    lags = idx + lag_lo
    keep = (lags >= k_min) & (lags <= k_max)
    idx = idx[keep]
    if len(idx) == 0:
        return np.empty(0), np.empty(0)
    a, b, c = row[idx - 1], row[idx], row[idx + 1]
    den = a - 2 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(den < 0, 0.5 * (a - c) / den, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    peak = np.minimum(b - 0.25 * (a - c) * delta, 1.0)
    lag = np.clip(idx + lag_lo + delta, k_min, k_max)
    order = np.argsort(-peak, kind="stable")[:max_cands]
    return lag[order], peak[order]


def track_pitch(w, cfg=None):
    """RAPT-style f0 tracking at a 5 ms hop.

    Frame ``j`` is centered at ``j * 0.005`` s; the frame count is
    ``floor(duration / hop) + 1``. Unvoiced frames carry f0 = 0.
    """
    cfg = cfg or PitchConfig()
    sr = w.sample_rate
    if cfg.f0_max >= sr / 4:
        raise PitchError(f"f0_max {cfg.f0_max} must be below sample_rate/4 = {sr / 4}")
    window = int(round(cfg.window_seconds * sr))
    if len(w.samples) < window:
        raise PitchError("waveform shorter than one analysis window")
    k_min = sr / cfg.f0_max
    k_max = sr / cfg.f0_min
    lag_lo = max(1, int(np.floor(k_min)) - 1)
    lag_hi = int(np.ceil(k_max)) + 1

    nf = n_frames(len(w.samples), sr)
    centers = np.round(np.arange(nf) * HOP_SECONDS * sr).astype(int)
    nccf = frame_nccf(np.asarray(w.samples), centers, window, lag_lo, lag_hi)

    n_voiced_cands = cfg.n_candidates - 1
    # hypotheses per frame: column 0 is unvoiced, the rest voiced candidates
    lag_c = np.full((nf, n_voiced_cands + 1), np.nan)
    peak_c = np.zeros((nf, n_voiced_cands + 1))
    local = np.full((nf, n_voiced_cands + 1), np.inf)
    for j in range(nf):
        lags, peaks = _candidates(nccf[j], lag_lo, k_min, k_max, n_voiced_cands)
        weight = 1.0 - cfg.lag_weight * lags / k_max
        n = len(lags)
        lag_c[j, 1:n + 1] = lags
        peak_c[j, 1:n + 1] = peaks
        local[j, 1:n + 1] = 1.0 - peaks * weight
        if n:
            best = int(np.argmax(peaks * weight))
            local[j, 0] = 1.0 - cfg.voicing_threshold * weight[best]
            peak_c[j, 0] = peaks.max()
        else:
            local[j, 0] = 1.0 - cfg.voicing_threshold

    logf = np.log(sr / lag_c)
    voiced_h = np.isfinite(logf)
    cost = local[0].copy()
    back = np.zeros((nf, n_voiced_cands + 1), dtype=int)
    for j in range(1, nf):
        prev_v = voiced_h[j - 1]
        cur_v = voiced_h[j]
        jump = np.abs(logf[j][:, None] - logf[j - 1][None, :])
        trans = np.where(cur_v[:, None] & prev_v[None, :], cfg.freq_weight * jump, 0.0)
        trans = np.where(cur_v[:, None] != prev_v[None, :], cfg.voicing_cost, trans)
        trans[~np.isfinite(trans)] = 0.0
        total = cost[None, :] + trans
        back[j] = np.argmin(total, axis=1)
        cost = total[np.arange(len(cost)), back[j]] + local[j]

    path = np.zeros(nf, dtype=int)
    path[-1] = int(np.argmin(cost))
    for j in range(nf - 1, 0, -1):
        path[j - 1] = back[j, path[j]]

    rows = np.arange(nf)
    f0 = np.where(path > 0, sr / np.where(path > 0, lag_c[rows, path], 1.0), 0.0)
    f0 = np.where(f0 > 0, np.clip(f0, cfg.f0_min, cfg.f0_max), 0.0)
    peaks = peak_c[rows, path]
    f0 = _drop_short_runs(f0, cfg.min_voiced_frames)
    if cfg.median_filter:
        f0 = _median3_voiced(f0)
    return PitchTrack(f0, np.clip(peaks, 0.0, 1.0))


def _drop_short_runs(f0, min_len):
    voiced = f0 > 0
    edges = np.diff(np.concatenate([[0], voiced.astype(int), [0]]))
    starts, stops = np.nonzero(edges == 1)[0], np.nonzero(edges == -1)[0]
    out = f0.copy()
    for a, b in zip(starts, stops):
        if b - a < min_len:
            out[a:b] = 0.0
    return out


def _median3_voiced(f0):
    out = f0.copy()
    for j in range(1, len(f0) - 1):
        win = f0[j - 1:j + 2]
        if np.all(win > 0):
            out[j] = np.median(win)
    return out


def interpolate_unvoiced(p):
    """Continuous log-f0: voiced frames copied, gaps bridged linearly.

    Interior unvoiced runs are interpolated in the log domain; leading and
    trailing runs hold the nearest voiced value.
    """
    voiced = np.asarray(p.f0) > 0
    if not voiced.any():
        raise UnvoicedUtteranceError("unvoiced utterance")
    idx = np.arange(len(voiced))
    logv = np.log(np.asarray(p.f0)[voiced])
    log_f0 = np.interp(idx, idx[voiced], logv)
    log_f0[voiced] = logv
    return ContinuousLogF0Track(log_f0, voiced, p.hop_seconds)


def continuous_log_f0(w, cfg=None):
    return interpolate_unvoiced(track_pitch(w, cfg))
