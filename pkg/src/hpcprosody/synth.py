"""Deterministic synthetic utterances with known alignment and f0.

A source-filter toy: a band-limited harmonic source following a prescribed
log-f0 contour, shaped by per-phone formant envelopes, mixed with shaped
noise for obstruents. Every utterance comes with its exact phone/word
alignment, which makes it a ground-truthed fixture for the whole pipeline.
Variation is drawn from a generator seeded by a CRC of the text and
speaker name, so identical requests always give identical audio.
"""

import zlib
from dataclasses import dataclass

import numpy as np

from .align import VOWELS, alignment_to_textgrid, base_phone, build_alignment
from .signal import Waveform, write_wav

SAMPLE_RATE = 22050

LEXICON = {
    "a": "AH0",
    "hello": "HH AH0 L OW1",
    "the": "DH AH0",
    "rain": "R EY1 N",
    "in": "IH0 N",
    "spain": "S P EY1 N",
    "stays": "S T EY1 Z",
    "mainly": "M EY1 N L IY0",
    "plain": "P L EY1 N",
    "we": "W IY1",
    "were": "W ER1",
    "away": "AH0 W EY1",
    "year": "Y IH1 R",
    "ago": "AH0 G OW1",
    "my": "M AY1",
    "name": "N EY1 M",
    "is": "IH1 Z",
    "anna": "AE1 N AH0",
    "lemon": "L EH1 M AH0 N",
    "yellow": "Y EH1 L OW0",
    "morning": "M AO1 R N IH0 NG",
    "window": "W IH1 N D OW0",
    "open": "OW1 P AH0 N",
    "really": "R IH1 L IY0",
    "never": "N EH1 V ER0",
    "melon": "M EH1 L AH0 N",
    "only": "OW1 N L IY0",
    "early": "ER1 L IY0",
    "many": "M EH1 N IY0",
    "animals": "AE1 N AH0 M AH0 L Z",
    "live": "L IH1 V",
    "near": "N IH1 R",
    "river": "R IH1 V ER0",
    "all": "AO1 L",
    "day": "D EY1",
    "long": "L AO1 NG",
    "strengths": "S T R EH1 NG TH S",
}

SENTENCES = (
    "the rain in spain stays mainly in the plain",
    "we were away a year ago",
    "my name is anna",
    "many animals live near the river",
    "hello yellow lemon",
    "open the window early in the morning",
    "we never really only live all day long",
    "a melon in the morning",
)

FORMANTS = {
    "AA": (730, 1090, 2440), "AE": (660, 1720, 2410), "AH": (620, 1220, 2550),
    "AO": (570, 840, 2410), "AW": (680, 1200, 2500), "AY": (680, 1500, 2500),
    "EH": (530, 1840, 2480), "ER": (490, 1350, 1690), "EY": (480, 2000, 2600),
    "IH": (390, 1990, 2550), "IY": (270, 2290, 3010), "OW": (500, 900, 2400),
    "OY": (550, 1100, 2450), "UH": (440, 1020, 2240), "UW": (300, 870, 2240),
    "M": (280, 1000, 2200), "N": (280, 1500, 2500), "NG": (280, 2000, 2700),
    "L": (360, 1000, 2600), "R": (420, 1300, 1600), "W": (300, 700, 2200),
    "Y": (280, 2200, 3000),
}
VOICED_OBSTRUENTS = frozenset("B D G V DH Z ZH JH".split())
UNVOICED = frozenset("P T K F TH S SH HH CH".split())
STOPS = frozenset("P T K B D G CH JH".split())

BASE_DURATION = {"vowel": 0.105, "sonorant": 0.065, "stop": 0.06, "fricative": 0.085}


@dataclass(frozen=True)
class Speaker:
    name: str
    median_hz: float
    pitch_range: float = 1.0
    rate: float = 1.0
    formant_scale: float = 1.0


SPEAKERS = {
    "m1": Speaker("m1", 110.0, 0.9, 1.0, 1.0),
    "f1": Speaker("f1", 210.0, 1.1, 0.95, 1.15),
    "m2": Speaker("m2", 95.0, 1.2, 1.1, 0.95),
    "f2": Speaker("f2", 190.0, 0.8, 1.05, 1.12),
    "u_low": Speaker("u_low", 85.0, 1.3, 0.9, 0.92),
    "u_high": Speaker("u_high", 240.0, 1.0, 1.15, 1.2),
    "u_mid": Speaker("u_mid", 150.0, 1.4, 1.0, 1.05),
}


@dataclass(frozen=True)
class Style:
    """Per-utterance delivery: register offset (log-Hz), pitch-range and rate scales."""
    offset: float = 0.0
    pitch_range: float = 1.0
    rate: float = 1.0

    @classmethod
    def random(cls, rng):
        return cls(float(rng.normal(0.0, 0.08)), float(rng.uniform(0.6, 1.6)),
                   float(rng.uniform(0.85, 1.2)))


NEUTRAL = Style()


@dataclass(frozen=True, eq=False)
class SyntheticUtterance:
    waveform: Waveform
    alignment: object
    words: tuple
    speaker: Speaker
    f0_hz: np.ndarray  # true per-sample f0 (Hz)
    voiced: np.ndarray  # per-sample voicing of the source

    def true_f0_at(self, times):
        idx = np.clip(np.round(np.asarray(times) * self.waveform.sample_rate).astype(int),
                      0, len(self.f0_hz) - 1)
        return self.f0_hz[idx]


def phone_class(label):
    b = base_phone(label)
    if b in VOWELS:
        return "vowel"
    if b in FORMANTS:
        return "sonorant"
    if b in STOPS:
        return "stop"
    return "fricative"


def _seed(*parts):
    return zlib.crc32("|".join(parts).encode("utf-8"))


def pronounce(words):
    out = []
    for w in words:
        if w not in LEXICON:
            raise KeyError(f"word {w!r} not in the synthetic lexicon")
        out.append(LEXICON[w].split())
    return out


def plan_timing(words, speaker, rng, pause_prob=0.25, lead=0.15, tail=0.15, style=NEUTRAL):
    """Phone intervals (label, start, end, word index) plus word spans."""
    phones, word_spans = [("sil", 0.0, lead, -1)], []
    t = lead
    prons = pronounce(words)
    for w, pron in enumerate(prons):
        w0 = t
        for lab in pron:
            base = BASE_DURATION[phone_class(lab)]
            stress = 1.25 if lab.endswith("1") else 1.0
            final = 1.3 if w == len(prons) - 1 else 1.0
            d = base * stress * final * speaker.rate * style.rate * float(rng.uniform(0.8, 1.25))
            d = round(d / 0.001) * 0.001
            phones.append((lab, t, t + d, w))
            t += d
        word_spans.append((words[w], w0, t))
        if w < len(prons) - 1 and rng.uniform() < pause_prob:
            d = round(float(rng.uniform(0.08, 0.2)), 3)
            phones.append(("sp", t, t + d, -1))
            t += d
    phones.append(("sil", t, t + tail, -1))
    return phones, word_spans


def contour(t, phones, word_spans, speaker, rng, style=NEUTRAL):
    """Log-f0 contour: declination plus one accent per word."""
    t0, t1 = word_spans[0][1], word_spans[-1][2]
    span = t1 - t0
    x = np.clip((t - t0) / span, 0, 1)
    lf = 0.12 - 0.25 * x
    for w, (_, ws, we) in enumerate(word_spans):
        kind = rng.integers(0, 3)
        amp = float(rng.uniform(0.06, 0.18))
        center = ws + (we - ws) * float(rng.uniform(0.3, 0.7))
        width = max(0.35 * (we - ws), 0.06)
        bump = np.exp(-0.5 * ((t - center) / width) ** 2)
        if kind == 0:
            lf = lf + amp * bump
        elif kind == 1:
            lf = lf - 0.6 * amp * bump
        else:
            lf = lf + amp * np.tanh((t - center) / width) * np.exp(-0.5 * ((t - center) / (2 * width)) ** 2)
    return np.log(speaker.median_hz) + style.offset + speaker.pitch_range * style.pitch_range * lf


def _resonance(f, fc, bw):
    r = f / fc
    return 1.0 / np.sqrt((1 - r * r) ** 2 + (f * bw / (fc * fc)) ** 2)


def render(phones, log_f0, speaker, rng, sr=SAMPLE_RATE):
    n = len(log_f0)
    t = np.arange(n) / sr
    f0 = np.exp(log_f0)
    # per-phone targets sampled at phone centers, interpolated between them
    centers, fmts, vgain, ngain = [], [], [], []
    for lab, s, e, _ in phones:
        b = base_phone(lab)
        centers.append(0.5 * (s + e))
        fm = FORMANTS.get(b, (500, 1500, 2500))
        fmts.append(np.array(fm, dtype=float) * speaker.formant_scale)
        if lab in ("sil", "sp", ""):
            vg, ng = 0.0, 0.0
        elif b in UNVOICED:
            vg, ng = 0.0, 0.25
        elif b in VOICED_OBSTRUENTS:
            vg, ng = 0.35, 0.08
        elif phone_class(lab) == "vowel":
            vg, ng = 1.0, 0.0
        else:
            vg, ng = 0.55, 0.0
        vgain.append(vg)
        ngain.append(ng)
    fmts = np.array(fmts)
    F = np.stack([np.interp(t, centers, fmts[:, i]) for i in range(3)])
    # gains are piecewise constant per phone with 8 ms linear ramps
    step_v = np.zeros(n)
    step_n = np.zeros(n)
    for (lab, s, e, _), vg, ng in zip(phones, vgain, ngain):
        a, b = int(round(s * sr)), int(round(e * sr))
        step_v[a:b] = vg
        step_n[a:b] = ng
    ramp = np.hanning(int(0.016 * sr))
    ramp /= ramp.sum()
    gv = np.convolve(step_v, ramp, mode="same")
    gn = np.convolve(step_n, ramp, mode="same")

    phase = 2 * np.pi * np.cumsum(f0) / sr
    voiced = np.zeros(n)
    bws = (80.0, 120.0, 180.0)
    for k in range(1, int(5500 / f0.min()) + 1):
        fk = k * f0
        ok = fk < min(5500.0, sr / 2 - 500)
        if not ok.any():
            break
        amp = np.where(ok, 1.0 / k ** 0.5, 0.0)
        for i in range(3):
            amp = amp * _resonance(fk, F[i], bws[i]) ** 0.6
        voiced += amp * np.sin(k * phase)
    voiced /= np.max(np.abs(voiced)) + 1e-12
    noise = rng.standard_normal(n)
    noise = np.diff(noise, prepend=0.0) * 0.5
    x = 0.5 * gv * voiced + 0.5 * gn * noise
    x += 1e-4 * rng.standard_normal(n)
    return 0.8 * x / np.max(np.abs(x)), f0, gv > 0.3


def synthesize(text, speaker, seed=None, sr=SAMPLE_RATE, pause_prob=0.25, timing=None,
               style=NEUTRAL):
    """Synthesize ``text`` (space-separated lexicon words) for ``speaker``.

    ``timing`` may carry explicit ``(phones, word_spans)`` from
    :func:`plan_timing`, to reuse a fixed rhythm with a different voice.
    ``style="random"`` draws a :class:`Style` from the utterance's seed.
    """
    if isinstance(speaker, str):
        speaker = SPEAKERS[speaker]
    words = tuple(text.split())
    rng = np.random.default_rng(_seed(text, speaker.name, str(seed)))
    if style == "random":
        style = Style.random(rng)
    phones, spans = timing or plan_timing(words, speaker, rng, pause_prob, style=style)
    n = int(round(phones[-1][2] * sr))
    t = np.arange(n) / sr
    log_f0 = contour(t, phones, spans, speaker, rng, style)
    x, f0, voiced = render(phones, log_f0, speaker, rng, sr)
    alignment = build_alignment(
        [{"label": w, "start": s, "end": e} for w, s, e in spans],
        [{"label": lab, "start": s, "end": e} for lab, s, e, _ in phones],
    )
    return SyntheticUtterance(Waveform(x, sr), alignment, words, speaker, f0, voiced)


def harmonic_tone(f0_hz, duration=1.0, sr=SAMPLE_RATE, n_harmonics=40, amplitude=0.5):
    """Band-limited harmonic tone; ``f0_hz`` is a constant or a function of time."""
    t = np.arange(int(round(duration * sr))) / sr
    f = f0_hz(t) if callable(f0_hz) else np.full_like(t, float(f0_hz))
    phase = 2 * np.pi * np.cumsum(f) / sr
    x = np.zeros_like(t)
    for k in range(1, n_harmonics + 1):
        x += np.where(k * f < sr / 2 - 500, np.sin(k * phase) / k, 0.0)
    return Waveform(amplitude * x / np.max(np.abs(x)), sr), f


def save(u, wav_path, textgrid_path):
    """Write a synthetic utterance as 16-bit WAV plus a words/phones TextGrid."""
    write_wav(wav_path, u.waveform)
    with open(textgrid_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(alignment_to_textgrid(u.alignment, u.waveform.duration))
