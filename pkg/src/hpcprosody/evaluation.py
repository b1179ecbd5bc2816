"""Objective prosody similarity and alignment diagnostics.

:func:`compare_prosody` scores two parallel renditions of the same text
along three axes: intonation shape, word timing and HPC distance. It also
gives a fixed-rescaling summary in [0, 1]:

``overall = mean((r + 1) / 2, exp(-rmse / 0.05 s), exp(-d))``

These are diagnostic proxies with no claim of matching listener judgements.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _io
from .align import SONORANTS, base_phone, is_vowel
from .hpc import extract_hpc_from_track, hierarchy
from .signal import continuous_log_f0
from .transfer import check_parallel

N_POINTS = 200
RMSE_SCALE = 0.05

MIN_PHONE = 0.020
MAX_VOWEL = 0.400
MAX_WORD = 2.0
MAX_UNVOICED_SONORANT = 0.5

REPORT_FIELDS = ("f0_correlation", "duration_rmse", "hpc_distance", "overall")


@dataclass(frozen=True)
class SimilarityReport:
    f0_correlation: float
    duration_rmse: float  # seconds
    hpc_distance: float
    overall: float
    level_distance: tuple = ()  # ((level, distance), ...) in hierarchy order

    def as_dict(self):
        d = {k: getattr(self, k) for k in REPORT_FIELDS}
        d["level_distance"] = dict(self.level_distance)
        return d

    def to_json(self):
        return _io.dumps(self.as_dict()) + "\n"

    def to_text(self):
        rows = [(k, _io.format_float(getattr(self, k))) for k in REPORT_FIELDS]
        rows += [(f"hpc_distance[{lv}]", _io.format_float(v)) for lv, v in self.level_distance]
        width = max(len(k) for k, _ in rows)
        return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)

    def csv_row(self):
        return [_io.format_float(getattr(self, k)) for k in REPORT_FIELDS] + [
            _io.format_float(v) for _, v in self.level_distance]

    def csv_header(self):
        return list(REPORT_FIELDS) + [f"hpc_distance_{lv}" for lv, _ in self.level_distance]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        w.writerow(self.csv_row())
        return buf.getvalue()


def pearson(x, y):
    """Pearson r; a constant contour correlates 1 with another constant, else 0."""
    if np.array_equal(x, y):
        return 1.0  # exact, where the formula can round to 1 - ulp
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    sx, sy = np.sqrt(x @ x), np.sqrt(y @ y)
    scale = max(np.max(np.abs(x)), np.max(np.abs(y)), 1e-300)
    flat_x, flat_y = sx <= 1e-12 * scale * np.sqrt(len(x)), sy <= 1e-12 * scale * np.sqrt(len(y))
    if flat_x or flat_y:
        return 1.0 if flat_x and flat_y else 0.0
    return float(np.clip((x @ y) / (sx * sy), -1.0, 1.0))


def sentence_contour(track, alignment, n_points=N_POINTS):
    """Log-f0 sampled at ``n_points`` evenly spaced instants across the sentence."""
    start, end = alignment.sentence
    t = np.linspace(start, end, n_points)
    return np.interp(t, track.times, track.log_f0)


def word_durations(alignment):
    return np.array([w.end - w.start for w in alignment.words])


def level_distances(Pa, Pb):
    """Mean over rows of the L2 norm of each level's block difference."""
    hier = Pa.hierarchy
    return tuple((lv, float(np.mean(np.linalg.norm(Pa.block(lv) - Pb.block(lv), axis=1))))
                 for lv in hier.levels)


def overall_score(r, rmse, d):
    return float(np.mean([(r + 1.0) / 2.0, np.exp(-rmse / RMSE_SCALE), np.exp(-d)]))


def compare_prosody(a_wav, a_align, b_wav, b_align, hier, stats, pitch_cfg=None,
                    a_track=None, b_track=None):
    """Similarity of two parallel renditions.

    Both sides are measured as unseen speakers (own register). Tracks may
    be passed in to skip pitch tracking.
    """
    hier = hierarchy(hier)
    check_parallel(a_align.labels, b_align.labels)
    check_parallel(tuple(w.label for w in a_align.words), tuple(w.label for w in b_align.words))
    ta = a_track if a_track is not None else continuous_log_f0(a_wav, pitch_cfg)
    tb = b_track if b_track is not None else continuous_log_f0(b_wav, pitch_cfg)
    r = pearson(sentence_contour(ta, a_align), sentence_contour(tb, b_align))
    diff = word_durations(a_align) - word_durations(b_align)
    rmse = float(np.sqrt(np.mean(diff ** 2)))
    Pa = extract_hpc_from_track(ta, a_align, hier, stats)
    Pb = extract_hpc_from_track(tb, b_align, hier, stats)
    levels = level_distances(Pa, Pb)
    d = float(np.mean([v for _, v in levels]))
    return SimilarityReport(r, rmse, d, overall_score(r, rmse, d), levels)


@dataclass(frozen=True)
class SanityWarning:
    kind: str  # short_phone | long_vowel | long_word | unvoiced_sonorant
    index: int  # content-phone position, or word index for long_word
    label: str
    value: float

    def __str__(self):
        what = {"short_phone": "phone shorter than 20 ms", "long_vowel": "vowel longer than 400 ms",
                "long_word": "word longer than 2 s",
                "unvoiced_sonorant": "sonorant mostly unvoiced"}[self.kind]
        unit = "unvoiced fraction" if self.kind == "unvoiced_sonorant" else "s"
        return f"{what}: {self.label!r} #{self.index} ({unit} {self.value:.3f})"


def alignment_sanity(alignment, track=None):
    """Heuristic warnings for likely forced-alignment errors.

    The voicing check runs only when a pitch ``track`` (anything with
    ``times`` and ``voiced_mask`` or ``voiced``) is supplied.
    """
    out = []
    voiced = None
    if track is not None:
        voiced = np.asarray(track.voiced_mask if hasattr(track, "voiced_mask") else track.voiced)
        times = track.times
    for k, p in enumerate(alignment.content_phones):
        if p.duration < MIN_PHONE:
            out.append(SanityWarning("short_phone", k, p.label, p.duration))
        if is_vowel(p.label) and p.duration > MAX_VOWEL:
            out.append(SanityWarning("long_vowel", k, p.label, p.duration))
        if voiced is not None and base_phone(p.label) in SONORANTS:
            sel = (times >= p.start) & (times < p.end)
            if sel.any():
                frac = 1.0 - float(np.mean(voiced[sel]))
                if frac > MAX_UNVOICED_SONORANT:
                    out.append(SanityWarning("unvoiced_sonorant", k, p.label, frac))
    for i, w in enumerate(alignment.words):
        if w.end - w.start > MAX_WORD:
            out.append(SanityWarning("long_word", i, w.label, w.end - w.start))
    return out
