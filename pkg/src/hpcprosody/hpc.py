"""Hierarchical prosody controls.

For each interval of each hierarchy level four measurements are taken on
the continuous log-f0 trajectory and the phone alignment:

``dur``    log of the mean non-silence phone duration (log-seconds)
``df0``    95th minus 5th percentile of log-f0
``f0``     median log-f0 minus the speaker's median log-f0
``slope``  least-squares slope of log-f0 against time (per second)

Measurements are copied onto every phone of their interval, each level
after the first is stored as its difference from the level above, and the
resulting matrix is standardized column-wise with corpus statistics,
dividing by three standard deviations.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import _io
from .align import LEVELS
from .errors import HpcError, MeasurementError, StatsError
from .signal import HOP_SECONDS, continuous_log_f0

MEASURES = ("dur", "df0", "f0", "slope")
N_MEASURES = len(MEASURES)
PERCENTILE_CONVENTION = "linear"
STD_CONVENTION = "population"
LOG_BASE = "e"


@dataclass(frozen=True)
class HierarchySpec:
    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if not 1 <= len(levels) <= 4:
            raise HpcError(f"hierarchy needs 1 to 4 levels, got {len(levels)}")
        if levels[0] != "sentence":
            raise HpcError("hierarchy must start at the sentence level")
        for lv in levels:
            if lv not in LEVELS:
                raise HpcError(f"unknown level {lv!r}")
        rank = [LEVELS.index(lv) for lv in levels]
        if any(b <= a for a, b in zip(rank, rank[1:])):
            raise HpcError(f"levels must strictly increase in granularity: {levels}")

    @property
    def n_columns(self):
        return N_MEASURES * len(self.levels)

    @property
    def columns(self):
        names = [f"{self.levels[0]}_{m}" for m in MEASURES]
        for lv in self.levels[1:]:
            names += [f"{lv}_{m}res" for m in MEASURES]
        return names

    @property
    def finest(self):
        return self.levels[-1]

    def __str__(self):
        for name, spec in PRESETS.items():
            if spec.levels == self.levels:
                return name
        return ",".join(self.levels)


PRESETS = {
    "hpc0": HierarchySpec(("sentence", "word")),
    "hpc1": HierarchySpec(("sentence", "word", "syllable")),
    "hpc2": HierarchySpec(("sentence", "word", "phone")),
}


def hierarchy(spec):
    """Resolve a preset name, comma list, sequence or HierarchySpec."""
    if isinstance(spec, HierarchySpec):
        return spec
    if isinstance(spec, str):
        if spec.lower() in PRESETS:
            return PRESETS[spec.lower()]
        return HierarchySpec(tuple(s.strip() for s in spec.split(",") if s.strip()))
    return HierarchySpec(tuple(spec))


@dataclass(frozen=True)
class IntervalMeasurements:
    dur: float
    delta_f0: float
    f0: float
    slope_f0: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise MeasurementError(f"non-finite measurement {self}")

    def as_array(self):
        return np.array([self.dur, self.delta_f0, self.f0, self.slope_f0])


@dataclass(frozen=True, eq=False)
class HpcMatrix:
    values: np.ndarray
    hierarchy: HierarchySpec
    normalized: bool

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.hierarchy.n_columns:
            raise HpcError(f"matrix shape {v.shape} does not fit hierarchy {self.hierarchy.levels}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_phones(self):
        return self.values.shape[0]

    def block(self, level):
        i = self.hierarchy.levels.index(level)
        return self.values[:, N_MEASURES * i:N_MEASURES * (i + 1)]

    def to_csv(self):
        lines = [f"# hierarchy={','.join(self.hierarchy.levels)} "
                 f"normalized={'true' if self.normalized else 'false'}"]
        if not self.normalized:
            lines.append("# unnormalized")
        lines.append(",".join(self.hierarchy.columns))
        for row in self.values:
            lines.append(",".join(_io.format_float(v) for v in row))
        return "\n".join(lines) + "\n"

    def to_json(self):
        return _io.dumps({
            "hierarchy": list(self.hierarchy.levels),
            "normalized": self.normalized,
            "columns": self.hierarchy.columns,
            "values": self.values.tolist(),
        }) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        values = np.array(d["values"], dtype=float).reshape(len(d["values"]), -1)
        return cls(values, HierarchySpec(tuple(d["hierarchy"])), bool(d["normalized"]))

    @classmethod
    def from_csv(cls, text):
        normalized, levels, rows, header = None, None, [], None
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("hierarchy="):
                        levels = tuple(tok.split("=", 1)[1].split(","))
                    elif tok.startswith("normalized="):
                        normalized = tok.endswith("true")
                continue
            if not line.strip():
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(v) for v in line.split(",")])
        if header is None:
            raise HpcError("HPC CSV is missing its header row")
        if levels is None:
            levels = tuple(dict.fromkeys(c.split("_")[0] for c in header))
        spec = HierarchySpec(levels)
        if header != spec.columns:
            raise HpcError(f"HPC CSV header {header} does not match {spec.columns}")
        values = np.array(rows, dtype=float).reshape(len(rows), spec.n_columns)
        return cls(values, spec, bool(normalized))


def interval_frames(track, start, end):
    """Frame indices ``k`` with ``start <= k * hop < end``."""
    hop = track.hop_seconds
    lo = int(np.ceil(start / hop - 1e-9))
    hi = int(np.ceil(end / hop - 1e-9))
    if hi > len(track.log_f0) + 1:
        raise MeasurementError(
            f"track ({track.duration:.3f} s) does not cover interval [{start}, {end}]"
        )
    return np.arange(max(lo, 0), min(hi, len(track.log_f0)))


def slope(t, y):
    """Least-squares slope of ``y`` against ``t``; zero for a single point."""
    if len(t) < 2:
        return 0.0
    tc = t - t.mean()
    # centring y on a sample rather than its mean keeps a flat contour exactly flat
    return float(np.dot(tc, y - y[0]) / np.dot(tc, tc))


def measure_interval(track, interval, phones_in_interval, speaker_median_logf0):
    """The four measurements for one interval ``(start, end)``."""
    start, end = interval
    durations = [p.end - p.start for p in phones_in_interval if not p.is_silence]
    if not durations:
        raise MeasurementError(f"interval [{start}, {end}] contains no non-silence phone")
    frames = interval_frames(track, start, end)
    if len(frames) == 0:
        raise MeasurementError(f"interval [{start}, {end}] is shorter than one pitch hop")
    y = track.log_f0[frames]
    t = frames * track.hop_seconds - start
    p5, p95 = np.percentile(y, [5, 95], method=PERCENTILE_CONVENTION)
    return IntervalMeasurements(
        dur=float(np.log(np.mean(durations))),
        delta_f0=float(p95 - p5),
        f0=float(np.median(y) - speaker_median_logf0),
        slope_f0=slope(t, y),
    )


def measure_level(track, alignment, level, speaker_median_logf0):
    """Measurements for every interval of ``level``, in time order."""
    phones = alignment.content_phones
    out = []
    for start, end, members in alignment.level_intervals(level):
        out.append(measure_interval(track, (start, end), [phones[k] for k in members],
                                    speaker_median_logf0))
    return out


def propagate(per_interval, alignment, level):
    """Copy each interval's measurements onto its phones: (n_phones, 4)."""
    intervals = alignment.level_intervals(level)
    if len(per_interval) != len(intervals):
        raise HpcError(f"{len(per_interval)} measurements for {len(intervals)} {level} intervals")
    block = np.full((alignment.n_phones, N_MEASURES), np.nan)
    for m, (_, _, members) in zip(per_interval, intervals):
        block[members] = m.as_array()
    missing = np.nonzero(np.isnan(block[:, 0]))[0]
    if len(missing):
        raise HpcError(f"phone {int(missing[0])} is not covered by any {level} interval")
    return block


def build_residual(blocks):
    """Concatenate level blocks, each after the first minus its predecessor."""
    if not blocks:
        raise HpcError("need at least one level block")
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    n = blocks[0].shape[0]
    if any(b.shape != (n, N_MEASURES) for b in blocks):
        raise HpcError("level blocks have mismatched phone counts")
    parts = [blocks[0]] + [b - a for a, b in zip(blocks, blocks[1:])]
    return np.concatenate(parts, axis=1)


def absolute_blocks(P, hier):
    """Undo :func:`build_residual` by prefix-summing the level groups."""
    P = np.asarray(P, dtype=float)
    out = [P[:, :N_MEASURES]]
    for i in range(1, len(hier.levels)):
        out.append(out[-1] + P[:, N_MEASURES * i:N_MEASURES * (i + 1)])
    return out


def raw_hpc(track, alignment, hier, speaker_median_logf0):
    """Unnormalized residual matrix for one utterance."""
    hier = hierarchy(hier)
    blocks = [propagate(measure_level(track, alignment, lv, speaker_median_logf0), alignment, lv)
              for lv in hier.levels]
    return build_residual(blocks)


@dataclass(frozen=True, eq=False)
class CorpusStats:
    """Global column statistics plus speaker registers and phone durations.

    ``phone_durations`` maps a phone label to its mean duration (seconds)
    and feeds the baseline duration predictor.
    """

    mu: np.ndarray
    sigma: np.ndarray
    speaker_median_logf0: dict
    hierarchy: HierarchySpec
    phone_durations: dict = field(default_factory=dict)
    global_mean_duration: float = float("nan")

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        sigma = np.array(self.sigma, dtype=float)
        if mu.shape != (self.hierarchy.n_columns,) or sigma.shape != mu.shape:
            raise StatsError("mu/sigma length does not match hierarchy")
        bad = np.nonzero(~(sigma > 0))[0]
        if len(bad):
            raise StatsError(f"column {self.hierarchy.columns[bad[0]]} has non-positive sigma")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def to_json(self):
        return _io.dumps({
            "hierarchy": list(self.hierarchy.levels),
            "columns": self.hierarchy.columns,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "speaker_median_logf0": dict(sorted(self.speaker_median_logf0.items())),
            "phone_durations": dict(sorted(self.phone_durations.items())),
            "global_mean_duration": (self.global_mean_duration
                                     if np.isfinite(self.global_mean_duration) else None),
            "percentile_convention": PERCENTILE_CONVENTION,
            "std_convention": STD_CONVENTION,
            "log_base": LOG_BASE,
        }) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        for key, want in (("percentile_convention", PERCENTILE_CONVENTION),
                          ("std_convention", STD_CONVENTION), ("log_base", LOG_BASE)):
            if d.get(key, want) != want:
                raise StatsError(f"stats file uses {key}={d[key]!r}, expected {want!r}")
        return cls(
            mu=d["mu"], sigma=d["sigma"],
            speaker_median_logf0={k: float(v) for k, v in d.get("speaker_median_logf0", {}).items()},
            hierarchy=HierarchySpec(tuple(d["hierarchy"])),
            phone_durations={k: float(v) for k, v in d.get("phone_durations", {}).items()},
            global_mean_duration=float(d.get("global_mean_duration") or float("nan")),
        )

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _check_dims(values, stats):
    if values.ndim != 2 or values.shape[1] != len(stats.mu):
        raise HpcError(f"matrix has {values.shape[-1]} columns, stats have {len(stats.mu)}")


def normalize(P, stats):
    """Column k becomes (p_k - mu_k) / (3 sigma_k)."""
    P = np.asarray(P.values if isinstance(P, HpcMatrix) else P, dtype=float)
    _check_dims(P, stats)
    return HpcMatrix((P - stats.mu) / (3.0 * stats.sigma), stats.hierarchy, True)


def denormalize(Phat, stats):
    values = np.asarray(Phat.values if isinstance(Phat, HpcMatrix) else Phat, dtype=float)
    _check_dims(values, stats)
    if isinstance(Phat, HpcMatrix) and Phat.hierarchy != stats.hierarchy:
        raise HpcError("matrix and stats hierarchies differ")
    return values * (3.0 * stats.sigma) + stats.mu


class StatsAccumulator:
    """Mergeable running moments (count, mean, M2) per column.

    ``merge`` uses the pairwise update of Chan et al., so partial results
    from parallel workers combine in any order.
    """

    def __init__(self, n_columns):
        self.count = 0
        self.mean = np.zeros(n_columns)
        self.m2 = np.zeros(n_columns)
        self.speaker_frames = {}
        self.phone_sums = {}
        self.n_utterances = 0

    def add_matrix(self, P):
        P = np.asarray(P, dtype=float)
        other = StatsAccumulator(len(self.mean))
        other.count = P.shape[0]
        if other.count:
            other.mean = P.mean(axis=0)
            other.m2 = ((P - other.mean) ** 2).sum(axis=0)
        other.n_utterances = 1
        self.merge(other)
        return self

    def add_voiced(self, speaker, voiced_logf0):
        self.speaker_frames.setdefault(speaker, []).append(np.asarray(voiced_logf0, dtype=float))
        return self

    def add_durations(self, labels, durations):
        for lab, d in zip(labels, durations):
            n, s = self.phone_sums.get(lab, (0, 0.0))
            self.phone_sums[lab] = (n + 1, s + float(d))
        return self

    def merge(self, other):
        n = self.count + other.count
        if other.count:
            delta = other.mean - self.mean
            self.mean = self.mean + delta * (other.count / n)
            self.m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / n)
            self.count = n
        self.n_utterances += other.n_utterances
        for spk, frames in other.speaker_frames.items():
            self.speaker_frames.setdefault(spk, []).extend(frames)
        for lab, (c, s) in other.phone_sums.items():
            n0, s0 = self.phone_sums.get(lab, (0, 0.0))
            self.phone_sums[lab] = (n0 + c, s0 + s)
        return self

    def finalize(self, hier):
        hier = hierarchy(hier)
        if self.n_utterances == 0:
            raise StatsError("empty corpus")
        if self.n_utterances < 2:
            raise StatsError("corpus statistics need at least 2 utterances")
        sigma = np.sqrt(self.m2 / self.count)
        for k, s in enumerate(sigma):
            if not s > 0:
                raise StatsError(f"column {hier.columns[k]} has zero variance (sigma = 0)")
        medians = {}
        for spk, frames in self.speaker_frames.items():
            allf = np.concatenate(frames) if frames else np.empty(0)
            if len(allf):
                medians[spk] = float(np.median(allf))
        durs = {lab: s / c for lab, (c, s) in sorted(self.phone_sums.items())}
        total_n = sum(c for c, _ in self.phone_sums.values())
        gmean = sum(s for _, s in self.phone_sums.values()) / total_n if total_n else float("nan")
        return CorpusStats(self.mean.copy(), sigma, medians, hier, durs, gmean)


def compute_corpus_stats(corpus, hier, durations=None):
    """Pooled column statistics over all phone rows of all utterances.

    ``corpus`` yields ``(speaker_id, P, voiced_logf0)`` with ``P`` the
    unnormalized matrix and ``voiced_logf0`` that utterance's voiced-frame
    log-f0 values. ``durations`` optionally yields ``(labels, seconds)``
    pairs for the per-phone duration table.
    """
    hier = hierarchy(hier)
    acc = StatsAccumulator(hier.n_columns)
    for speaker, P, voiced in corpus:
        P = np.asarray(P.values if isinstance(P, HpcMatrix) else P, dtype=float)
        if P.ndim != 2 or P.shape[1] != hier.n_columns:
            raise StatsError(f"matrix with {P.shape} does not match hierarchy {hier.levels}")
        acc.add_matrix(P).add_voiced(speaker, voiced)
    for labels, secs in durations or ():
        acc.add_durations(labels, secs)
    return acc.finalize(hier)


def corpus_stats_from_tracks(items, hier):
    """Two-pass statistics from ``(speaker_id, track, alignment)`` items.

    Speaker medians come first (all voiced frames per speaker); matrices
    are then measured relative to them, as for seen speakers.
    """
    hier = hierarchy(hier)
    items = list(items)
    frames = {}
    for spk, track, _ in items:
        frames.setdefault(spk, []).append(track.log_f0[track.voiced_mask])
    medians = {spk: float(np.median(np.concatenate(f))) for spk, f in frames.items()}
    corpus = ((spk, raw_hpc(track, a, hier, medians[spk]), track.log_f0[track.voiced_mask])
              for spk, track, a in items)
    durations = ((a.labels, [p.duration for p in a.content_phones]) for _, _, a in items)
    return compute_corpus_stats(corpus, hier, durations)


def speaker_median(track, stats=None, speaker=None):
    """Seen speakers use the stored register; unseen ones the utterance's."""
    if speaker is None:
        return track.voiced_median()
    if stats is None or speaker not in stats.speaker_median_logf0:
        raise StatsError(f"speaker {speaker!r} has no stored median log-f0")
    return stats.speaker_median_logf0[speaker]


def extract_hpc_from_track(track, alignment, hier, stats=None, speaker=None):
    hier = hierarchy(hier)
    if stats is not None and stats.hierarchy != hier:
        raise StatsError(f"stats hierarchy {stats.hierarchy.levels} != {hier.levels}")
    P = raw_hpc(track, alignment, hier, speaker_median(track, stats, speaker))
    if stats is None:
        return HpcMatrix(P, hier, False)
    return normalize(P, stats)


def extract_hpc(w, alignment, hier, stats=None, speaker=None, pitch_cfg=None):
    """Waveform + alignment to the HPC matrix.

    ``speaker=None`` is the unseen-speaker mode (register from this
    utterance's voiced frames). Without ``stats`` the raw matrix is
    returned with ``normalized=False``.
    """
    if alignment.sentence[1] > w.duration + HOP_SECONDS:
        raise MeasurementError("alignment extends beyond the waveform")
    track = continuous_log_f0(w, pitch_cfg)
    return extract_hpc_from_track(track, alignment, hier, stats, speaker)
