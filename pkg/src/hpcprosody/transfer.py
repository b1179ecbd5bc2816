"""Parallel prosody transfer from an unseen speaker.

Two planning modes mirror the two ways of feeding an exemplar recording
to an HPC-controlled synthesizer:

* ``HPC_IMPORT`` (D0): controls come from the recording, phone durations
  from a duration predictor (here a per-label mean table).
* ``HPC_AND_DURATION_IMPORT`` (D1): controls and phone durations both come
  from the recording.

:func:`transplant` renders a plan onto a carrier recording of the same
text: every carrier phone is stretched to its planned duration and the
planned f0 contour is imposed, both in one pitch-synchronous pass (WSOLA
stretching followed by PSOLA is available as ``method="wsola"``). The
contour is re-anchored to the carrier's own median log-f0 so the carrier
keeps its register.
"""

import enum
import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import _io
from .errors import HpcError, PhoneMismatchError, StatsError, TransplantError
from .hpc import (HierarchySpec, HpcMatrix, absolute_blocks, denormalize, extract_hpc_from_track,
                  hierarchy, raw_hpc)
from .signal import HOP_SECONDS, ContinuousLogF0Track, Waveform, continuous_log_f0, track_pitch
from .tsm import psola, wsola

MIN_PHONE_DURATION = 0.010


class TransferMode(enum.Enum):
    HPC_IMPORT = "d0"
    HPC_AND_DURATION_IMPORT = "d1"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for m in cls:
            if value in (m.value, m.name, m.name.lower()):
                return m
        raise HpcError(f"unknown transfer mode {value!r}")


@dataclass(frozen=True, eq=False)
class TransferPlan:
    hpc: HpcMatrix
    durations: np.ndarray
    labels: tuple
    contour: ContinuousLogF0Track
    mode: TransferMode
    source_phone_times: np.ndarray  # (n_phones, 2) start/end in the source
    pauses: np.ndarray = None  # silence between consecutive phones; None keeps the carrier's

    def __post_init__(self):
        d = np.array(self.durations, dtype=float)
        times = np.array(self.source_phone_times, dtype=float).reshape(-1, 2)
        n = len(self.labels)
        if not (self.hpc.n_phones == n == len(d) == len(times)):
            raise HpcError("plan rows, labels, durations and phone times must have equal length")
        if not np.all(d > 0):
            raise HpcError("plan durations must be strictly positive")
        if self.pauses is not None:
            gaps = np.array(self.pauses, dtype=float)
            if len(gaps) != max(n - 1, 0) or np.any(gaps < 0):
                raise HpcError("plan pauses must be n_phones - 1 non-negative durations")
            gaps.setflags(write=False)
            object.__setattr__(self, "pauses", gaps)
        d.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "durations", d)
        object.__setattr__(self, "source_phone_times", times)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def hierarchy(self):
        return self.hpc.hierarchy

    def to_json(self):
        return _io.dumps({
            "mode": self.mode.value,
            "hierarchy": list(self.hierarchy.levels),
            "normalized": self.hpc.normalized,
            "labels": list(self.labels),
            "durations": self.durations.tolist(),
            "source_phone_times": self.source_phone_times.tolist(),
            "pauses": None if self.pauses is None else self.pauses.tolist(),
            "hpc": self.hpc.values.tolist(),
            "contour": {
                "hop_seconds": self.contour.hop_seconds,
                "log_f0": self.contour.log_f0.tolist(),
                "voiced": [bool(v) for v in self.contour.voiced_mask],
            },
        }) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        hier = HierarchySpec(tuple(d["hierarchy"]))
        values = np.array(d["hpc"], dtype=float).reshape(len(d["labels"]), hier.n_columns)
        c = d["contour"]
        return cls(
            hpc=HpcMatrix(values, hier, bool(d["normalized"])),
            durations=d["durations"],
            labels=tuple(d["labels"]),
            contour=ContinuousLogF0Track(c["log_f0"], c["voiced"], c["hop_seconds"]),
            mode=TransferMode.parse(d["mode"]),
            source_phone_times=d["source_phone_times"],
            pauses=d.get("pauses"),
        )

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def check_parallel(expected, found):
    """Raise :class:`PhoneMismatchError` at the first differing label."""
    expected, found = list(expected), list(found)
    for i, (a, b) in enumerate(zip(expected, found)):
        if a != b:
            raise PhoneMismatchError(i, a, b)
    if len(expected) != len(found):
        i = min(len(expected), len(found))
        raise PhoneMismatchError(i, expected[i] if i < len(expected) else None,
                                 found[i] if i < len(found) else None)


def duration_table(alignments):
    """Mean duration per phone label plus the global mean (group-by)."""
    sums = {}
    for a in alignments:
        for p in a.content_phones:
            n, s = sums.get(p.label, (0, 0.0))
            sums[p.label] = (n + 1, s + p.duration)
    table = {lab: s / n for lab, (n, s) in sorted(sums.items())}
    total = sum(n for n, _ in sums.values())
    gmean = sum(s for _, s in sums.values()) / total if total else float("nan")
    return table, gmean


def predict_durations_baseline(phones, table, global_mean=None):
    """Per-phone durations from a label -> mean-seconds table.

    ``table`` may be a dict or :class:`~hpcprosody.hpc.CorpusStats`.
    Labels missing from the table get the global mean, with a warning.
    """
    if hasattr(table, "phone_durations"):
        global_mean = table.global_mean_duration if global_mean is None else global_mean
        table = table.phone_durations
    phones = list(phones)
    if not phones:
        raise HpcError("cannot predict durations for an empty phone sequence")
    if global_mean is None or not np.isfinite(global_mean):
        if not table:
            raise StatsError("duration table is empty")
        global_mean = float(np.mean(list(table.values())))
    out = []
    for lab in phones:
        if lab in table:
            out.append(float(table[lab]))
        else:
            warnings.warn(f"phone {lab!r} missing from duration table; using global mean "
                          f"{global_mean:.4f} s", stacklevel=2)
            out.append(float(global_mean))
    return np.array(out)


def plan_transfer(source_wav, source_align, target_phones, mode, hier, stats, pitch_cfg=None,
                  source_track=None):
    """Extract a transfer plan from a parallel source recording.

    The source speaker is treated as unseen: its register comes from the
    recording itself. ``source_track`` skips pitch tracking when given.
    """
    mode = TransferMode.parse(mode)
    hier = hierarchy(hier)
    check_parallel(source_align.labels, target_phones)
    track = source_track if source_track is not None else continuous_log_f0(source_wav, pitch_cfg)
    hpc = extract_hpc_from_track(track, source_align, hier, stats, speaker=None)
    phones = source_align.content_phones
    times = np.array([(p.start, p.end) for p in phones])
    if mode is TransferMode.HPC_AND_DURATION_IMPORT:
        durations = np.array([p.duration for p in phones])
    else:
        durations = predict_durations_baseline(target_phones, stats)
    # the phone-duration predictor has no pause model: both modes keep the
    # source's phrasing
    pauses = np.maximum(times[1:, 0] - times[:-1, 1], 0.0)
    return TransferPlan(hpc, durations, tuple(target_phones), track, mode, times, pauses)


def render_hpc_contour(plan, stats, out_align, frame_times):
    """Log-f0 rebuilt from the plan's controls alone (no source contour).

    Each interval of the finest level becomes a straight line with that
    interval's relative median level and slope; silences are bridged
    linearly. The result is relative to the source register.
    """
    if stats is None:
        raise StatsError("rendering a contour from HPCs needs the corpus stats")
    raw = denormalize(plan.hpc, stats) if plan.hpc.normalized else plan.hpc.values
    finest = absolute_blocks(raw, plan.hierarchy)[-1]
    known_t, known_v = [], []
    values = np.full(len(frame_times), np.nan)
    for start, end, members in out_align.level_intervals(plan.hierarchy.finest):
        level, slope = finest[members[0], 2], finest[members[0], 3]
        sel = (frame_times >= start) & (frame_times < end)
        mid = 0.5 * (start + end)
        if sel.any():
            mid = 0.5 * (frame_times[sel][0] + frame_times[sel][-1])
            values[sel] = level + slope * (frame_times[sel] - mid)
        known_t += [start, end]
        known_v += [level + slope * (start - mid), level + slope * (end - mid)]
    gaps = np.isnan(values)
    values[gaps] = np.interp(frame_times[gaps], known_t, known_v)
    return values


def _filled(x, voiced):
    """Gap bridging of :func:`~hpcprosody.signal.interpolate_unvoiced`, columnwise."""
    idx = np.arange(len(x))
    if x.ndim == 1:
        return np.interp(idx, idx[voiced], x[voiced])
    return np.stack([np.interp(idx, idx[voiced], col[voiced]) for col in x.T], axis=1)


def _percentile_weights(y, q):
    """Value and frame weights of a 'linear' percentile (locally linear in ``y``)."""
    order = np.argsort(y, kind="stable")
    h = (len(y) - 1) * q / 100.0
    lo = int(np.floor(h))
    hi = min(lo + 1, len(y) - 1)
    frac = h - lo
    w = np.zeros(len(y))
    w[order[lo]] += 1 - frac
    w[order[hi]] += frac
    return float(w @ y), w


def fit_contour(log_f0, voiced, out_align, raw, hier, scale=None, hop=HOP_SECONDS,
                ridge=0.01, slack=0.0, iterations=100):
    """Adjust a log-f0 contour so its gap-bridged version meets raw HPC targets.

    Stretching a contour changes its slopes (log-Hz per second) and the
    frame sets over which medians and percentiles are taken, so a warped
    source contour only approximates the plan on a new timeline. Every
    interval of every level gets three correction terms (offset, ramp and
    spread around its own trend line). Their weights come from damped
    Gauss-Newton steps on the measurement residuals, each divided by
    ``scale`` (per-column spread, e.g. ``3 * sigma``); scaled errors
    within ``slack`` cost nothing and a ridge keeps the result close to
    ``log_f0``. On a timeline other than the source's the targets can
    conflict (phone levels and slopes pin down the word slopes), and the
    fit then ends at a least-squares compromise.
    """
    x0 = np.array(log_f0, dtype=float)
    voiced = np.asarray(voiced, dtype=bool)
    n = len(x0)
    targets = absolute_blocks(raw, hier)
    scale = np.ones(raw.shape[1]) if scale is None else np.asarray(scale, dtype=float)
    c0 = _filled(x0, voiced)
    spans, goal, scale_of, emph, basis = [], [], [], [], []
    for li, (level, block) in enumerate(zip(hier.levels, targets)):
        for start, end, members in out_align.level_intervals(level):
            lo = max(int(np.ceil(start / hop - 1e-9)), 0)
            hi = min(int(np.ceil(end / hop - 1e-9)), n)
            f = np.arange(lo, hi)
            if not len(f) or not voiced[f].any():
                continue
            tc = f * hop - np.mean(f * hop)
            spans.append((f, tc))
            goal.extend(block[members[0], 1:])
            scale_of.extend(scale[4 * li + 1:4 * li + 4])
            # an interval's error is shared by all of its phone rows
            emph.extend([np.sqrt(len(members))] * 3)
            trend = np.polyval(np.polyfit(tc, c0[f], 1), tc) if len(f) > 1 else c0[f]
            for shape in (np.ones(len(f)), tc, c0[f] - trend):
                col = np.zeros(n)
                col[f] = shape
                basis.append(col)
    if not spans:
        return c0
    FB = _filled(np.array(basis).T, voiced)
    goal, scale_of, emph = np.array(goal), np.array(scale_of), np.array(emph)
    # ridge acts on effect size, since ramps are in seconds
    damp = ridge * np.maximum(np.sqrt((FB * FB).sum(axis=0)), 1e-9)
    vidx = np.nonzero(voiced)[0]

    def linearize(theta):
        c = c0 + FB @ theta
        ref, w_ref = _percentile_weights(c[vidx], 50)
        g_ref = w_ref @ FB[vidx]
        m, J = [], []
        for f, tc in spans:
            y = c[f]
            p5, w5 = _percentile_weights(y, 5)
            p95, w95 = _percentile_weights(y, 95)
            med, wm = _percentile_weights(y, 50)
            ws = tc / np.dot(tc, tc) if len(f) > 1 else np.zeros(len(f))
            m += [p95 - p5, med - ref, float(ws @ y)]
            J += [(w95 - w5) @ FB[f], wm @ FB[f] - g_ref, ws @ FB[f]]
        e = (np.array(m) - goal) / scale_of
        out = np.abs(e) > slack
        r = np.where(out, e - np.sign(e) * slack, 0.0) * emph
        J = np.where(out[:, None], np.array(J) * (emph / scale_of)[:, None], 0.0)
        return np.concatenate([r, damp * theta]), np.vstack([J, np.diag(damp)])

    theta = np.zeros(FB.shape[1])
    r, J = linearize(theta)
    cost = r @ r
    for _ in range(iterations):
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        for shrink in (1.0, 0.5, 0.25, 0.125):
            r_new, J_new = linearize(theta + shrink * step)
            if r_new @ r_new < cost:
                break
        else:
            break
        theta = theta + shrink * step
        improved = cost - r_new @ r_new
        r, J, cost = r_new, J_new, r_new @ r_new
        if improved < 1e-10:
            break
    return c0 + FB @ theta


def transplant_alignment(carrier_align, plan):
    """Carrier alignment retimed to the plan's durations and pauses (output timeline)."""
    return carrier_align.retimed(plan.durations, plan.pauses)


def _time_map(carrier_align, out_align, carrier_duration):
    """Knots mapping output time to carrier time, plus the output's internal pauses.

    Content phones map boundary to boundary. A pause the carrier lacks maps
    onto a single carrier instant; a carrier pause the output drops is
    skipped by a jump. Pauses are rendered as silence by the caller.
    """
    car = carrier_align.content_phones
    out = out_align.content_phones
    ko, kc, gaps = [0.0], [0.0], []
    for k, (pc, po) in enumerate(zip(car, out)):
        if po.start > ko[-1]:
            ko.append(po.start)
            kc.append(pc.start)
            if k:
                gaps.append((out[k - 1].end, po.start))
        else:  # no output gap: jump over whatever the carrier has here
            ko.append(po.start + 1e-9)
            kc.append(pc.start)
        ko.append(po.end)
        kc.append(pc.end)
    tail = max(carrier_duration - car[-1].end, 0.0)
    ko += [ko[-1] + tail, ko[-1] + tail + 1.0]
    kc += [kc[-1] + tail, kc[-1] + tail + 1.0]
    return np.array(ko), np.array(kc), ko[-2], gaps


def _mute(y, sr, spans, ramp=0.005):
    """Silence ``spans`` (seconds) with short fades on either side."""
    t = np.arange(len(y)) / sr
    gain = np.ones(len(y))
    for a, b in spans:
        gain = np.minimum(gain, np.interp(t, [a - ramp, a, b, b + ramp], [1.0, 0.0, 0.0, 1.0]))
    return y * gain


def transplant(carrier, carrier_align, plan, pitch_cfg=None, contour="source", stats=None,
               carrier_median=None, carrier_track=None, fit=True, method="psola", refine=6,
               tolerance=0.1):
    """Render ``plan`` onto the carrier recording.

    ``contour="source"`` imposes the plan's retained source contour, warped
    phone by phone; ``contour="hpc"`` imposes a contour rebuilt from the
    plan's controls (requires ``stats``). ``carrier_median`` overrides the
    register taken from the carrier's voiced frames.
    """
    if contour not in ("source", "hpc"):
        raise HpcError(f"unknown contour option {contour!r}")
    if method not in ("psola", "wsola"):
        raise HpcError(f"unknown modification method {method!r}")
    check_parallel(plan.labels, carrier_align.labels)
    short = np.nonzero(plan.durations < MIN_PHONE_DURATION)[0]
    if len(short):
        raise TransplantError(
            f"phone {int(short[0])} planned at {plan.durations[short[0]] * 1000:.1f} ms, "
            f"below the {MIN_PHONE_DURATION * 1000:.0f} ms modification limit"
        )
    sr = carrier.sample_rate
    out_align = transplant_alignment(carrier_align, plan)

    out_k, car_k, out_end, pauses = _time_map(carrier_align, out_align, carrier.duration)
    out_len = int(round(out_end * sr))
    n_out = int(np.floor(out_len / sr / HOP_SECONDS + 1e-9)) + 1
    t_out = np.arange(n_out) * HOP_SECONDS
    if carrier_track is None:
        carrier_track = track_pitch(carrier, pitch_cfg)
    car_f0 = np.asarray(carrier_track.f0)

    if method == "wsola":
        # two passes: stretch, then analyse the stretched signal afresh since
        # its voicing and periods are what the pitch-synchronous stage sees
        audio = _mute(wsola(carrier.samples, sr, out_k, car_k, out_len), sr, pauses)
        ana_f0 = np.asarray(track_pitch(Waveform(np.clip(audio, -1, 1), sr), pitch_cfg).f0)
        ana_f0 = np.pad(ana_f0, (0, max(0, n_out - len(ana_f0))))[:n_out]
        voiced_out = ana_f0 > 0
    else:
        audio, ana_f0 = carrier.samples, car_f0
        j_car = np.round(np.interp(t_out, out_k, car_k) / HOP_SECONDS).astype(int)
        voiced_out = car_f0[np.clip(j_car, 0, len(car_f0) - 1)] > 0
        for a, b in pauses:
            voiced_out[(t_out >= a) & (t_out < b)] = False
    if not voiced_out.any():
        raise TransplantError("carrier has no voiced frames")
    if carrier_median is None:
        carrier_median = float(np.median(np.log(car_f0[car_f0 > 0])))

    if contour == "source":
        src_in, src_out = [], []
        for p, (s0, s1) in zip(out_align.content_phones, plan.source_phone_times):
            src_out += [p.start, p.end]
            src_in += [s0, s1]
        t_src = np.interp(t_out, src_out, src_in)
        frames = plan.contour.times
        target = np.interp(t_src, frames, plan.contour.log_f0)
    else:
        target = render_hpc_contour(plan, stats, out_align, t_out)

    def render(contour_):
        shift = carrier_median - float(np.median(contour_[voiced_out]))
        target_f0 = np.where(voiced_out, np.exp(contour_ + shift), 0.0)
        if method == "wsola":
            y = psola(audio, sr, ana_f0, target_f0, HOP_SECONDS)
        else:
            y = _mute(psola(audio, sr, ana_f0, target_f0, HOP_SECONDS, out_k, car_k, out_len),
                      sr, pauses)
        return Waveform(np.clip(y, -1.0, 1.0), sr)

    if not fit:
        return render(target)
    if plan.hpc.normalized and stats is None:
        raise StatsError("fitting the contour to a normalized plan needs the corpus stats")
    hier = plan.hierarchy
    raw = denormalize(plan.hpc, stats) if plan.hpc.normalized else plan.hpc.values
    scale = 3 * stats.sigma if stats is not None else np.ones(hier.n_columns)
    goal = raw.copy()
    best = bias = None
    for _ in range(refine + 1):
        contour_ = fit_contour(target, voiced_out, out_align, goal, hier, scale)
        out = render(contour_)
        # analysis by synthesis: what the tracker hears differs from the fitted
        # contour by a rendering bias; aim the next fit off by its running mean
        heard = continuous_log_f0(out, pitch_cfg)
        got = raw_hpc(heard, out_align, hier, heard.voiced_median())
        err = np.abs(got - raw) / scale
        score = (int(np.sum(np.any(err > tolerance, axis=1))),
                 float(np.sum(np.maximum(err - 0.5 * tolerance, 0.0) ** 2)))
        if best is None or score < best[0]:
            best = (score, out)
        fitted = ContinuousLogF0Track(contour_, voiced_out)
        new_bias = got - raw_hpc(fitted, out_align, hier, fitted.voiced_median())
        bias = new_bias if bias is None else 0.5 * (bias + new_bias)
        goal = raw - bias
    return best[1]


def transfer(source_wav, source_align, carrier, carrier_align, mode, hier, stats,
             pitch_cfg=None, contour="source"):
    """Plan from the source and transplant onto the carrier in one call.

    Returns ``(plan, output waveform, output alignment)``.
    """
    plan = plan_transfer(source_wav, source_align, carrier_align.labels, mode, hier, stats,
                         pitch_cfg)
    out = transplant(carrier, carrier_align, plan, pitch_cfg, contour, stats)
    return plan, out, transplant_alignment(carrier_align, plan)
