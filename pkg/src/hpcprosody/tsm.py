"""Time-scale modification (WSOLA) and pitch-synchronous f0 imposition.

Both routines take their time maps as monotone piecewise-linear knot
arrays so that every phone can carry its own stretch factor.
"""

import numpy as np

WSOLA_WINDOW = 0.025
WSOLA_TOLERANCE = 0.010
UNVOICED_PERIOD = 0.01


def wsola(x, sr, out_knots, in_knots, out_length=None, window=WSOLA_WINDOW,
          tolerance=WSOLA_TOLERANCE):
    """Waveform-similarity overlap-add along a piecewise-linear time map.

    ``out_knots`` and ``in_knots`` (seconds, both increasing) define which
    input instant should sound at each output instant. Frames of
    ``window`` seconds are laid out at 50 % overlap; each input frame is
    picked within +/- ``tolerance`` of its nominal position so that it best
    continues the previously copied frame.
    """
    x = np.asarray(x, dtype=float)
    n = int(round(window * sr))
    n += n % 2
    hop = n // 2
    delta = int(round(tolerance * sr))
    if out_length is None:
        out_length = int(round(out_knots[-1] * sr))
    win = np.hanning(n + 1)[:n]
    pad = n + delta
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad + n)])
    n_frames = out_length // hop + 2
    y = np.zeros(n_frames * hop + n)
    wsum = np.zeros_like(y)

    prev = None
    for m in range(n_frames):
        out_center = m * hop / sr  # window center once the leading hop is trimmed
        in_center = np.interp(out_center, out_knots, in_knots)
        nominal = int(round(in_center * sr)) - hop + pad
        nominal = min(max(nominal, delta), len(xp) - n - delta - 1)
        if prev is None:
            pos = nominal
        else:
            natural = xp[prev + hop:prev + hop + n]
            seg = xp[nominal - delta:nominal + delta + n]
            score = np.correlate(seg, natural * win, mode="valid")
            # periodic input gives near-equal peaks one period apart; among
            # those prefer the one closest to the nominal position
            lag = np.abs(np.arange(len(score)) - delta)
            score = score - 1e-9 * np.max(np.abs(score)) * lag
            pos = nominal - delta + int(np.argmax(score))
        y[m * hop:m * hop + n] += win * xp[pos:pos + n]
        wsum[m * hop:m * hop + n] += win
        prev = pos
    # output frame m covers output samples [m*hop, m*hop+n) shifted by -hop
    y = y[hop:hop + out_length]
    wsum = wsum[hop:hop + out_length]
    return y / np.maximum(wsum, 1e-3)


def _marks(voiced_at, period_at, length, sr):
    """Sample positions spaced by the local period."""
    marks = []
    t = 0.0
    while t < length:
        marks.append(t)
        if voiced_at(t):
            # period measured at its own midpoint, not at its start
            p = period_at(t)
            for _ in range(2):
                mid = min(t + 0.5 * p, length - 1)
                if voiced_at(mid):
                    p = period_at(mid)
        else:
            p = UNVOICED_PERIOD * sr
        t += max(p, 0.002 * sr)
    return np.array(marks)


def psola(x, sr, analysis_f0, target_f0, hop_seconds, out_knots=None, in_knots=None,
          out_length=None):
    """Impose ``target_f0`` on ``x`` by time-domain pitch-synchronous OLA.

    ``analysis_f0`` (on ``x``'s frame grid) and ``target_f0`` (on the output
    grid) are per-frame Hz arrays, 0 = unvoiced, ``hop_seconds`` apart.
    Without knots the duration is preserved. With ``out_knots``/``in_knots``
    (seconds, as for :func:`wsola`) time-scaling happens in the same pass:
    each synthesis mark takes the analysis grain nearest to the input
    instant its output instant maps to.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    n_out = n if out_length is None else int(out_length)
    fa = np.asarray(analysis_f0, dtype=float)
    ft = np.asarray(target_f0, dtype=float)
    step = hop_seconds * sr

    def at(arr, s):
        return arr[min(max(int(round(s / step)), 0), len(arr) - 1)]

    if out_knots is None:
        def to_in(s):
            return s
    else:
        ok_, ik_ = np.asarray(out_knots) * sr, np.asarray(in_knots) * sr

        def to_in(s):
            return float(np.interp(s, ok_, ik_))

    voiced = fa > 0
    frame_t = np.arange(len(fa)) * step
    # voiced f0 interpolated through gaps for period lookup
    if voiced.any():
        fa_fill = np.interp(frame_t, frame_t[voiced], fa[voiced])
    else:
        fa_fill = np.full_like(fa, 1.0 / UNVOICED_PERIOD)
    ana = _marks(lambda s: at(fa, s) > 0, lambda s: sr / at(fa_fill, s), n, sr)
    syn = _marks(lambda s: at(ft, s) > 0 and at(fa, to_in(s)) > 0, lambda s: sr / at(ft, s),
                 n_out, sr)

    ana_period = np.diff(np.append(ana, n))
    syn_period = np.diff(np.append(syn, n_out))
    pad = int(0.05 * sr)
    y = np.zeros(n_out + pad)
    xp = np.concatenate([x, np.zeros(pad)])
    for j, s in enumerate(syn):
        u = to_in(s)
        if at(ft, s) > 0 and at(fa, u) > 0:
            k = int(np.searchsorted(ana, u))
            if k >= len(ana) or (k > 0 and u - ana[k - 1] < ana[k] - u):
                k -= 1
            a = ana[k]
            half = max(int(round(max(ana_period[max(k - 1, 0)], ana_period[k]))), 16)
        else:
            # noise: read at the mapped instant, not at a reused mark
            a = u
            half = int(round(UNVOICED_PERIOD * sr))
        # hann grains of length 2*half spaced by the synthesis period add up
        # to half/period on average; rescale to keep the level unchanged
        w = np.hanning(2 * half + 1) * (min(syn_period[j], 2 * half) / half)
        lo_a = int(round(a)) - half
        lo_s = int(round(s)) - half
        idx_a = np.arange(lo_a, lo_a + 2 * half + 1)
        idx_s = np.arange(lo_s, lo_s + 2 * half + 1)
        ok = (idx_a >= 0) & (idx_a < len(xp)) & (idx_s >= 0) & (idx_s < len(y))
        grain = xp[np.clip(idx_a, 0, len(xp) - 1)] * ok
        if a == u and j % 2 and j + 1 < len(syn) and to_in(syn[j + 1]) - u < 0.8 * syn_period[j]:
            # stretched noise: overlapping reads would correlate at a fixed
            # lag and sound (and track) as voiced; reversing every other
            # grain breaks that
            grain = grain[::-1]
        y[idx_s[ok]] += w[ok] * grain[ok]
    return y[:n_out]
