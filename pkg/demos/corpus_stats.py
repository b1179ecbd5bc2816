"""
Corpus statistics and normalization
===================================

Pool the controls of a small synthetic corpus, then check that the
normalized training rows have zero mean and a standard deviation of 1/3.
"""

import numpy as np

from hpcprosody import hpc, signal, synth

items = []
for speaker in ("m1", "f1", "m2", "f2"):
    for seed, text in enumerate(synth.SENTENCES[:4]):
        u = synth.synthesize(text, speaker, seed=seed, style="random")
        items.append((speaker, signal.continuous_log_f0(u.waveform), u.alignment))

stats = hpc.corpus_stats_from_tracks(items, "hpc1")
for spk, med in stats.speaker_median_logf0.items():
    print(f"{spk}: median {np.exp(med):6.1f} Hz")

rows = np.vstack([hpc.extract_hpc_from_track(t, a, "hpc1", stats, speaker=s).values
                  for s, t, a in items])
print("rows:", rows.shape[0])
print("max |column mean|:", np.abs(rows.mean(axis=0)).max())
print("max |column std - 1/3|:", np.abs(rows.std(axis=0) - 1 / 3).max())

# the per-label duration table feeds the baseline duration predictor
for label in ("AH0", "N", "EY1"):
    print(f"{label}: {stats.phone_durations[label] * 1000:.0f} ms")
