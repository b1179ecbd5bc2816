"""
HPC matrix of one utterance
===========================

Synthesize a sentence with known alignment, track its pitch and turn it
into the phone-by-control matrix. No corpus statistics are used here, so
the matrix is the raw residual form.
"""

import numpy as np

from hpcprosody import hpc, signal, synth

u = synth.synthesize("my name is anna", "f1")
print("phones:", " ".join(u.alignment.labels))

# pitch track with unvoiced gaps bridged in the log domain
track = signal.continuous_log_f0(u.waveform)
print(f"{len(track)} frames, median {np.exp(track.voiced_median()):.1f} Hz")

P = hpc.extract_hpc_from_track(track, u.alignment, "hpc2")
print(P.values.shape, "normalized:", P.normalized)

# first group: sentence controls, the same on every row
# later groups: what the word and phone levels add on top
np.set_printoptions(precision=3, suppress=True, linewidth=120)
print(P.hierarchy.columns)
print(P.values[:4])

# summing the groups back gives each level's own measurements
sentence, word, phone = hpc.absolute_blocks(P.values, P.hierarchy)
print("phone-level log durations:", phone[:, 0])
