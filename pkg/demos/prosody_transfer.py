"""
Prosody transfer from an unseen speaker
=======================================

A low-pitched speaker outside the statistics corpus reads a sentence.
Its prosody is moved onto a high-pitched carrier reading the same text,
once with the source's phone durations (d1) and once with predicted ones
(d0). The carrier keeps its register; the intonation shape follows the
source.
"""

import sys
from pathlib import Path

import numpy as np

from hpcprosody import evaluation, hpc, signal, synth
from hpcprosody import transfer as tr

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out_dir.mkdir(exist_ok=True)

items = []
for speaker in ("m1", "f1", "m2", "f2"):
    for seed, text in enumerate(synth.SENTENCES):
        u = synth.synthesize(text, speaker, seed=seed, style="random")
        items.append((speaker, signal.continuous_log_f0(u.waveform), u.alignment))
stats = hpc.corpus_stats_from_tracks(items, "hpc2")

text = synth.SENTENCES[1]
source = synth.synthesize(text, "u_low")
carrier = synth.synthesize(text, "f1")
synth.save(source, out_dir / "source.wav", out_dir / "source.TextGrid")
synth.save(carrier, out_dir / "carrier.wav", out_dir / "carrier.TextGrid")

for mode in ("d1", "d0"):
    plan, out, out_align = tr.transfer(source.waveform, source.alignment, carrier.waveform,
                                       carrier.alignment, mode, "hpc2", stats)
    signal.write_wav(out_dir / f"transfer_{mode}.wav", out)
    heard = signal.continuous_log_f0(out)
    report = evaluation.compare_prosody(source.waveform, source.alignment, out, out_align,
                                        "hpc2", stats, b_track=heard)
    print(f"--- {mode}: {plan.mode.name}")
    print(report.to_text())
    print(f"output median {np.exp(heard.voiced_median()):.0f} Hz, "
          f"carrier {np.exp(signal.continuous_log_f0(carrier.waveform).voiced_median()):.0f} Hz, "
          f"source {np.exp(signal.continuous_log_f0(source.waveform).voiced_median()):.0f} Hz")

print("wrote", *sorted(p.name for p in out_dir.iterdir()))
