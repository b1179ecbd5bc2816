"""
Deeper hierarchies carry more prosody
=====================================

Render only what each preset's controls describe (no source contour)
and measure how far the result lands from the source. Each added level
should bring the rendering closer.
"""

from hpcprosody import evaluation, hpc, signal, synth
from hpcprosody import transfer as tr

LEVELS = ("sentence", "word", "syllable", "phone")

items = []
for speaker in ("m1", "f1", "m2", "f2"):
    for seed, text in enumerate(synth.SENTENCES):
        u = synth.synthesize(text, speaker, seed=seed, style="random")
        items.append((speaker, signal.continuous_log_f0(u.waveform), u.alignment))
eval_stats = hpc.corpus_stats_from_tracks(items, LEVELS)

text = synth.SENTENCES[2]
source = synth.synthesize(text, "u_mid")
carrier = synth.synthesize(text, "m1")

print("preset  hpc_distance  f0_correlation")
for preset in ("hpc0", "hpc1", "hpc2"):
    stats = hpc.corpus_stats_from_tracks(items, preset)
    plan = tr.plan_transfer(source.waveform, source.alignment, carrier.alignment.labels, "d1",
                            preset, stats)
    out = tr.transplant(carrier.waveform, carrier.alignment, plan, contour="hpc", stats=stats)
    r = evaluation.compare_prosody(source.waveform, source.alignment, out,
                                   tr.transplant_alignment(carrier.alignment, plan),
                                   LEVELS, eval_stats)
    print(f"{preset:6s}  {r.hpc_distance:12.3f}  {r.f0_correlation:14.3f}")
