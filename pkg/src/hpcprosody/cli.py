"""Command-line interface.

Every command reads files, writes files (atomically) or prints a report,
and exits 0 on success, 2 on input or contract errors and 1 on internal
errors. Outputs depend only on the inputs and flags.
"""

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import _io
from .align import DEFAULT_SILENCE, alignment_to_textgrid, load_alignment
from .errors import HpcError, StatsError
from .evaluation import alignment_sanity, compare_prosody
from .hpc import PRESETS, CorpusStats, corpus_stats_from_tracks, extract_hpc_from_track, hierarchy
from .signal import PitchConfig, continuous_log_f0, load_wav, write_wav
from .transfer import TransferPlan, plan_transfer, transplant, transplant_alignment

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2
MANIFEST_FIELDS = ("speaker_id", "wav_path", "textgrid_path")
PAIR_FIELDS = ("a_wav", "a_alignment", "b_wav", "b_alignment")


@dataclass(frozen=True)
class Config:
    hierarchy: tuple = PRESETS["hpc2"].levels
    mode: str = "d1"
    pitch: PitchConfig = field(default_factory=PitchConfig)
    silence: frozenset = DEFAULT_SILENCE
    stats_path: str = None
    speaker: str = None
    jobs: int = 1
    format: str = None

    @classmethod
    def from_args(cls, args):
        return cls(
            hierarchy=hierarchy(getattr(args, "hierarchy", None) or "hpc2").levels,
            mode=getattr(args, "mode", None) or "d1",
            stats_path=getattr(args, "stats", None),
            speaker=getattr(args, "speaker", None),
            jobs=max(1, getattr(args, "jobs", None) or 1),
            format=getattr(args, "format", None),
        )

    def stats(self, required=False):
        if self.stats_path is None:
            if required:
                raise StatsError("this command needs --stats")
            return None
        stats = CorpusStats.load(self.stats_path)
        if stats.hierarchy.levels != self.hierarchy:
            raise StatsError(f"{self.stats_path}: stats are for hierarchy "
                             f"{','.join(stats.hierarchy.levels)}, not {','.join(self.hierarchy)}")
        return stats


def _sibling(path, suffix):
    root, _ = os.path.splitext(path)
    return root + suffix


def _write_wav(path, w):
    buf = io.BytesIO()
    write_wav(buf, w)
    _io.atomic_write(path, buf.getvalue())


def _emit(text, out_path=None):
    if out_path is None:
        sys.stdout.write(text)
    else:
        _io.atomic_write(out_path, text)


def _read_rows(path, fields):
    """CSV rows with ``fields`` columns; a header row naming them is optional.

    Relative paths resolve against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and tuple(c.strip() for c in rows[0]) == fields:
        rows = rows[1:]
    out = []
    for n, r in enumerate(rows, 1):
        if len(r) != len(fields):
            raise HpcError(f"{path}: row {n} has {len(r)} fields, expected {len(fields)} "
                           f"({','.join(fields)})")
        out.append(tuple(c.strip() for c in r))
    return out, base


def _resolve(base, p):
    return p if os.path.isabs(p) else os.path.join(base, p)


def cmd_extract(args, cfg):
    w = load_wav(args.wav)
    a = load_alignment(args.alignment, cfg.silence)
    for warning in alignment_sanity(a):
        print(f"warning: {args.alignment}: {warning}", file=sys.stderr)
    track = continuous_log_f0(w, cfg.pitch)
    P = extract_hpc_from_track(track, a, cfg.hierarchy, cfg.stats(), cfg.speaker)
    _emit(P.to_json() if cfg.format == "json" else P.to_csv(), args.output)


def _track_item(item):
    speaker, wav, tg, silence, pitch = item
    a = load_alignment(tg, silence)
    return speaker, continuous_log_f0(load_wav(wav), pitch), a


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def cmd_stats(args, cfg):
    rows, base = _read_rows(args.manifest, MANIFEST_FIELDS)
    entries = [(spk, _resolve(base, wav), _resolve(base, tg)) for spk, wav, tg in rows]
    missing = [p for _, wav, tg in entries for p in (wav, tg) if not os.path.isfile(p)]
    if missing:
        raise HpcError("unreadable manifest entries: " + ", ".join(missing))
    if len(entries) < 2:
        raise StatsError(f"corpus statistics need at least 2 utterances, manifest lists {len(entries)}")
    items = _map(_track_item, [(s, w, t, cfg.silence, cfg.pitch) for s, w, t in entries], cfg.jobs)
    stats = corpus_stats_from_tracks(items, cfg.hierarchy)
    _io.atomic_write(args.output, stats.to_json())


def cmd_plan(args, cfg):
    src = load_wav(args.source_wav)
    src_a = load_alignment(args.source_alignment, cfg.silence)
    target = load_alignment(args.target_alignment, cfg.silence).labels
    plan = plan_transfer(src, src_a, target, cfg.mode, cfg.hierarchy, cfg.stats(), cfg.pitch)
    _io.atomic_write(args.output, plan.to_json())


def _transplant_outputs(out_path, carrier, carrier_a, plan, cfg, stats):
    out = transplant(carrier, carrier_a, plan, cfg.pitch, stats=stats)
    out_a = transplant_alignment(carrier_a, plan)
    _write_wav(out_path, out)
    _io.atomic_write(_sibling(out_path, ".TextGrid"), alignment_to_textgrid(out_a, out.duration))


def cmd_transplant(args, cfg):
    carrier = load_wav(args.carrier_wav)
    carrier_a = load_alignment(args.carrier_alignment, cfg.silence)
    plan = TransferPlan.load(args.plan)
    stats = CorpusStats.load(cfg.stats_path) if cfg.stats_path else None
    if stats is None and plan.hpc.normalized:
        raise StatsError("a normalized plan needs --stats")
    if stats is not None and stats.hierarchy != plan.hierarchy:
        raise StatsError("plan and stats hierarchies differ")
    _transplant_outputs(args.output, carrier, carrier_a, plan, cfg, stats)


def cmd_transfer(args, cfg):
    stats = cfg.stats(required=True)
    src = load_wav(args.source_wav)
    src_a = load_alignment(args.source_alignment, cfg.silence)
    carrier = load_wav(args.carrier_wav)
    carrier_a = load_alignment(args.carrier_alignment, cfg.silence)
    plan = plan_transfer(src, src_a, carrier_a.labels, cfg.mode, cfg.hierarchy, stats, cfg.pitch)
    _io.atomic_write(_sibling(args.output, ".plan.json"), plan.to_json())
    _transplant_outputs(args.output, carrier, carrier_a, plan, cfg, stats)


def _compare_item(item):
    a_wav, a_tg, b_wav, b_tg, levels, stats, silence, pitch = item
    return compare_prosody(load_wav(a_wav), load_alignment(a_tg, silence), load_wav(b_wav),
                           load_alignment(b_tg, silence), levels, stats, pitch)


def cmd_compare(args, cfg):
    report = _compare_item((args.a_wav, args.a_alignment, args.b_wav, args.b_alignment,
                            cfg.hierarchy, cfg.stats(required=True), cfg.silence, cfg.pitch))
    if cfg.format == "json":
        _emit(report.to_json())
    elif cfg.format == "csv":
        _emit(report.to_csv())
    else:
        _emit(report.to_text())


def cmd_batch(args, cfg):
    rows, base = _read_rows(args.pairs, PAIR_FIELDS)
    if not rows:
        raise HpcError(f"{args.pairs}: no utterance pairs")
    stats = cfg.stats(required=True)
    items = [tuple(_resolve(base, p) for p in r) + (cfg.hierarchy, stats, cfg.silence, cfg.pitch)
             for r in rows]
    reports = _map(_compare_item, items, cfg.jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(PAIR_FIELDS) + reports[0].csv_header())
    for r, rep in zip(rows, reports):
        w.writerow(list(r) + rep.csv_row())
    _io.atomic_write(args.output, buf.getvalue())


def _hierarchy_arg(text):
    try:
        return ",".join(hierarchy(text).levels)
    except HpcError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    p = argparse.ArgumentParser(prog="hpcprosody",
                                description="Hierarchical prosody control extraction and transfer.")
    sub = p.add_subparsers(dest="command", required=True)

    def hier(sp):
        sp.add_argument("--hierarchy", type=_hierarchy_arg, default="hpc2", metavar="SPEC",
                        help="hpc0, hpc1, hpc2 or a comma list such as sentence,word,phone")

    def stats(sp, required=False):
        sp.add_argument("--stats", metavar="PATH", required=required,
                        help="corpus statistics JSON from the stats command")

    sp = sub.add_parser("extract", help="HPC matrix of one utterance")
    sp.add_argument("wav")
    sp.add_argument("alignment", help="TextGrid (or alignment JSON)")
    sp.add_argument("output", nargs="?", help="output file (default: stdout)")
    hier(sp)
    stats(sp)
    sp.add_argument("--speaker", metavar="ID", help="seen speaker id; omit for unseen mode")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("stats", help="corpus statistics from a manifest CSV")
    sp.add_argument("manifest", help="CSV rows speaker_id,wav_path,textgrid_path")
    sp.add_argument("output")
    hier(sp)
    sp.add_argument("--jobs", type=int, default=1, metavar="N")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("plan", help="transfer plan from a source recording")
    sp.add_argument("source_wav")
    sp.add_argument("source_alignment")
    sp.add_argument("target_alignment", help="alignment giving the target phone sequence")
    sp.add_argument("output", help="plan JSON")
    hier(sp)
    stats(sp)
    sp.add_argument("--mode", choices=("d0", "d1"), default="d1")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("transplant", help="render a plan onto a carrier recording")
    sp.add_argument("carrier_wav")
    sp.add_argument("carrier_alignment")
    sp.add_argument("plan")
    sp.add_argument("output", help="output WAV; its TextGrid is written alongside")
    stats(sp)
    sp.set_defaults(func=cmd_transplant)

    sp = sub.add_parser("transfer", help="plan and transplant in one step")
    sp.add_argument("source_wav")
    sp.add_argument("source_alignment")
    sp.add_argument("carrier_wav")
    sp.add_argument("carrier_alignment")
    sp.add_argument("output", help="output WAV; plan JSON and TextGrid are written alongside")
    hier(sp)
    stats(sp, required=True)
    sp.add_argument("--mode", choices=("d0", "d1"), default="d1")
    sp.set_defaults(func=cmd_transfer)

    sp = sub.add_parser("compare", help="prosody similarity of two parallel recordings")
    sp.add_argument("a_wav")
    sp.add_argument("a_alignment")
    sp.add_argument("b_wav")
    sp.add_argument("b_alignment")
    hier(sp)
    stats(sp, required=True)
    sp.add_argument("--format", choices=("json", "csv"), help="default: text table")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("batch", help="compare many pairs; one CSV row per pair")
    sp.add_argument("pairs", help="CSV rows a_wav,a_alignment,b_wav,b_alignment")
    sp.add_argument("output", help="CSV report")
    hier(sp)
    stats(sp, required=True)
    sp.add_argument("--jobs", type=int, default=1, metavar="N")
    sp.set_defaults(func=cmd_batch)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args, Config.from_args(args))
    except (HpcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort contract for pipelines
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
