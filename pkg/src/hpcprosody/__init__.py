"""Hierarchical prosody controls: extraction, normalization and parallel transfer."""

from .align import (PhoneInterval, Syllable, UtteranceAlignment, Word, alignment_from_json,
                    alignment_from_textgrid, alignment_to_json, alignment_to_textgrid,
                    build_alignment, load_alignment, syllabify)
from .errors import (AlignmentError, HpcError, MeasurementError, PhoneMismatchError, PitchError,
                     StatsError, SyllabificationError, TextGridError, TransplantError,
                     UnvoicedUtteranceError, WavFormatError)
from .evaluation import SanityWarning, SimilarityReport, alignment_sanity, compare_prosody
from .hpc import (PRESETS, CorpusStats, HierarchySpec, HpcMatrix, IntervalMeasurements,
                  absolute_blocks, build_residual, compute_corpus_stats, corpus_stats_from_tracks,
                  denormalize, extract_hpc, extract_hpc_from_track, hierarchy, measure_interval,
                  normalize, propagate, raw_hpc)
from .signal import (ContinuousLogF0Track, PitchConfig, PitchTrack, Waveform, continuous_log_f0,
                     interpolate_unvoiced, load_wav, track_pitch, write_wav)
from .textgrid import Interval, format_textgrid, parse_textgrid, read_textgrid
from .transfer import (TransferMode, TransferPlan, plan_transfer, predict_durations_baseline,
                       transplant, transplant_alignment)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
