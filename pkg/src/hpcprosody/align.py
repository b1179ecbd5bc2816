"""Forced-alignment ingestion and the sentence/word/syllable/phone tree.

Syllables are never read from disk: they are derived per word from the
ARPABET phone labels (one syllable per vowel, consonant clusters split by
onset maximization).
"""

import json
from dataclasses import dataclass

import numpy as np

from . import _io
from .errors import AlignmentError, SyllabificationError
from .textgrid import Interval, format_textgrid, parse_textgrid

LEVELS = ("sentence", "word", "syllable", "phone")
DEFAULT_SILENCE = frozenset({"", "sil", "sp", "spn"})
BOUNDARY_TOL = 0.001

VOWELS = frozenset(
    "AA AE AH AO AW AY EH ER EY IH IY OW OY UH UW".split()
)
CONSONANTS = frozenset(
    "B CH D DH F G HH JH K L M N NG P R S SH T TH V W Y Z ZH".split()
)
SONORANTS = VOWELS | frozenset("M N NG L R W Y".split())

# Legal English onsets in ARPABET (after Kahn 1976 / CMU syllabifier tables).
LEGAL_ONSETS = frozenset(
    [(c,) for c in CONSONANTS if c != "NG"]
    + [tuple(o.split()) for o in [
        "P R", "T R", "K R", "B R", "D R", "G R", "F R", "TH R", "SH R",
        "P L", "K L", "B L", "G L", "F L", "S L",
        "S P", "S T", "S K", "S M", "S N", "S F",
        "T W", "D W", "K W", "G W", "TH W", "S W", "HH W",
        "P Y", "B Y", "F Y", "M Y", "K Y", "V Y", "HH Y", "G Y", "N Y", "L Y",
        "S P R", "S T R", "S K R", "S P L", "S K L", "S K W", "S P Y", "S K Y",
    ]]
)


def base_phone(label):
    """Strip an ARPABET stress digit: ``AH0`` -> ``AH``."""
    return label[:-1] if label and label[-1] in "012" else label


def is_vowel(label):
    return base_phone(label.upper()) in VOWELS


@dataclass(frozen=True)
class PhoneInterval:
    label: str
    start: float
    end: float
    is_silence: bool = False

    def __post_init__(self):
        if not self.end > self.start:
            raise AlignmentError(f"phone {self.label!r}: end {self.end} <= start {self.start}")

    @property
    def duration(self):
        return self.end - self.start


@dataclass(frozen=True)
class Word:
    label: str
    start: float
    end: float
    syllables: tuple  # indices into UtteranceAlignment.syllables


@dataclass(frozen=True)
class Syllable:
    start: float
    end: float
    word: int
    phones: tuple  # indices into UtteranceAlignment.phones


@dataclass(frozen=True)
class UtteranceAlignment:
    """Nested interval tree.

    ``phones`` holds every phone including silences; ``phone_syllable[i]``
    is the parent syllable index of phone ``i`` or ``-1`` for silence.
    """

    phones: tuple
    words: tuple
    syllables: tuple
    sentence: tuple
    phone_syllable: tuple

    @property
    def content_index(self):
        """Indices (into ``phones``) of the non-silence phones, in order."""
        return tuple(i for i, s in enumerate(self.phone_syllable) if s >= 0)

    @property
    def content_phones(self):
        return tuple(self.phones[i] for i in self.content_index)

    @property
    def labels(self):
        return tuple(p.label for p in self.content_phones)

    @property
    def n_phones(self):
        return len(self.content_index)

    def level_intervals(self, level):
        """``[(start, end, content-phone positions)]`` for a hierarchy level.

        Positions index the non-silence phone sequence (matrix rows).
        """
        pos = {p: k for k, p in enumerate(self.content_index)}
        if level == "sentence":
            return [(self.sentence[0], self.sentence[1], np.arange(self.n_phones))]
        if level == "phone":
            return [(self.phones[p].start, self.phones[p].end, np.array([k]))
                    for p, k in pos.items()]
        if level == "syllable":
            return [(s.start, s.end, np.array([pos[p] for p in s.phones]))
                    for s in self.syllables]
        if level == "word":
            return [(w.start, w.end,
                     np.array([pos[p] for s in w.syllables for p in self.syllables[s].phones]))
                    for w in self.words]
        raise AlignmentError(f"unknown level {level!r}")

    def retimed(self, durations, gaps=None):
        """Copy with content-phone durations replaced.

        Silences are kept unless ``gaps`` is given: then the silence between
        content phones ``k`` and ``k + 1`` becomes a single pause of
        ``gaps[k]`` seconds (none when zero); leading and trailing silences
        are kept. Boundaries are accumulated from the original start of the
        first phone.
        """
        durations = np.asarray(durations, dtype=float)
        if len(durations) != self.n_phones:
            raise AlignmentError("duration count does not match non-silence phone count")
        if gaps is None:
            phones, phone_syllable = self.phones, self.phone_syllable
            syllables = self.syllables
        else:
            gaps = np.asarray(gaps, dtype=float)
            if len(gaps) != max(self.n_phones - 1, 0) or np.any(gaps < 0):
                raise AlignmentError("gaps must be n_phones - 1 non-negative durations")
            ci = self.content_index
            phones = list(self.phones[:ci[0]])
            phone_syllable = list(self.phone_syllable[:ci[0]])
            remap = {}
            for k, i in enumerate(ci):
                if k and gaps[k - 1] > 0:
                    between = self.phones[ci[k - 1] + 1:i]
                    label = between[0].label if between else "sp"
                    phones.append(PhoneInterval(label, 0.0, float(gaps[k - 1]), True))
                    phone_syllable.append(-1)
                remap[i] = len(phones)
                phones.append(self.phones[i])
                phone_syllable.append(self.phone_syllable[i])
            phones += self.phones[ci[-1] + 1:]
            phone_syllable += self.phone_syllable[ci[-1] + 1:]
            syllables = tuple(Syllable(sy.start, sy.end, sy.word, tuple(remap[q] for q in sy.phones))
                              for sy in self.syllables)
        new = []
        t = self.phones[0].start
        k = 0
        for p, syl in zip(phones, phone_syllable):
            if syl >= 0:
                d = float(durations[k])
                k += 1
            else:
                d = p.duration
            new.append(PhoneInterval(p.label, t, t + d, p.is_silence))
            t += d
        return _assemble(new, tuple(phone_syllable), syllables, self.words)

    def to_dict(self):
        return {
            "sample_rate_independent": True,
            "phones": [{"label": p.label, "start": p.start, "end": p.end} for p in self.phones],
            "words": [{"label": w.label, "start": w.start, "end": w.end} for w in self.words],
        }


def _assemble(phones, phone_syllable, syllables, words):
    syl_new = []
    for s in syllables:
        syl_new.append(Syllable(phones[s.phones[0]].start, phones[s.phones[-1]].end, s.word, s.phones))
    words_new = []
    for w in words:
        words_new.append(Word(w.label, syl_new[w.syllables[0]].start,
                              syl_new[w.syllables[-1]].end, w.syllables))
    content = [p for p, s in zip(phones, phone_syllable) if s >= 0]
    return UtteranceAlignment(tuple(phones), tuple(words_new), tuple(syl_new),
                              (content[0].start, content[-1].end), tuple(phone_syllable))


def syllabify(phones_of_word):
    """Group a word's phones into syllables.

    Accepts ``PhoneInterval`` objects or plain labels. Returns a list of
    ``(start, stop)`` index ranges. A word without a vowel becomes a single
    syllable.
    """
    labels = [p.label if isinstance(p, PhoneInterval) else p for p in phones_of_word]
    if not labels:
        raise SyllabificationError("cannot syllabify an empty word")
    bases = []
    for lab in labels:
        b = base_phone(lab.upper())
        if b not in VOWELS and b not in CONSONANTS:
            raise SyllabificationError(f"unknown phone label {lab!r}")
        bases.append(b)
    nuclei = [i for i, b in enumerate(bases) if b in VOWELS]
    if not nuclei:
        return [(0, len(labels))]
    starts = [0]
    for a, b in zip(nuclei, nuclei[1:]):
        cluster = bases[a + 1:b]
        split = b
        for k in range(len(cluster), 0, -1):
            if tuple(cluster[-k:]) in LEGAL_ONSETS:
                split = b - k
                break
        starts.append(split)
    bounds = starts + [len(labels)]
    return [(bounds[i], bounds[i + 1]) for i in range(len(starts))]


def build_alignment(words, phones, silence=DEFAULT_SILENCE, tol=BOUNDARY_TOL):
    """Assemble an :class:`UtteranceAlignment` from word and phone tiers.

    Both tiers are sequences of objects with ``xmin``/``xmax``/``text``
    (TextGrid intervals) or ``start``/``end``/``label`` attributes.
    """
    silence = frozenset(silence)

    def norm(iv):
        if isinstance(iv, Interval):
            return iv.text, float(iv.xmin), float(iv.xmax)
        if isinstance(iv, dict):
            return iv["label"], float(iv["start"]), float(iv["end"])
        return iv.label, float(iv.start), float(iv.end)

    phone_list = []
    for iv in phones:
        lab, lo, hi = norm(iv)
        phone_list.append(PhoneInterval(lab, lo, hi, lab.strip().lower() in silence))
    phone_list.sort(key=lambda p: p.start)
    for a, b in zip(phone_list, phone_list[1:]):
        if b.start < a.end - tol:
            raise AlignmentError(f"phones {a.label!r} and {b.label!r} overlap")
    word_list = []
    for iv in words:
        lab, lo, hi = norm(iv)
        if lab.strip().lower() in silence:
            continue
        if hi <= lo:
            raise AlignmentError(f"word {lab!r}: end <= start")
        word_list.append((lab, lo, hi))
    word_list.sort(key=lambda w: w[1])
    for a, b in zip(word_list, word_list[1:]):
        if b[1] < a[2] - tol:
            raise AlignmentError(f"words {a[0]!r} and {b[0]!r} overlap")

    if not any(not p.is_silence for p in phone_list):
        raise AlignmentError("empty utterance: no non-silence phones")

    members = [[] for _ in word_list]
    for i, p in enumerate(phone_list):
        if p.is_silence:
            continue
        owner = [w for w, (_, lo, hi) in enumerate(word_list)
                 if p.start >= lo - tol and p.end <= hi + tol]
        if len(owner) != 1:
            straddle = [w for w, (_, lo, hi) in enumerate(word_list)
                        if p.start < hi and p.end > lo]
            if straddle:
                raise AlignmentError(
                    f"phone {i} {p.label!r} [{p.start}, {p.end}] straddles a word boundary"
                )
            raise AlignmentError(f"phone {i} {p.label!r} [{p.start}, {p.end}] is not covered by any word")
        members[owner[0]].append(i)

    phone_syllable = [-1] * len(phone_list)
    syllables, word_objs = [], []
    for w, (lab, lo, hi) in enumerate(word_list):
        idx = members[w]
        if not idx:
            raise AlignmentError(f"word {w} {lab!r} contains no phones")
        syl_ids = []
        for a, b in syllabify([phone_list[i] for i in idx]):
            group = tuple(idx[a:b])
            for i in group:
                phone_syllable[i] = len(syllables)
            syl_ids.append(len(syllables))
            syllables.append(Syllable(phone_list[group[0]].start, phone_list[group[-1]].end, w, group))
        word_objs.append(Word(lab, lo, hi, tuple(syl_ids)))
    content = [p for p in phone_list if not p.is_silence]
    return UtteranceAlignment(tuple(phone_list), tuple(word_objs), tuple(syllables),
                              (content[0].start, content[-1].end), tuple(phone_syllable))


def _tier(tiers, *names):
    lower = {k.lower(): k for k in tiers}
    for n in names:
        if n in lower:
            return tiers[lower[n]]
    # MFA multi-speaker output names tiers "<speaker> - words"
    for n in names:
        for k in tiers:
            if k.lower().endswith(" - " + n):
                return tiers[k]
    raise AlignmentError(f"TextGrid has no {names[0]!r} tier (found {sorted(tiers)})")


def alignment_from_textgrid(text, silence=DEFAULT_SILENCE):
    tiers = parse_textgrid(text)
    return build_alignment(_tier(tiers, "words", "word"), _tier(tiers, "phones", "phone"), silence)


def alignment_to_textgrid(a, xmax=None):
    """``words`` and ``phones`` tiers; gaps between words become empty intervals."""
    xmin = a.phones[0].start
    if xmax is None or xmax < a.phones[-1].end + BOUNDARY_TOL:
        xmax = a.phones[-1].end
    phones = [Interval(p.start, p.end, p.label) for p in a.phones]
    if phones[0].xmin > 0:
        phones.insert(0, Interval(0.0, phones[0].xmin, ""))
    if xmax > phones[-1].xmax:
        phones.append(Interval(phones[-1].xmax, xmax, ""))
    words, t = [], phones[0].xmin
    for w in a.words:
        if w.start > t:
            words.append(Interval(t, w.start, ""))
        words.append(Interval(w.start, w.end, w.label))
        t = w.end
    if xmax > t:
        words.append(Interval(t, xmax, ""))
    return format_textgrid({"words": words, "phones": phones}, min(0.0, xmin), xmax)


def alignment_to_json(a):
    return _io.dumps(a.to_dict()) + "\n"


def alignment_from_json(text, silence=DEFAULT_SILENCE):
    data = json.loads(text)
    if "phones" not in data or "words" not in data:
        raise AlignmentError("alignment JSON needs 'phones' and 'words' arrays")
    return build_alignment(data["words"], data["phones"], silence)


def load_alignment(path, silence=DEFAULT_SILENCE):
    """Read a TextGrid or the toolkit JSON alignment, chosen by extension."""
    path = str(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.lower().endswith(".json"):
        return alignment_from_json(raw.decode("utf-8"), silence)
    return alignment_from_textgrid(raw, silence)
