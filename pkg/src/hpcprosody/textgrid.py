"""Praat TextGrid reading and writing (long and short text formats).

Both text formats carry the same value sequence; the long format only adds
``key =`` labels and ``[n]:`` section markers. The reader therefore drops
those decorations and walks a flat token stream of strings, numbers and
``<exists>`` flags, which makes the two formats parse identically.
"""

import codecs
import re
from dataclasses import dataclass

from .errors import TextGridError


@dataclass(frozen=True)
class Interval:
    xmin: float
    xmax: float
    text: str


_TOKEN = re.compile(
    r'"(?P<str>(?:[^"]|"")*)"'
    r"|(?P<flag><exists>|<absent>)"
    r"|(?<![\w.\]])(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)(?![\w.])"
    r"|(?P<index>\[\s*\d*\s*\]\s*:?)"
)


def decode(data):
    """Decode TextGrid bytes: UTF-16 (either byte order) or UTF-8, BOM aware."""
    if isinstance(data, str):
        return data[1:] if data.startswith("﻿") else data
    if data.startswith(codecs.BOM_UTF16_LE) or data.startswith(codecs.BOM_UTF16_BE):
        return data.decode("utf-16")
    if data.startswith(codecs.BOM_UTF8):
        return data[len(codecs.BOM_UTF8):].decode("utf-8")
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TextGridError(f"undecodable TextGrid: {exc}") from exc


def _tokens(text):
    out = []
    for m in _TOKEN.finditer(text):
        if m.group("str") is not None:
            out.append(("str", m.group("str").replace('""', '"')))
        elif m.group("flag") is not None:
            out.append(("flag", m.group("flag")))
        elif m.group("num") is not None:
            out.append(("num", float(m.group("num"))))
    return out


class _Stream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def take(self, kind, what):
        if self.pos >= len(self.tokens):
            raise TextGridError(f"truncated file: expected {what}")
        k, v = self.tokens[self.pos]
        if k != kind:
            raise TextGridError(f"malformed TextGrid: expected {what}, found {v!r}")
        self.pos += 1
        return v

    def count(self, what):
        v = self.take("num", what)
        if v != int(v) or v < 0:
            raise TextGridError(f"malformed TextGrid: {what} must be a non-negative integer")
        return int(v)

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def done(self):
        return self.pos >= len(self.tokens)


def _count_mismatch(kind, name, n):
    return TextGridError(f"tier {name!r}: declared {kind} count {n} does not match the {kind}s present")


def _short_tier(kind, name, n, found):
    return TextGridError(f"truncated file: tier {name!r} declares {n} {kind}s, found {found}")


def parse_textgrid(text):
    """Parse a TextGrid into ``{tier name: [Interval, ...]}``.

    ``text`` may be ``str`` or raw ``bytes``. Point tiers are skipped.
    Labels are kept verbatim, including empty strings.
    """
    s = _Stream(_tokens(decode(text)))
    try:
        file_type = s.take("str", "file type")
        obj_class = s.take("str", "object class")
    except TextGridError as exc:
        raise TextGridError("malformed header") from exc
    if file_type != "ooTextFile" or obj_class != "TextGrid":
        raise TextGridError("malformed header: not an ooTextFile TextGrid")
    s.take("num", "xmin")
    s.take("num", "xmax")
    flag = s.take("flag", "tiers flag")
    if flag != "<exists>":
        if not s.done():
            raise TextGridError("malformed TextGrid: data after <absent> tiers flag")
        return {}
    n_tiers = s.count("tier count")
    tiers = {}
    prev = None
    for _ in range(n_tiers):
        if prev is not None and s.peek() == "num":
            raise _count_mismatch(*prev)
        cls = s.take("str", "tier class")
        name = s.take("str", "tier name")
        s.take("num", "tier xmin")
        s.take("num", "tier xmax")
        n = s.count("interval count")
        if cls == "IntervalTier":
            intervals = []
            for i in range(n):
                if s.peek() == "str":
                    raise _count_mismatch("interval", name, n)
                if s.done():
                    raise _short_tier("interval", name, n, i)
                lo = s.take("num", f"xmin of interval {i + 1} in tier {name!r}")
                hi = s.take("num", f"xmax of interval {i + 1} in tier {name!r}")
                label = s.take("str", f"text of interval {i + 1} in tier {name!r}")
                if hi <= lo:
                    raise TextGridError(
                        f"tier {name!r} interval {i + 1}: xmax {hi} <= xmin {lo}"
                    )
                intervals.append(Interval(lo, hi, label))
            tiers[name] = intervals
            prev = ("interval", name, n)
        elif cls in ("TextTier", "PointTier"):
            prev = ("point", name, n)
            for i in range(n):
                if s.peek() == "str":
                    raise _count_mismatch("point", name, n)
                if s.done():
                    raise _short_tier("point", name, n, i)
                s.take("num", f"time of point {i + 1} in tier {name!r}")
                s.take("str", f"mark of point {i + 1} in tier {name!r}")
        else:
            raise TextGridError(f"unknown tier class {cls!r}")
    if not s.done():
        if prev is not None and s.peek() == "num":
            raise _count_mismatch(*prev)
        raise TextGridError("malformed TextGrid: declared counts do not match content")
    return tiers


def read_textgrid(path):
    with open(path, "rb") as fh:
        return parse_textgrid(fh.read())


def _q(label):
    return '"' + label.replace('"', '""') + '"'


def format_textgrid(tiers, xmin=None, xmax=None, short=False):
    """Serialize ``{name: [Interval]}`` as a TextGrid string."""
    all_iv = [iv for ivs in tiers.values() for iv in ivs]
    xmin = min(iv.xmin for iv in all_iv) if xmin is None else xmin
    xmax = max(iv.xmax for iv in all_iv) if xmax is None else xmax
    g = lambda v: repr(float(v))  # noqa: E731
    if short:
        lines = ['File type = "ooTextFile"', 'Object class = "TextGrid"', "",
                 g(xmin), g(xmax), "<exists>", str(len(tiers))]
        for name, ivs in tiers.items():
            lines += ['"IntervalTier"', _q(name), g(xmin), g(xmax), str(len(ivs))]
            for iv in ivs:
                lines += [g(iv.xmin), g(iv.xmax), _q(iv.text)]
        return "\n".join(lines) + "\n"
    lines = ['File type = "ooTextFile"', 'Object class = "TextGrid"', "",
             f"xmin = {g(xmin)} ", f"xmax = {g(xmax)} ", "tiers? <exists> ",
             f"size = {len(tiers)} ", "item []: "]
    for t, (name, ivs) in enumerate(tiers.items(), 1):
        lines += [f"    item [{t}]:", '        class = "IntervalTier" ',
                  f"        name = {_q(name)} ", f"        xmin = {g(xmin)} ",
                  f"        xmax = {g(xmax)} ", f"        intervals: size = {len(ivs)} "]
        for i, iv in enumerate(ivs, 1):
            lines += [f"        intervals [{i}]:", f"            xmin = {g(iv.xmin)} ",
                      f"            xmax = {g(iv.xmax)} ", f"            text = {_q(iv.text)} "]
    return "\n".join(lines) + "\n"
