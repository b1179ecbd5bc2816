from pathlib import Path

import pytest

from hpcprosody import textgrid
from hpcprosody.errors import TextGridError
from hpcprosody.textgrid import Interval

DATA = Path(__file__).parent / "data"

MINIMAL = '''File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 1
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "phones"
        xmin = 0
        xmax = 1
        intervals: size = 1
        intervals [1]:
            xmin = 0
            xmax = 1
            text = "AH0"
'''


def test_minimal_long_format():
    assert textgrid.parse_textgrid(MINIMAL) == {"phones": [Interval(0.0, 1.0, "AH0")]}


def test_declared_count_mismatch():
    with pytest.raises(TextGridError, match="declares 2 intervals, found 1"):
        textgrid.parse_textgrid(MINIMAL.replace("intervals: size = 1", "intervals: size = 2"))


def test_mfa_fixture_labels_verbatim():
    tiers = textgrid.read_textgrid(DATA / "mfa_long_utf8.TextGrid")
    assert list(tiers) == ["words", "phones"]  # point tier "notes" skipped
    assert [iv.text for iv in tiers["phones"]] == ["sil", "M", "AY1", "sp", "N", "EY1", "M", ""]
    assert [iv.text for iv in tiers["words"]][0] == ""
    assert len(tiers["words"]) == 5


@pytest.mark.parametrize("name", ["mfa_short_utf8", "mfa_long_utf16", "mfa_short_utf16be"])
def test_encodings_and_formats_agree(name):
    ref = textgrid.read_textgrid(DATA / "mfa_long_utf8.TextGrid")
    assert textgrid.read_textgrid(DATA / f"{name}.TextGrid") == ref


@pytest.mark.parametrize("name, message", [
    ("bad_count", "declared interval count 7"),
    ("bad_count_short", "declared interval count 9"),
    ("bad_interval", r"xmax 0.2 <= xmin 0.2"),
    ("truncated", "truncated file"),
    ("bad_header", "malformed header"),
])
def test_corrupted_fixtures(name, message):
    with pytest.raises(TextGridError, match=message):
        textgrid.read_textgrid(DATA / f"{name}.TextGrid")


def test_escaped_quotes_and_round_trip():
    tiers = {"words": [Interval(0.0, 0.5, 'say "hi"'), Interval(0.5, 1.25, "")],
             "phones": [Interval(0.0, 1.25, "AH0")]}
    for short in (False, True):
        text = textgrid.format_textgrid(tiers, short=short)
        assert textgrid.parse_textgrid(text) == tiers


def test_absent_tiers():
    text = 'File type = "ooTextFile"\nObject class = "TextGrid"\n0\n1\n<absent>\n'
    assert textgrid.parse_textgrid(text) == {}


def test_not_a_textgrid():
    with pytest.raises(TextGridError, match="malformed header"):
        textgrid.parse_textgrid('File type = "ooTextFile"\nObject class = "Sound"\n0 1 <exists> 0\n')
