import io
import json
import os

import pytest

from ex2sm.errors import FastaFormatError, ParameterError
from ex2sm.ingest import (
    RawSequence, Sequence, build_catalog, clean_sequence, disk_usage, ingest_fasta, load_catalog,
    parse_fasta, validate_alphabet,
)


def fasta(text):
    return io.BytesIO(text.encode())


def test_parse_two_records_lf():
    recs = parse_fasta(fasta(">chr1 test\nCATT\nATTAGGA\n>chr2\nCATTCA\n"))
    assert recs == [RawSequence("chr1 test", b"CATTATTAGGA"), RawSequence("chr2", b"CATTCA")]


def test_parse_crlf_matches_lf():
    lf = parse_fasta(fasta(">a\nACGT\nAC\n"))
    crlf = parse_fasta(fasta(">a\r\nACGT\r\nAC\r\n"))
    assert lf == crlf


def test_leading_blank_lines_are_ignored():
    assert parse_fasta(fasta("\n\n>a\nAC\n")) == [RawSequence("a", b"AC")]


def test_text_before_header_reports_offset():
    with pytest.raises(FastaFormatError) as err:
        parse_fasta(fasta("\n  ACGT\n>a\nAC\n"))
    assert err.value.offset == 3


def test_empty_header_rejected():
    with pytest.raises(FastaFormatError):
        parse_fasta(fasta(">\nACGT\n"))


def test_empty_stream_has_no_records():
    assert parse_fasta(fasta("")) == []


def test_clean_deletes_foreign_symbols_and_shifts():
    seq = clean_sequence(RawSequence("x", b"ACNNGT-"), "ACGT", 3)
    assert seq == Sequence(3, "x", b"ACGT")


def test_clean_uppercases_soft_masked():
    assert clean_sequence(RawSequence("x", b"acgtNacgt")).symbols == b"ACGTACGT"


def test_clean_respects_custom_alphabet():
    assert clean_sequence(RawSequence("x", b"HELLOwORLD"), "LO").symbols == b"LLOOL"


@pytest.mark.parametrize("bad", ["", "A", "AAC", "AC-", "ÄC"])
def test_bad_alphabets(bad):
    with pytest.raises(ParameterError):
        validate_alphabet(bad)


def test_alphabet_is_uppercased():
    assert validate_alphabet("acgt") == "ACGT"


def test_catalog_files_and_manifest(tmp_path):
    seqs = [Sequence(0, "a", b"CATTATTAGGA"), Sequence(1, "b", b"CATTCA")]
    cat = build_catalog(seqs, tmp_path / "c", "ACGT")
    assert cat.total_length == 17
    assert [s.id for s in cat.sequences] == [0, 1]
    manifest = json.loads((tmp_path / "c" / "catalog.json").read_text())
    assert set(manifest) == {"alphabet", "sequences", "total_length"}
    assert manifest["total_length"] == 17
    assert set(manifest["sequences"][0]) == {"id", "name", "length", "file"}
    payload = (tmp_path / "c" / manifest["sequences"][1]["file"]).read_bytes()
    assert payload == b"CATTCA"
    assert disk_usage(cat) == cat.total_length


def test_catalog_round_trip(tmp_path):
    cat = build_catalog([Sequence(0, "a", b"ACGTAC")], tmp_path / "c", "ACGT")
    again = load_catalog(tmp_path / "c")
    assert again.text(0) == "ACGTAC"
    assert again.offsets().tolist() == [0, 6]
    assert again.max_length == cat.max_length == 6


def test_empty_catalog_needs_flag(tmp_path):
    with pytest.raises(ParameterError):
        build_catalog([], tmp_path / "c", "ACGT")
    cat = build_catalog([], tmp_path / "d", "ACGT", allow_empty=True)
    assert cat.total_length == 0


def test_symbols_outside_alphabet_rejected(tmp_path):
    with pytest.raises(ParameterError):
        build_catalog([Sequence(0, "a", b"ACGN")], tmp_path / "c", "ACGT")


def test_ingest_fasta_files(tmp_path):
    a = tmp_path / "a.fa"
    b = tmp_path / "b.fa"
    a.write_bytes(b">one\nCATTnATTAGGA\n")
    b.write_bytes(b">two\r\ncattca\r\n")
    cat = ingest_fasta([a, b], tmp_path / "cat")
    assert [cat.text(i) for i in range(2)] == ["CATTATTAGGA", "CATTCA"]
    assert [s.name for s in cat.sequences] == ["one", "two"]
    assert os.path.getsize(tmp_path / "cat" / cat.sequences[0].file) == 11
