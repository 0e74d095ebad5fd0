from __future__ import annotations

import json

import pytest
from helpers import mk_sample
from hypothesis import given, settings
from hypothesis import strategies as st

from addrkit.align import (
    CLS_PIECE,
    CONTINUATION_MARKER,
    FINETUNE_DEFAULTS,
    SEP_PIECE,
    UNK_LABEL,
    FixedVocabSplitter,
    SplitterRoundTripError,
    align,
    align_sample,
    default_splitter,
    export_training_file,
    read_training_file,
)
from addrkit.ingest import Corpus
from addrkit.schema import BaseTag, BioLabel


class TestDefaultSplitter:
    @pytest.mark.parametrize(
        "word,pieces",
        [
            ("kirchenstr", ["ki", "##rch", "##ens", "##tr"]),
            ("24", ["24"]),
            ("3660", ["36", "##60"]),
            ("gemeinde", ["gem", "##ein", "##de"]),
            ("klein", ["klein"]),
            ("po", ["po"]),
            ("pochlarn", ["po", "##ch", "##lar", "##n"]),
            ("niederosterreich", ["ni", "##ede", "##ros", "##ter", "##re", "##ich"]),
        ],
    )
    def test_reference_splits(self, word, pieces):
        assert default_splitter()(word) == pieces

    def test_unknown_chars_become_single_pieces(self):
        pieces = default_splitter()("münchen")
        joined = pieces[0] + "".join(
            p[len(CONTINUATION_MARKER):] for p in pieces[1:]
        )
        assert joined == "münchen"

    @given(st.text(min_size=1, max_size=12).filter(lambda w: not w.isspace()))
    @settings(max_examples=100)
    def test_roundtrip_any_word(self, word):
        word = word.replace(" ", "_")
        pieces = default_splitter()(word)
        assert pieces
        assert not pieces[0].startswith(CONTINUATION_MARKER)
        joined = pieces[0] + "".join(
            p[len(CONTINUATION_MARKER):] for p in pieces[1:]
        )
        assert joined == word


class TestAlign:
    def test_first_piece_carries_label_rest_unk(self):
        seq = align(
            ["kirchenstr"], [BioLabel.b(BaseTag.STREET_NAME)], default_splitter()
        )
        assert seq.pieces == (CLS_PIECE, "ki", "##rch", "##ens", "##tr", SEP_PIECE)
        assert seq.label_strings() == (
            UNK_LABEL,
            "B-StreetName",
            UNK_LABEL,
            UNK_LABEL,
            UNK_LABEL,
            UNK_LABEL,
        )

    def test_inside_label_preserved_on_first_piece(self):
        seq = align(
            ["klein", "pochlarn"],
            [BioLabel.b(BaseTag.MUNICIPALITY), BioLabel.i(BaseTag.MUNICIPALITY)],
            default_splitter(),
            sentinels=False,
        )
        assert seq.pieces[0] == "klein"
        assert seq.label_strings()[0] == "B-Municipality"
        assert seq.pieces[1] == "po"
        assert seq.label_strings()[1] == "I-Municipality"

    def test_sentinels_off(self):
        seq = align(["24"], [BioLabel.b(BaseTag.STREET_NUMBER)], default_splitter(),
                    sentinels=False)
        assert seq.pieces == ("24",)
        assert seq.labels == (BioLabel.b(BaseTag.STREET_NUMBER),)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            align(["a", "b"], [BioLabel.b(BaseTag.NAME)], default_splitter())

    def test_roundtrip_violation_detected(self):
        def broken(word: str) -> list[str]:
            return ["xx"]

        with pytest.raises(SplitterRoundTripError):
            align(["abc"], [BioLabel.b(BaseTag.NAME)], broken)

    def test_align_sample(self, table1):
        seq = align_sample(table1, default_splitter())
        assert seq.id == table1.id
        assert seq.pieces[0] == CLS_PIECE
        assert seq.pieces[-1] == SEP_PIECE


def _strip_alignment(seq):
    """Invert align(): recover (words, labels) from pieces and piece labels."""
    words: list[str] = []
    labels: list = []
    for piece, label in zip(seq.pieces, seq.labels):
        if piece in (CLS_PIECE, SEP_PIECE):
            continue
        if piece.startswith(CONTINUATION_MARKER) and words:
            words[-1] += piece[len(CONTINUATION_MARKER):]
        else:
            words.append(piece)
            labels.append(label)
    return words, labels


label_strategy = st.builds(
    BioLabel.b, st.sampled_from(list(BaseTag))
)
words_labels = st.lists(
    st.tuples(
        st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=10),
        label_strategy,
    ),
    min_size=1,
    max_size=8,
)


class TestConservation:
    @given(words_labels)
    @settings(max_examples=100)
    def test_words_and_labels_recoverable(self, pairs):
        words = [w for w, _ in pairs]
        labels = [l for _, l in pairs]
        seq = align(words, labels, default_splitter())
        back_words, back_labels = _strip_alignment(seq)
        assert back_words == words
        assert back_labels == labels


class TestExport:
    def test_roundtrip(self, tmp_path, tiny_corpus):
        p = tmp_path / "aligned.tsv"
        export_training_file(tiny_corpus, default_splitter(), p)
        back = read_training_file(p)
        assert len(back) == len(tiny_corpus.samples)
        for seq, sample in zip(back, tiny_corpus.samples):
            assert seq.id == sample.id
            expected = align_sample(sample, default_splitter())
            assert seq.pieces == expected.pieces
            assert seq.labels == expected.labels

    def test_sidecar_defaults(self, tmp_path, tiny_corpus):
        p = tmp_path / "aligned.tsv"
        export_training_file(tiny_corpus, default_splitter(), p)
        sidecar = tmp_path / "aligned.tsv.config.json"
        config = json.loads(sidecar.read_text())
        assert config["seed"] == 42
        assert config["num_train_epochs"] == 1
        assert config["train_batch_size"] == 1024
        assert config["eval_batch_size"] == 1024
        assert config["dropout"] == pytest.approx(0.1)
        assert config["warmup_steps"] == 500
        assert config["weight_decay"] == pytest.approx(0.01)
        assert config["evaluation_steps"] == 20
        assert config["optimizer"] == "adamw"
        assert config["patience"] == 5

    def test_sidecar_override_merges(self, tmp_path, tiny_corpus):
        p = tmp_path / "aligned.tsv"
        export_training_file(
            tiny_corpus, default_splitter(), p, hyper_defaults={"seed": 7}
        )
        config = json.loads((tmp_path / "aligned.tsv.config.json").read_text())
        assert config["seed"] == 7
        assert config["patience"] == 5

    def test_empty_corpus_header_only(self, tmp_path):
        p = tmp_path / "aligned.tsv"
        export_training_file(
            Corpus(samples=(), provenance="empty"), default_splitter(), p
        )
        assert p.read_text().strip() == "# addrkit aligned v1"
        assert read_training_file(p) == []

    def test_unk_written_literally(self, tmp_path):
        corpus = Corpus(
            samples=(mk_sample(["kirchenstr"], ["StreetName"], id="k"),),
            provenance="t",
        )
        p = tmp_path / "aligned.tsv"
        export_training_file(corpus, default_splitter(), p)
        text = p.read_text()
        assert f"[CLS]\t{UNK_LABEL}" in text
        assert "ki\tB-StreetName" in text
        assert f"##rch\t{UNK_LABEL}" in text


class TestFixedVocabSplitter:
    def test_custom_vocab(self):
        splitter = FixedVocabSplitter(
            initial={"foo", "f"}, continuation={"o", "bar"}
        )
        assert splitter("foobar") == ["foo", "##bar"]

    def test_greedy_longest_prefix(self):
        splitter = FixedVocabSplitter(initial={"ab", "a"}, continuation={"b", "c"})
        assert splitter("abc") == ["ab", "##c"]

    def test_finetune_defaults_frozen_copy(self):
        d1 = dict(FINETUNE_DEFAULTS)
        d1["seed"] = 999
        assert FINETUNE_DEFAULTS["seed"] == 42
