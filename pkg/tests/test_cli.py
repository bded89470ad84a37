import json

import numpy as np
import pytest

from dialseg import dataio, fixtures
from dialseg.cli import main
from dialseg.core import EmbeddingMatrix


@pytest.fixture
def demo_paths():
    return {
        "corpus": str(fixtures.DEMO_CORPUS),
        "embeddings": str(fixtures.DEMO_EMBEDDINGS),
        "coherence": str(fixtures.DEMO_COHERENCE),
    }


def write_cluster_corpus(tmp_path, n_dialogues=3):
    """Structured corpus with two orthogonal 3-row clusters per dialogue."""
    lines = []
    matrices = {}
    for k in range(n_dialogues):
        did = f"d{k}"
        lines.append(
            json.dumps(
                {"id": did, "utterances": [f"u{t}" for t in range(6)], "boundaries": [3]}
            )
        )
        matrices[did] = EmbeddingMatrix([[1, 0, 0, 0]] * 3 + [[0, 1, 0, 0]] * 3)
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text("\n".join(lines) + "\n", encoding="utf-8")
    cache = tmp_path / "emb.dtse"
    dataio.write_embedding_cache(matrices, cache)
    return str(corpus), str(cache)


class TestSegment:
    def test_texttiling_demo_fixture(self, tmp_path, demo_paths):
        out = tmp_path / "hyp.jsonl"
        code = main(
            [
                "segment",
                "--corpus", demo_paths["corpus"],
                "--embeddings", demo_paths["embeddings"],
                "--coherence", demo_paths["coherence"],
                "--algo", "texttiling",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert dataio.load_hypotheses(out) == {"demo-1": [3]}

    def test_cluster_corpus_expected_boundaries(self, tmp_path):
        corpus, cache = write_cluster_corpus(tmp_path)
        out = tmp_path / "hyp.jsonl"
        code = main(
            [
                "segment",
                "--corpus", corpus,
                "--format", "structured",
                "--embeddings", cache,
                "--algo", "texttiling",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert all(v == [3] for v in dataio.load_hypotheses(out).values())

    def test_random_seed_reproducible(self, tmp_path, demo_paths):
        outs = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            code = main(
                [
                    "segment",
                    "--corpus", demo_paths["corpus"],
                    "--algo", "random",
                    "--seed", "7",
                    "--out", str(out),
                ]
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_embeddings_usage_error(self, tmp_path, demo_paths, capsys):
        code = main(
            [
                "segment",
                "--corpus", demo_paths["corpus"],
                "--algo", "texttiling",
                "--out", str(tmp_path / "x.jsonl"),
            ]
        )
        assert code == 2
        assert "--embeddings" in capsys.readouterr().err

    def test_score_dump(self, tmp_path, demo_paths):
        out = tmp_path / "hyp.jsonl"
        dump = tmp_path / "scores.jsonl"
        main(
            [
                "segment",
                "--corpus", demo_paths["corpus"],
                "--embeddings", demo_paths["embeddings"],
                "--algo", "texttiling",
                "--lambda", "0",
                "--out", str(out),
                "--dump-scores", str(dump),
            ]
        )
        record = json.loads(dump.read_text().splitlines()[0])
        assert record["id"] == "demo-1"
        assert record["scores"][2] == pytest.approx(0.0)
        assert record["scores"][0] == pytest.approx(1.0)


class TestEval:
    def test_gold_hypothesis_scores_zero(self, tmp_path, demo_paths):
        hyp = tmp_path / "hyp.jsonl"
        dataio.write_hypotheses({"demo-1": [3]}, hyp)
        report = tmp_path / "report.txt"
        code = main(
            [
                "eval",
                "--corpus", demo_paths["corpus"],
                "--hypothesis", str(hyp),
                "--out", str(report),
            ]
        )
        assert code == 0
        assert "0.00" in report.read_text(encoding="utf-8")

    def test_worked_metric_example_in_report(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text(
            json.dumps(
                {"id": "m", "utterances": ["a", "b", "c", "d", "e"], "boundaries": [2]}
            )
            + "\n",
            encoding="utf-8",
        )
        hyp = tmp_path / "hyp.jsonl"
        dataio.write_hypotheses({"m": []}, hyp)
        report = tmp_path / "report.txt"
        code = main(
            [
                "eval",
                "--corpus", str(corpus),
                "--format", "structured",
                "--hypothesis", str(hyp),
                "--k", "2",
                "--out", str(report),
            ]
        )
        assert code == 0
        assert "66.67" in report.read_text(encoding="utf-8")

    def test_missing_dialogue_exits_2(self, tmp_path, demo_paths, capsys):
        hyp = tmp_path / "hyp.jsonl"
        dataio.write_hypotheses({}, hyp)
        code = main(
            [
                "eval",
                "--corpus", demo_paths["corpus"],
                "--hypothesis", str(hyp),
                "--out", str(tmp_path / "r.txt"),
            ]
        )
        assert code == 2
        assert "no entry" in capsys.readouterr().err


class TestMine:
    def test_counts_match_brute_force(self, tmp_path):
        corpus, cache = write_cluster_corpus(tmp_path, n_dialogues=1)
        out = tmp_path / "pairs.jsonl"
        code = main(
            [
                "mine",
                "--corpus", corpus,
                "--format", "structured",
                "--embeddings", cache,
                "--w", "2",
                "--out", str(out),
            ]
        )
        assert code == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        from dialseg.core import Segmentation

        expected_pos = expected_neg = 0
        pseudo = Segmentation(6, [3])
        for i in range(1, 7):
            for j in range(1, 7):
                if i == j:
                    continue
                near = abs(i - j) <= 2
                same = pseudo.segment_of(i) == pseudo.segment_of(j)
                expected_pos += near and same
                expected_neg += (not near) and (not same)
        assert sum(1 for r in records if r["label"] == "+") == expected_pos
        assert sum(1 for r in records if r["label"] == "-") == expected_neg

    def test_single_segment_corpus_zero_negatives(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text(
            json.dumps({"id": "flat", "utterances": ["a", "b", "c"]}) + "\n",
            encoding="utf-8",
        )
        cache = tmp_path / "e.dtse"
        dataio.write_embedding_cache(
            {"flat": EmbeddingMatrix([[1.0, 0.0]] * 3)}, cache
        )
        out = tmp_path / "pairs.jsonl"
        code = main(
            [
                "mine",
                "--corpus", str(corpus),
                "--format", "structured",
                "--embeddings", str(cache),
                "--out", str(out),
            ]
        )
        assert code == 0
        assert "0 negative" in capsys.readouterr().out

    def test_w_zero_rejected(self, tmp_path, demo_paths):
        code = main(
            [
                "mine",
                "--corpus", demo_paths["corpus"],
                "--embeddings", demo_paths["embeddings"],
                "--w", "0",
                "--out", str(tmp_path / "p.jsonl"),
            ]
        )
        assert code == 2


class TestTrain:
    def test_zero_epochs_writes_identity_head(self, tmp_path, demo_paths):
        out = tmp_path / "head.dtsh"
        code = main(
            [
                "train",
                "--corpus", demo_paths["corpus"],
                "--embeddings", demo_paths["embeddings"],
                "--rounds", "1",
                "--epochs", "0",
                "--w", "2",
                "--out", str(out),
            ]
        )
        assert code == 0
        head = dataio.load_head(out)
        assert np.array_equal(head.weight, np.eye(4))
        assert not head.trained

    def test_no_trainable_pairs_exits_3(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text(
            json.dumps({"id": "flat", "utterances": ["a", "b", "c"]}) + "\n",
            encoding="utf-8",
        )
        cache = tmp_path / "e.dtse"
        dataio.write_embedding_cache(
            {"flat": EmbeddingMatrix([[1.0, 0.0]] * 3)}, cache
        )
        code = main(
            [
                "train",
                "--corpus", str(corpus),
                "--format", "structured",
                "--embeddings", str(cache),
                "--epochs", "0",
                "--out", str(tmp_path / "h.dtsh"),
            ]
        )
        assert code == 3

    def test_training_reduces_loss_on_noisy_clusters(self, tmp_path, capsys):
        rng = np.random.default_rng(17)
        lines, matrices = [], {}
        for k in range(6):
            did = f"noisy{k}"
            lines.append(
                json.dumps(
                    {
                        "id": did,
                        "utterances": [f"t{t}" for t in range(10)],
                        "boundaries": [5],
                    }
                )
            )
            rows = []
            for dim in (0, 1):
                for _ in range(5):
                    v = np.zeros(6)
                    v[dim] = 1.0
                    v += rng.normal(0, 0.4, 6)
                    rows.append(v)
            matrices[did] = EmbeddingMatrix(np.stack(rows))
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("\n".join(lines) + "\n", encoding="utf-8")
        cache = tmp_path / "e.dtse"
        dataio.write_embedding_cache(matrices, cache)
        loss_out = tmp_path / "loss.jsonl"
        code = main(
            [
                "train",
                "--corpus", str(corpus),
                "--format", "structured",
                "--embeddings", str(cache),
                "--rounds", "3",
                "--epochs", "1",
                "--lr", "0.05",
                "--w", "3",
                "--seed", "1",
                "--out", str(tmp_path / "h.dtsh"),
                "--loss-out", str(loss_out),
            ]
        )
        assert code == 0
        losses = [json.loads(l)["mean_loss"] for l in loss_out.read_text().splitlines()]
        assert len(losses) >= 1
        head = dataio.load_head(tmp_path / "h.dtsh")
        assert head.trained
        assert not np.array_equal(head.weight, np.eye(6))


class TestBaseline:
    def test_greedy_low_tau_single_segment(self, tmp_path):
        corpus, cache = write_cluster_corpus(tmp_path)
        out = tmp_path / "hyp.jsonl"
        code = main(
            [
                "baseline",
                "--corpus", corpus,
                "--format", "structured",
                "--embeddings", cache,
                "--algo", "greedy",
                "--threshold", "-2",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert all(v == [] for v in dataio.load_hypotheses(out).values())

    def test_random_deterministic_with_report(self, tmp_path):
        corpus, _ = write_cluster_corpus(tmp_path)
        outs = []
        for tag in ("x", "y"):
            out = tmp_path / f"hyp_{tag}.jsonl"
            report = tmp_path / f"rep_{tag}.txt"
            code = main(
                [
                    "baseline",
                    "--corpus", corpus,
                    "--format", "structured",
                    "--algo", "random",
                    "--seed", "11",
                    "--out", str(out),
                    "--report", str(report),
                ]
            )
            assert code == 0
            outs.append(out.read_bytes() + report.read_bytes())
        assert outs[0] == outs[1]

    def test_greedy_without_embeddings_exits_2(self, tmp_path):
        corpus, _ = write_cluster_corpus(tmp_path)
        code = main(
            [
                "baseline",
                "--corpus", corpus,
                "--format", "structured",
                "--algo", "greedy",
                "--out", str(tmp_path / "h.jsonl"),
            ]
        )
        assert code == 2
