"""Tiny randomly-initialized checkpoints built on the fly.

The exports only need models loadable through the transformers Auto
classes; quality is irrelevant for format and pipeline tests, so these
fixtures construct miniature BERT / NSP-BERT / T5 checkpoints with
handmade vocabularies and save them under the test session's tmp dir.
"""

import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import (
    BertConfig,
    BertForNextSentencePrediction,
    BertModel,
    BertTokenizerFast,
    PreTrainedTokenizerFast,
    T5Config,
    T5ForConditionalGeneration,
)

WORDS = [
    "can", "you", "book", "me", "a", "table", "for", "two", "tonight",
    "sure", "which", "restaurant", "did", "have", "in", "mind", "the",
    "italian", "place", "on", "5th", "around", "seven", "what's", "weather",
    "looking", "like", "tomorrow", "cloudy", "morning", "clearing", "up",
    "by", "noon", "great", "i'll", "plan", "hike", "afternoon", "hello",
    "world", "rewrite", "directions", "schedule", "appointment",
]


@pytest.fixture(scope="session")
def bert_vocab(tmp_path_factory):
    path = tmp_path_factory.mktemp("vocab") / "vocab.txt"
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS
    path.write_text("\n".join(tokens), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def bert_config(bert_vocab):
    vocab_size = len(bert_vocab.read_text().splitlines())
    return BertConfig(
        vocab_size=vocab_size,
        hidden_size=24,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=128,
    )


@pytest.fixture(scope="session")
def encoder_dir(tmp_path_factory, bert_vocab, bert_config):
    target = tmp_path_factory.mktemp("models") / "tiny-encoder"
    torch.manual_seed(101)
    BertModel(bert_config).save_pretrained(target)
    BertTokenizerFast(vocab_file=str(bert_vocab), do_lower_case=True).save_pretrained(target)
    return str(target)


@pytest.fixture(scope="session")
def nsp_dir(tmp_path_factory, bert_vocab, bert_config):
    target = tmp_path_factory.mktemp("models") / "tiny-nsp"
    torch.manual_seed(202)
    BertForNextSentencePrediction(bert_config).save_pretrained(target)
    BertTokenizerFast(vocab_file=str(bert_vocab), do_lower_case=True).save_pretrained(target)
    return str(target)


@pytest.fixture(scope="session")
def t5_dir(tmp_path_factory):
    target = tmp_path_factory.mktemp("models") / "tiny-t5"
    vocab = {"<pad>": 0, "</s>": 1, "<unk>": 2}
    for word in WORDS + ["A:", "B:"]:
        vocab.setdefault(word, len(vocab))
    wordlevel = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    wordlevel.pre_tokenizer = pre_tokenizers.Whitespace()
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=wordlevel,
        eos_token="</s>",
        pad_token="<pad>",
        unk_token="<unk>",
    )
    config = T5Config(
        vocab_size=len(vocab),
        d_model=16,
        d_kv=8,
        d_ff=32,
        num_layers=2,
        num_heads=2,
        decoder_start_token_id=0,
    )
    torch.manual_seed(303)
    T5ForConditionalGeneration(config).save_pretrained(target)
    tokenizer.save_pretrained(target)
    return str(target)


@pytest.fixture
def plain_corpus(tmp_path):
    path = tmp_path / "chat.txt"
    path.write_text(
        "can you book me a table for two tonight\n"
        "sure which restaurant did you have in mind\n"
        "the italian place on 5th around seven\n"
        "=====\n"
        "what's the weather looking like tomorrow\n"
        "cloudy in the morning clearing up by noon\n"
        "great i'll plan the hike for the afternoon\n"
        "\n"
        "hello world\n"
        "hello world\n"
        "book a table\n",
        encoding="utf-8",
    )
    return path
