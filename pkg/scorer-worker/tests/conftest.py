import subprocess
import sys
from importlib import resources

import pytest

WORKER = [sys.executable, "-m", "scorer_worker"]


def golden(name: str) -> str:
    return resources.files("sentrank.data").joinpath(name).read_text("utf-8")


def run_worker(args, input_text: str, timeout: float = 120.0):
    """Feed the worker's stdin and collect (stdout, stderr, returncode)."""
    proc = subprocess.run(
        WORKER + args,
        input=input_text,
        capture_output=True,
        text=True,
        encoding="utf-8",
        timeout=timeout,
    )
    return proc.stdout, proc.stderr, proc.returncode


@pytest.fixture(scope="session")
def tiny_model(tmp_path_factory):
    """A small randomly-initialized BERT-style cross-encoder saved to disk.

    Weights are arbitrary but fixed once saved, which is all the
    determinism contract needs; loading real checkpoints requires network
    access this environment does not have.
    """
    import torch
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

    path = tmp_path_factory.mktemp("tiny-cross-encoder")
    vocab = [
        "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
        "the", "a", "solar", "power", "deep", "sea", "mining", "river",
        "watch", "tower", "green", "energy", "0", "1", "2", "panel",
        "##s", "##ing", "##ed",
    ]
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")

    torch.manual_seed(7)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
        num_labels=2,
    )
    model = BertForSequenceClassification(config)
    model.save_pretrained(path)
    tokenizer = BertTokenizer(str(vocab_file), model_max_length=64)
    tokenizer.save_pretrained(path)
    return str(path)
