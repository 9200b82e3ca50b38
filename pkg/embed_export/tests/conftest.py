import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

# "likes" splits into two pieces; "hates" is a single piece; anything not
# listed falls back to [UNK]
VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "amy", "bob", "carl", "dana", "evan",
    "lik", "##es", "hates",
    "acme", "globex", "initech", "umbrella", "stark",
    "corp", "labs", "the", "today", "reportedly",
]

HIDDEN_SIZE = 32
MAX_POSITIONS = 16


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A deterministic, randomly initialized local encoder checkpoint."""
    d = tmp_path_factory.mktemp("tinybert")
    (d / "vocab.txt").write_text("\n".join(VOCAB) + "\n")
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=HIDDEN_SIZE,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=MAX_POSITIONS,
    )
    BertModel(config).save_pretrained(d)
    BertTokenizer(str(d / "vocab.txt")).save_pretrained(d)
    return str(d)
