"""Cross-encoder inference for (query, text) relevance.

Any Hugging Face sequence-classification checkpoint works; the pair is
encoded the standard way ([CLS] query [SEP] text [SEP]) and truncated to
the model's positional limit.  Inference is eval-mode, no-grad, and
single-threaded so a fixed checkpoint always maps identical inputs to
identical scores.
"""

from __future__ import annotations

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer


class CrossEncoder:
    def __init__(self, model_id: str, device: str = "cpu"):
        torch.set_num_threads(1)
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForSequenceClassification.from_pretrained(model_id)
        self.model.to(device)
        self.model.eval()
        self.device = device
        limit = getattr(self.model.config, "max_position_embeddings", None) or 512
        tok_limit = getattr(self.tokenizer, "model_max_length", None)
        if tok_limit and tok_limit < 10**6:
            limit = min(limit, tok_limit)
        self.max_length = int(limit)

    def score_pair(self, query: str, text: str) -> float:
        """Positive-class probability in [0, 1]; deterministic for fixed weights."""
        inputs = self.tokenizer(
            query,
            text,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        ).to(self.device)
        with torch.no_grad():
            logits = self.model(**inputs).logits[0]
        if logits.shape[-1] == 1:
            prob = torch.sigmoid(logits[0])
        else:
            prob = torch.softmax(logits, dim=-1)[1]
        return float(prob)
