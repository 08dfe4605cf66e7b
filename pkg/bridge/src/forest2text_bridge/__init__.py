"""forest2text_bridge: seq2seq fine-tuning and generation over forest2text
JSONL corpora. The corpus and prompts files are the only input surface."""

__version__ = "0.1.0"
