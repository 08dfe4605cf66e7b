"""forest2text: transfer random-forest knowledge into text corpora for
sequence-to-sequence fine-tuning, and validate generated rule explanations
against the training data."""

__version__ = "0.1.0"
