"""Word frequency tallying for plain-text corpora."""

# Re-exported public surface; everything else is internal.
from wordtally.counter import WordCounter
from wordtally.tokenizer import Tokenizer

__all__ = ["Tokenizer", "WordCounter"]
__version__ = "0.3.1"
