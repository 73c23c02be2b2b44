"""exbt: context extraction, prompt assembly and evaluation for
exceptional-behavior test generation on Java repositories."""

__version__ = "0.1.0"
