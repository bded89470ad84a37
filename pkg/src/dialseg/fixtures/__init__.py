"""Shipped fixture files: a rewriting case-study corpus with its rewrite
file, and a small two-topic demo corpus with matching embedding and
coherence caches for exercising the pipeline end to end."""

from pathlib import Path

_DIR = Path(__file__).parent

CASE_STUDY_CORPUS = _DIR / "case_study.txt"
CASE_STUDY_REWRITES = _DIR / "case_study_rewrites.jsonl"
DEMO_CORPUS = _DIR / "demo.txt"
DEMO_EMBEDDINGS = _DIR / "demo.dtse"
DEMO_COHERENCE = _DIR / "demo.dtsc"
