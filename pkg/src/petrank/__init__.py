"""petrank: urgency ranking for accepted legal petitions.

Pipeline: load a four-column petition corpus, extract acceptance and
first-proceeding dates from the raw text, derive gap-based rank scores,
assemble a numeric (optionally embedding-fused) feature matrix, train a
regression learner, and evaluate ranking quality with rank correlation,
cross-validation, and bootstrap intervals. A bigram TF-IDF audit checks
train/test near-duplication. The `petrank` CLI orchestrates everything
with a reproducible JSON config and writes reports plus figures.
"""

__version__ = "0.1.0"
