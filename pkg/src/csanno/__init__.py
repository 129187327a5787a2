"""csanno: a self-hostable platform for token-level code-switching annotation.

Ingests multilingual social-media corpora, pre-tags mechanical token
categories, distributes annotation tasks with controlled overlap across
annotator teams, collects and reviews human tag decisions, computes
inter-annotator agreement and throughput statistics, and round-trips
annotated corpora through a lossless XML format.
"""

__version__ = "0.1.0"
