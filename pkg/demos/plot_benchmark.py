"""
Latency against repository size
===============================

Synthesize repositories of growing size and time end-to-end retrieval.
Query generation does not look at the repository, so its cost stays
flat while search grows with the amount of text scanned.
"""

import tempfile
from pathlib import Path

from grepctx import PipelineConfig
from grepctx.bench import run_bench

rows = run_bench(Path(tempfile.mkdtemp()), (10_000, 50_000, 100_000), PipelineConfig(), repeats=2)
for row in rows:
    print(row)
