"""
The whole pipeline from the command line
========================================

Equivalent shell session::

    searchcast synth --seed 0 --out data
    searchcast cluster --config data/config.json
    searchcast granger --config data/config.json
    searchcast nowcast --config data/config.json --rf-hyper 100,sqrt,4
"""

import sys
import tempfile
from pathlib import Path

from searchcast.cli import main

out = Path(tempfile.mkdtemp()) / "data"
cfg = str(out / "config.json")
for argv in (["synth", "--seed", "0", "--out", str(out)],
             ["cluster", "--config", cfg],
             ["granger", "--config", cfg],
             ["nowcast", "--config", cfg, "--rf-hyper", "100,sqrt,4"]):
    code = main(argv)
    if code:
        sys.exit(code)

print((out / "eval_table.csv").read_text())
print(sorted(p.name for p in out.iterdir()))
