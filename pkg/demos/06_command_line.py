"""
The same pipeline from the command line
=======================================

Writes a config, then runs ``generate``, ``train``, ``detect`` and ``eval``
in a temporary directory. Equivalent shell::

    ngc generate --config config.json
    ngc train    --config config.json
    ngc detect   --config config.json
    ngc eval --detections run/detections.csv --truth test.csv --sweep-zeta --out report.json
"""

import json
import tempfile
from pathlib import Path

from ngc.cli import main

work = Path(tempfile.mkdtemp())
config = work / "config.json"
config.write_text(json.dumps({"seed": 0, "synthetic": {"sym_noise_level": 0.5}, "train": {"epochs": 20}}, indent=2))

for argv in (["generate"], ["train"], ["detect"]):
    code = main([*argv, "--config", str(config)])
    print(argv[0], "->", code)

code = main(["eval", "--detections", str(work / "run" / "detections.csv"), "--truth", str(work / "test.csv"),
             "--model", str(work / "run"), "--sweep-zeta", "--out", str(work / "report.json")])
report = json.loads((work / "report.json").read_text())
report.pop("sweep")
print(json.dumps(report, indent=2, sort_keys=True))
print("artifacts:", sorted(p.name for p in (work / "run").iterdir()))
