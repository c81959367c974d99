"""Running from a JSON config, as the ``topofl`` command does."""

import json
import tempfile
from pathlib import Path

from topofl.cli import main

config = Path(__file__).parent / "configs" / "rotated_tfl.json"
print(json.loads(config.read_text())["strategy"], "config at", config)

with tempfile.TemporaryDirectory() as tmp:
    main(["validate", "--config", str(config)])
    main(["run", "--config", str(config), "--out", tmp, "--seeds", "0,1"])
    print((Path(tmp) / "results.csv").read_text().splitlines()[:3])
    print(sorted(p.name for p in (Path(tmp) / "seed_0").iterdir())[:6])
    main(["export-topology", "--config", str(config), "--round", "10", "--out", tmp])
