"""The command line on a throwaway dataset.

Equivalent shell session (after ``pip install -e .``)::

    msignn convert --dataset raw/ --format geomgcn-text --out data/anchored
    msignn rank --dataset data/anchored --hop 1 --t 10
    msignn train --dataset data/anchored --model msi-h2gcn-2 --params-file p.toml --out run/
    msignn export-embeddings --dataset data/anchored --model msi-h2gcn-2 \\
        --params-file p.toml --checkpoint run/checkpoints/split00.npz --out emb/
"""

import subprocess
import sys
import tempfile
from pathlib import Path

from msignn import save_graph

from _synthetic import anchored_heterophily

PARAMS = """\
regularization_weight = 5e-4
dropout = 0.5
activation = "relu"
discount_coefficient = 0.5
t = 100
c_x = 1
c_a1 = 4
c_a2 = 1
n = 1
"""


def msignn(*args):
    cmd = [sys.executable, "-m", "msignn", *map(str, args)]
    print("$ msignn", " ".join(map(str, args)))
    done = subprocess.run(cmd, capture_output=True, text=True)
    out = done.stdout.strip().splitlines()
    for line in out[:8]:
        print("   ", line)
    if len(out) > 8:
        print(f"    ... ({len(out) - 8} more lines)")
    if done.returncode:
        print(f"    exit {done.returncode}: {done.stderr.strip()}")
    return done.returncode


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    data = save_graph(anchored_heterophily(n=200, seed=3), tmp / "anchored")
    (tmp / "p.toml").write_text(PARAMS)

    msignn("rank", "--dataset", data, "--hop", "1", "--t", "10")
    msignn("train", "--dataset", data, "--model", "msi-h2gcn-2", "--params-file", tmp / "p.toml",
           "--splits", "3", "--epochs", "200", "--patience", "50", "--out", tmp / "run")
    print("   ", (tmp / "run" / "results.csv").read_text().strip().replace("\n", "\n    "))
    msignn("export-embeddings", "--dataset", data, "--model", "msi-h2gcn-2",
           "--params-file", tmp / "p.toml",
           "--checkpoint", tmp / "run" / "checkpoints" / "split00.npz", "--out", tmp / "emb")
    print("    exported:", sorted(p.name for p in (tmp / "emb").iterdir()))
    msignn("train", "--dataset", tmp / "missing", "--model", "gcn",
           "--params-file", "settings/cora.toml", "--out", tmp / "never")
