"""
Command line round trip
=======================

Write a dataset to disk, then drive the ``herln`` command through stats,
community detection, training, evaluation and checkpoint inspection.  The
same calls work from a shell as ``herln <command> ...``.
"""
import tempfile
from pathlib import Path

import numpy as np

from herln import DatasetBundle, TemporalGraph
from herln.cli import main
from herln.graph import save_dataset

facts = np.array([(k, (k + t) % 3, (k + (k + t) % 3 + 1) % 5, t) for t in range(6) for k in range(5)])


def graph(rows):
    return TemporalGraph(rows, 5, 3, 6)


work = Path(tempfile.mkdtemp())
bundle = DatasetBundle(graph(facts[facts[:, 3] < 4]), graph(facts[facts[:, 3] == 4]), graph(facts[facts[:, 3] == 5]))
save_dataset(bundle, work / "data" / "TOY")
print("dataset files:", sorted(p.name for p in (work / "data" / "TOY").iterdir()))

common = ["--data-root", str(work / "data"), "--dataset", "TOY"]
main(["stats", *common])
main(["communities", *common, "--out", str(work / "runs")])

ini = work / "fast.ini"
ini.write_text("[train]\ndim = 16\nkernels = 8\ndropout = 0.0\nepochs = 40\n")
main(["train", "--config", str(ini), *common, "--out", str(work / "runs")])

run = next(p for p in (work / "runs").iterdir() if p.is_dir())
print("run directory:", sorted(p.name for p in run.iterdir()))
main(["eval", str(run / "model.ckpt"), "--split", "valid"])
main(["inspect-checkpoint", str(run / "model.ckpt")])

# a damaged checkpoint is refused with its own exit code
blob = (run / "model.ckpt").read_bytes()
(run / "model.ckpt").write_bytes(blob[:-9] + bytes([blob[-9] ^ 1]) + blob[-8:])
print("exit code for a corrupted checkpoint:", main(["inspect-checkpoint", str(run / "model.ckpt")]))
