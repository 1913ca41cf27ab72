"""Seeded experiments, CSV/JSON output and the command line.

Every sample is a pure function of (seed, replicate), so runs are
reproducible bit for bit and independent of the number of workers.
"""

import subprocess
import sys

from renewtrie import sim
from renewtrie.source import new_source

spec = sim.ExperimentSpec("tunstall_len", new_source(0.3), replicates=2000, M=256)
s1 = sim.run(spec)
s2 = sim.run(spec, workers=2)
print("serial == parallel:", s1 == s2)
cmp = sim.compare(s1, sim.predict_for(spec), *sim.TOLERANCES["tunstall_len"])
print(sim.to_csv([(spec, cmp)]))

for argv in (
    ["predict", "--p", "0.3", "--n", "1024"],
    ["codes", "build", "--p", "0.6", "--tunstall", "5", "--dump"],
    ["simulate", "depth", "--p", "0.5", "--n", "2", "--reps", "20000", "--seed", "7", "--method", "counts"],
):
    print("$ renewtrie " + " ".join(argv))
    out = subprocess.run([sys.executable, "-m", "renewtrie.cli", *argv], capture_output=True, text=True)
    print(out.stdout)
