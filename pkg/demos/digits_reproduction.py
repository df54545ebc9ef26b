"""
All five methods on the handwritten digits
==========================================

Runs kmeans, NMF, GNMF, MultiNMF and EquiNMF on the Fourier and
pixel-average views of the UCI digits, 20 seeded runs each, and prints
the accuracy and NMI table plus EquiNMF's Welch tests. Takes several
minutes on one core; pass a smaller run count as the first argument to
try it faster.
"""

import sys
from pathlib import Path

from equinmf.harness import ExperimentConfig, emit_results, run_experiment

root = Path(__file__).resolve().parents[1]
runs = int(sys.argv[1]) if len(sys.argv) > 1 else 20

config = ExperimentConfig(
    fourier_path=str(root / "data" / "mfeat" / "mfeat-fou"),
    pixel_path=str(root / "data" / "mfeat" / "mfeat-pix"),
    k_clusters=10,
    runs=runs,
    seed=0,
)
result = run_experiment(config)

print("%-9s %16s %16s" % ("method", "accuracy", "nmi"))
for method, rep in result.reports.items():
    print("%-9s %8.3f +- %.3f %8.3f +- %.3f"
          % (method, rep.accuracy_mean, rep.accuracy_std, rep.nmi_mean, rep.nmi_std))

# is EquiNMF better than each baseline at the 5% level?
if runs > 1:
    for other, tests in result.reports["equinmf"].significance.items():
        acc = tests["accuracy"]
        print("equinmf vs %-8s t = %6.2f  p = %.2g  %s"
              % (other, acc["t"], acc["p"], "significant" if acc["significant"] else ""))

# runs.csv, summary.csv and summary.json for plotting elsewhere
for path in emit_results(result, root / "results" / "digits"):
    print("wrote", path)
