"""
Running the three benchmarks
============================

Each experiment is fully fixed by its config and base seed. Results come
back as a report object; ``emit_report`` writes the CSV the CLI produces.
Set ``GSSLSF_FULL=1`` to run both graph sizes with three trials.
"""

import os

from gsslsf.bench import ExperimentConfig, emit_report, run_experiment

full = os.environ.get("GSSLSF_FULL") == "1"
sizes = (250, 350) if full else (250,)
trials = 3 if full else 1

for exp in (1, 2, 3):
    for n in sizes:
        report = run_experiment(ExperimentConfig(experiment=exp, nodes=n, trials=trials))
        print(f"--- experiment {exp}, N={n}, {trials} trial(s)")
        print(report.table())
        k = report.select("GSS-LSF", report.levels()[0])[0].meta["k"]
        print(f"truncation sizes of trial 0: {k}")

# The same thing the CLI writes with --out (and --plot for an SVG)
written = emit_report(report, "experiment3.csv")
print("wrote", ", ".join(str(p) for p in written))

#############################################################################
# Ablation: give every branch exactly the generating bandwidth instead of
# the lambda-ratio rule.

cfg = ExperimentConfig(experiment=2, nodes=250, trials=trials, k_override=(2, 4, 6, 8))
print(run_experiment(cfg).table())
