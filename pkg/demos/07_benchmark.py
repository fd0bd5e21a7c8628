"""
Monte Carlo comparison on the benchmark scenarios
=================================================

A small version of the benchmark: each run draws fresh identification and
test data; NSS is tuned on identification data only, while the Gaussian
baseline picks its window length by peeking at the test set.  Reports are
written as JSON, CSV and an SVG box plot.

With only 200 identification samples the 50-lag NSS locations are thin on
data, so expect lower and noisier fits than in the desk-scale study
(``rkhsid benchmark``, 500 samples per run).
"""

from _common import OUT
from rkhsid import BenchmarkConfig, emit_report, run_benchmark

for scenario in ("S1", "S2"):
    cfg = BenchmarkConfig(scenario=scenario, runs=4, n_train=200, n_test=200, m_grid=tuple(range(1, 11)))
    report = run_benchmark(cfg)
    print(f"scenario {scenario}")
    for name, s in report.summary.items():
        print(f"  {name:<16} median fit {s['median']:6.1f}%   IQR [{s['q1']:.1f}, {s['q3']:.1f}]")
    for fmt in ("json", "csv", "svg"):
        emit_report(report, fmt, OUT / f"benchmark_{scenario}.{fmt}")

print("\n".join(f"{k}: {v}" for k, v in report.labels.items()))
