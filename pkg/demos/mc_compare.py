"""SLV against SABR at matched workloads: terminal means and stepping time."""

from wnslv.montecarlo import benchmark_pair
from wnslv.presets import BENCH_CONFIG, REFERENCE_MODEL, REFERENCE_SABR

print(f"{BENCH_CONFIG.n_paths} paths x {BENCH_CONFIG.n_steps} steps, seed {BENCH_CONFIG.seed}")
for row in benchmark_pair(REFERENCE_MODEL, REFERENCE_SABR, BENCH_CONFIG, repeats=5):
    print(f"{row['model']:>5}: median {row['median_seconds']:.4f}s  "
          f"E[S_T] {row['mean_S_T']:.3f}  E[v_T] {row['mean_v_T']:.5f}  flagged {row['flagged_paths']}")
