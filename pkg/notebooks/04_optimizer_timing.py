"""How long one bid optimization takes as the guarantee grows."""

from dealbid import UniformWinModel, bench_optimizer

rows = bench_optimizer([1, 50, 200, 400], UniformWinModel(0.0, 0.04, 4), repetitions=200)
for r in rows:
    print(f"m={r.m:>3}: full {r.full_mean_s * 1e3:.3f} ms (p99 {r.full_p99_s * 1e3:.3f}),"
          f" warm re-opt {r.reopt_mean_s * 1e3:.3f} ms")
