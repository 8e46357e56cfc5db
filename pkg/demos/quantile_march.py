"""March the Cauchy quantile from its median and bound it with a convex PWA function.

Prints the march error against tan(pi (p - 1/2)) and the segments of the
over-approximation kept by the greedy chord reduction.
"""

import time

import numpy as np

from heavytail_ccp import StudentT, reduce_to_pwa, taylor_march

law = StudentT(1.0)
t0 = time.perf_counter()
table = taylor_march(law.pdf_derivs, 0.5, 0.0, h=5e-6, p_end=0.9999, n_d=4)
elapsed = time.perf_counter() - t0

exact = np.tan(np.pi * (table.probabilities - 0.5))
err = np.abs(table.values - exact)
print(f"{len(table)} grid points in {elapsed:.2f} s")
print(f"max abs error {err.max():.3e} at p={table.probabilities[err.argmax()]:.6f}")
print(f"max rel error {np.max(err / np.maximum(np.abs(exact), 1e-3)):.3e}")

pwa = reduce_to_pwa(table, xi=0.01)
gap = pwa(table.probabilities) - table.values
print(f"\n{len(pwa)} segments, gap in [{gap.min():.2e}, {gap.max():.2e}]")
for (m, c), a, b in list(zip(pwa.segments, pwa.knots[:-1], pwa.knots[1:]))[-5:]:
    print(f"  p in [{a:.6f}, {b:.6f}]: {m:12.4f} p + {c:12.4f}")
