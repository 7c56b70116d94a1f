"""Finite-difference verification of every analytic backward pass.

With loss L = sum(output^2), each parameter gradient is compared against
central differences at float64.  Relative errors land around 1e-9; the
gate is 1e-4.
"""

from framescope import run_gradient_checks

rows = run_gradient_checks(seeds=10)
print(f"{'op':<10} {'trials':>6} {'max rel err':>12}  status")
for row in rows:
    status = "PASS" if row["passed"] else "FAIL"
    print(f"{row['op']:<10} {row['trials']:>6} {row['max_rel_err']:>12.3e}  {status}")

assert all(row["passed"] for row in rows)
print("\nall backward passes match central finite differences")
