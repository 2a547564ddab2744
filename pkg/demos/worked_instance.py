"""
The bundled worked instance and its flagged closed-form point
=============================================================

The package ships a 5-dimensional instance (p = 3, q = 2) together with a
closed-form candidate point.  The candidate clears four of the five
certificate conditions exactly, but its chain gaps are not orthogonal to
the prefix sums of the image, so the classifier rejects it.  The actual
solution keeps the same norm block and level with all chain gaps closed.
This script reproduces both verdicts and then re-solves from scratch.
"""
import numpy as np

from mesoc import (
    ConePoint,
    affine_image,
    alpha_beta_certificate,
    classify_pair,
    solve_lcp,
    x_from_reform,
)
from mesoc.reference import (
    claimed_point,
    claimed_point_report,
    known_solution,
    reference_instance,
)

inst = reference_instance()
print("blocks:", inst.dims, "offset y:", inst.r.x, "offset v:", inst.r.u)

# the distributed candidate: coupling rows vanish, norms align ...
report = claimed_point_report(inst)
for key in ("coupling_inf", "level_defect", "sum_y", "norm_v", "lambda", "colinearity"):
    print(f"  {key:12s} {report[key]: .9f}")
# ... but the gap/prefix inner product does not go away
print("  gap_inner    ", f"{report['gap_inner']: .9f}", " <- the defect")

pt = claimed_point()
print("claimed x:", np.round(x_from_reform(pt), 8))

# the certified solution: same u and level, all gaps closed
z_star = known_solution()
cert = classify_pair(z_star, affine_image(inst, z_star), 1e-9)
print("true solution x:", np.round(z_star.x, 8))
print("case:", cert.case_tag, "member:", cert.member,
      "lambda:", round(cert.lam, 9))

# the gap/prefix certificate splits the orthogonality into two orthant
# vectors whose inner product must vanish; compare both points
ab_star = alpha_beta_certificate(inst, z_star, 1e-8)
ab_claim = alpha_beta_certificate(inst, ConePoint(x_from_reform(pt), pt.u), 1e-8)
print("inner product at solution:", round(ab_star.inner, 12),
      "complementary:", ab_star.complementary)
print("inner product at claimed point:", round(ab_claim.inner, 8),
      "complementary:", ab_claim.complementary)

# multistart semismooth solve recovers the same point from nothing
result = solve_lcp(inst, n_starts=20, seed=0)
print("solve status:", result.status, "residual:", f"{result.residual_inf:.3e}",
      "start:", result.start_index)
print("max |x - x*|:", f"{np.max(np.abs(result.z.x - z_star.x)):.3e}")
