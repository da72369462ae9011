# Contour integrals against simulation
#
# Under step data the normalised E[Z] at time t has an n-fold contour
# integral formula.  Below it is compared with a Monte Carlo estimate for a
# few positions and times.

from dynasep import ModelParams, contour_E_step, mc_duality_estimate
from dynasep.moments import ContourError, ContourSpec

q = 0.5
params = ModelParams(q, 1.0)

for x, t in [((-2,), 0.5), ((-2,), 1.0), ((0, -3), 1.0), ((-1, -3), 0.5)]:
    exact = contour_E_step(x, t, q)
    mc = mc_duality_estimate(x, t, params, "step", 40_000, seed=7)
    z = (mc.estimate - exact) / mc.stderr
    print(f"x={str(x):9s} t={t}: contour {exact:+.6f}  mc {mc.estimate:+.6f} +- {mc.stderr:.6f}  ({z:+.2f} sigma)")


# The quadrature converges fast.  Doubling the nodes changes nothing at
# short times; at longer times the integrand develops an essential
# singularity near y = 1 and the digits start to go.

for t in (0.5, 1.0, 2.0, 3.0):
    base = ContourSpec.default(q)
    a = contour_E_step((0, -3), t, q, base)
    b = contour_E_step((0, -3), t, q, ContourSpec(base.radius, 2 * base.nodes_per_contour))
    try:
        c = contour_E_step((0, -3), t, q, ContourSpec(base.radius / 2, base.nodes_per_contour))
    except ContourError as err:
        print(f"t={t}: value {a:.12f}  doubling {abs(a - b):.1e}  half radius refused: {err}")
        continue
    print(f"t={t}: value {a:.12f}  doubling {abs(a - b):.1e}  half radius {abs(a - c):.1e}")


# Half-stationary data shifts every position by one.

from dynasep import contour_E_half

print("half vs shifted step:", contour_E_half((0,), 1.0, q), contour_E_step((-1,), 1.0, q))
