# Growth of a height function from step data
#
# Start from the wedge s_x = |x| and let the dynamic ASEP run.  The
# interface fills in from the bottom of the wedge.  At q close to 1 the
# drift is weak and the profile stays rough.

import numpy as np

from dynasep import ModelParams, simulate_dynamic_asep, step_heights

params = ModelParams(0.5, 1.0)
w0 = step_heights(-12, 12)
traj = simulate_dynamic_asep(w0, 4.0, params, seed=3)
print("events:", len(traj.events))

for t in (0.0, 1.0, 2.0, 4.0):
    w = traj.window_at(t)
    print(f"t={t:3.1f}", " ".join(f"{s:3d}" for s in w.heights))


# Averaging over many runs gives a smooth mean profile.  The batch sampler
# takes an array of initial heights, one row per trial.

from dynasep.process import simulate_dynamic_asep_batch

rng = np.random.default_rng(0)
h0 = np.tile(np.array(w0.heights), (5000, 1))
h = simulate_dynamic_asep_batch(h0, 4.0, params, rng)
mean = h.mean(axis=0)
for x, m in zip(w0.sites, mean):
    if x % 3 == 0:
        print(f"x={x:4d}  mean s={m:7.3f}  wedge={abs(x)}")


# The alpha parameter tilts the rates with the current height.  Large alpha
# gives back plain ASEP flip rates away from the origin.

for alpha in (0.1, 1.0, 10.0):
    p = ModelParams(0.5, alpha)
    hh = simulate_dynamic_asep_batch(h0[:2000].copy(), 4.0, p, np.random.default_rng(1))
    print(f"alpha={alpha:5.1f}  mean height at 0: {hh[:, 12].mean():.3f}")
