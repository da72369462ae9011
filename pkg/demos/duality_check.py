# Checking the duality identity by brute force
#
# For every height window of a given length the generator of the dynamic
# ASEP applied to Z(x; .) must equal the ASEP generator (left rate 1, right
# rate q) applied to Z(.; s).  With rational q and alpha the residual is
# exactly zero.

from dynasep import ModelParams, ParticleConfig, check_duality_identity, duality_Z, sweep_duality
from dynasep.initdata import step_heights

p = ModelParams.exact("1/2", "1/3")
w = step_heights(-5, 3)
x = ParticleConfig((-1, -3))
print("Z at the wedge:", duality_Z(x, w, p))
print("residual:", check_duality_identity(x, w, p))

total = nonzero = 0
for length in range(3, 8):
    for _, _, res in sweep_duality(2, length, p):
        total += 1
        nonzero += res != 0
print(f"{total} cases, {nonzero} nonzero residuals")


# In floating point the same sweep leaves roundoff-sized residuals.

pf = ModelParams(0.5, 1 / 3)
worst = max(abs(res) for _, _, res in sweep_duality(2, 7, pf))
print("float worst residual:", worst)


# The functional factorises, which makes its zeros easy to read off: the
# k-th factor vanishes exactly when N_x = k - 1.

from dynasep.duality import duality_factor

for N in range(-1, 4):
    print(f"k=2, x=0, N={N}:", duality_factor(2, 0, N, p))
