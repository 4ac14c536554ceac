"""Quick end-to-end check of the Python bindings.

Run after `pip install -e . --no-build-isolation` from the repository root:

    python python/smoke_test.py
"""

import math

import bte


def main():
    # frequency constants and the pointwise frequency obey nu_0 <v> <= nu <= nu_1 <v>
    lo, hi = bte.nu_0(), bte.nu_1()
    assert 0.0 < lo < hi
    for v in [(0.0, 0.0, 0.0), (1.0, -0.5, 2.0), (3.0, 0.0, 0.0)]:
        nu, nu_err = bte.collision_frequency(v)
        bracket = math.sqrt(1.0 + sum(c * c for c in v))
        assert lo * bracket <= nu + nu_err and nu - nu_err <= hi * bracket, (v, nu)

    # Maxwellian has unit mass scaling at the origin
    m0 = bte.maxwellian((0.0, 0.0, 0.0))
    assert abs(m0 - (2.0 * math.pi) ** -1.5) < 1e-15

    # kernel: equilibrium identity K(M) = nu * M, second order in the
    # velocity cell width (midpoint rule), so only a few percent at n_v=8
    kern = bte.Kernel(v_max=4.0, n_v=8, c_k=1.6)
    n = len(kern)
    km = kern.k_matrix()
    nu = kern.nu
    mvals = [bte.maxwellian(kern.node(i)) for i in range(n)]
    worst = 0.0
    for i in range(n):
        # skip far-tail nodes where the Maxwellian is negligible and the
        # relative error is dominated by the domain truncation
        if sum(c * c for c in kern.node(i)) > 9.0:
            continue
        gain = sum(km[i * n + j] * mvals[j] for j in range(n))
        worst = max(worst, abs(gain - nu[i] * mvals[i]) / (nu[i] * mvals[i]))
    assert worst < 0.25, worst

    # wall-weight normalization tends to 1 from above for large cross-over radius
    t6, t10 = bte.theta(6.0), bte.theta(10.0)
    assert t6 >= t10 >= 1.0

    # geometry: signed distance has the right sign on a stretched cylinder
    dom = bte.Domain.cylinder(1.0, 1.0, 0.5)
    assert dom.half_length == 2.0
    assert dom.signed_distance((0.0, 0.0, 0.0)) > 0.0
    assert dom.signed_distance((5.0, 0.0, 0.0)) < 0.0

    # short axial decay run: positive fitted rate, conserved mass
    rep = bte.linear_decay(kern, epsilon=0.5, horizon=5.0)
    assert rep["decay_rate"] > 0.0, rep["decay_rate"]
    # the sinusoidal datum is zero-mean, so mass stays at rounding level
    assert rep["mass_drift"] <= 1e-10
    assert len(rep["times"]) == len(rep["sup_norms"])

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
