"""Rosenbrock density restricted to the unit circle: MH vs geodesic HMC."""

from latentspace.rosenbrock import angular_modes, circle_reference, run_rosenbrock

ref = circle_reference()
print(f"quadrature: mean R {ref['mean_R']:.4f}, modes {[round(m, 1) for m in ref['modes_deg'][:2]]}")
for alg in ("MH", "GHMC"):
    res = run_rosenbrock("circle", alg, samples=2000, burn_in=10000, thin=20)
    modes = sorted(angular_modes(res.samples).round(1).tolist())
    print(f"{alg:5s} mean R {res.mean_R:.4f}  acceptance {res.summary()['accept_rate']:.2f}  modes {modes}")
