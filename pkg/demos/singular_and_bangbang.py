"""Two maps without acims, and the extreme densities between boundary maps.

Each quadratic map of the singular pair sends almost every orbit to 0, yet
choosing between them with a suitable p preserves Lebesgue measure.  A
simulation shows both facts.  The second half refines the boundary maps on
uniform partitions and tracks the largest mean position int x f(x) dx that
bang-bang random maps reach.
"""

from holomap import catalog
from holomap.bangbang import refine_and_converge
from holomap.fperron import RandomMap
from holomap.montecarlo import SimConfig, bin_deviation, ks_distance, mass_near, simulate


def simulation():
    pair = catalog.singular()
    cfg = SimConfig(seed=0, n_steps=200_000, bins=100)
    alone = simulate(RandomMap(pair.tau1, pair.tau1, 1.0), 0.4, cfg)
    print(f"lower map alone: mass in [0, 0.01] = {mass_near(alone, 0, 0.01):.4f}")
    both = simulate(RandomMap(pair.tau1, pair.tau2, pair.p), 0.4, cfg)
    print(f"random map: KS to uniform {ks_distance(both, 1.0):.4f}, "
          f"worst bin {bin_deviation(both, 1.0):.4f}")


def refinement():
    pair = catalog.singular()
    rows, _ = refine_and_converge(pair.tau1, pair.tau2, lambda x: x, [8, 16, 32, 64, 128],
                                  p=pair.p)
    print("\n   N  best int x f   worst int x f  method       density L1 step")
    for r in rows:
        print(f"{r.N:4d}  {r.best_value:.6f}      {r.worst_value:.6f}       {r.method:10s}"
              f"   {r.density_l1:.2e}")


if __name__ == "__main__":
    simulation()
    refinement()
