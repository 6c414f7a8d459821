"""Which step densities can a random map on two semi-Markov boundary maps realize?

Both boundary maps are piecewise linear on the same six cells, so their
transfer operators are 6x6 matrices.  Mixing rows with p = (0.2, 0.8) on the
two free cells gives a matrix whose left eigenvector is uniform: the random
map preserves Lebesgue measure, like the selector 5x mod 1.  The bent
selector's density is different; constraint propagation shows that matching
it would force p = 2 somewhere, so no random map on these boundaries has it.
"""

import numpy as np

from holomap import catalog
from holomap.probsolver import infeasibility_probe
from holomap.semimarkov import combine, induced_matrix, left_invariant

np.set_printoptions(precision=3, suppress=True)


def main():
    pair = catalog.example2()
    E = pair.extra["edges"]
    M1, M2 = induced_matrix(pair.tau1, E), induced_matrix(pair.tau2, E)
    M = combine(M1, M2, pair.extra["p_cells"])
    print("combined matrix (density convention):")
    print(M.matrix)
    print("left invariant vector:", left_invariant(M))

    bent = catalog.example3()
    rep = infeasibility_probe(bent.tau1, bent.tau2, bent.extra["selector"], bent.extra["f"])
    print("\nbent selector density 30/31 on [0, 0.6), 65/62 on [0.6, 1]")
    print(f"  verdict {rep.verdict}: p on {rep.witness['cell']} is forced to {rep.forced_value:.6f}")
    print(f"  by the invariance equation on x in {rep.witness['x']}")


if __name__ == "__main__":
    main()
