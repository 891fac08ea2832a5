"""Default catalog of inertially known unit directions.

Nine unit vectors produced once by a seeded optimization (pairwise 1/sin^2
repulsion plus a coplanarity penalty on every 3-subset, then a maximin pass
on the worst subset) and frozen here as literals. The design constraint is
that *every* subset a sensor model might draw stays well-conditioned:

* min |u_a x u_b| over all 36 pairs      = 0.406  (2-vector augmentation)
* min sigma_3([u_a u_b u_c]) over all 84 triples = 0.125  (3-vector weights)

A quasi-uniform covering optimized only for pairwise spread (e.g. a Fibonacci
lattice) can contain a nearly great-circle triple; the prescribed-spectrum
weights then blow up like 1/sigma_3^2 and a single unlucky 3-subset draw
destroys the run. The floors above are regression-tested.
"""
import numpy as np

# columns = directions (3 x 9)
DEFAULT_CATALOG = np.array([
    (-0.18605984990715405, 0.9574468138798442, -0.22062939705275536),
    (0.8798921294913321, -0.47242009282197156, -0.05107931437763123),
    (0.5298048476407372, 0.7875421589191505, 0.3147763830743008),
    (0.9064872477369984, 0.2115625185476128, 0.36540685603309736),
    (0.08286002754524942, -0.6992101344411225, 0.7100981648547109),
    (0.6496561091470734, -0.033048157208739805, 0.7595095517193925),
    (0.3140059015026643, 0.5533928887064119, 0.7714639360013351),
    (-0.5778865258650394, -0.09529117767847081, 0.8105348571654925),
    (-0.4916779115558703, 0.3107796057661725, 0.8134303092016428),
]).T

DEFAULT_CATALOG.setflags(write=False)
