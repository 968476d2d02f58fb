"""Particle-number sectors and droplet bands.

Builds the spin chain on a few sites, splits it into fixed-N sectors, and
checks that the pieces reassemble the full spectrum.  Then it prints the
droplet band of each N and compares a long clean chain with those bands.

Run:  python3 demos/01_sectors_and_bands.py
"""

import numpy as np

from xxzdroplet import config_space as cs
from xxzdroplet.operators import (
    DisorderRealization,
    DisorderSpec,
    ModelParams,
    build_sector_hamiltonian,
    build_spin_hamiltonian,
    sample_disorder,
)
from xxzdroplet.spectral import diagonalize, droplet_band

L = 3
p = ModelParams(Delta=2.0, lam=1.0, L=L)
omega = sample_disorder(DisorderSpec(), L, seed=11)

full = np.linalg.eigvalsh(build_spin_hamiltonian(p, omega).matrix.toarray())
pieces = [np.zeros(1)]
print(f"chain of {2 * L + 1} sites, Delta={p.Delta}, lam={p.lam}")
for N in range(1, 2 * L + 2):
    op = build_sector_hamiltonian(N, p, omega)
    edge = cs.edge_configs(op.space).shape[0]
    print(f"  N={N}: {op.dim:3d} configurations, {edge} of them a single cluster")
    pieces.append(np.linalg.eigvalsh(op.dense()))
glued = np.sort(np.concatenate(pieces))
print(f"largest mismatch after gluing the sectors: {np.abs(glued - full).max():.1e}\n")

print("droplet bands at Delta=2")
for N in range(1, 7):
    a, b = droplet_band(N, 2.0)
    print(f"  N={N}: [{a:.6f}, {b:.6f}]  width {b - a:.2e}")
print(f"  limit sqrt(1 - 1/Delta^2) = {np.sqrt(0.75):.6f}\n")

# A long clean chain with a neutral boundary field: its low eigenvalues fill
# the band and nothing sits below it.
L = 40
for N in (1, 2):
    q = ModelParams(Delta=2.0, lam=0.0, L=L, beta=0.5)
    op = build_sector_hamiltonian(N, q, DisorderRealization.constant(L))
    band = droplet_band(N, 2.0)
    w = diagonalize(op, mode="window", interval=(q.gap, band[1])).eigenvalues
    print(f"clean chain L={L}, N={N}: {w.size} eigenvalues in "
          f"[{w.min():.4f}, {w.max():.4f}], band [{band[0]:.4f}, {band[1]:.4f}]")
