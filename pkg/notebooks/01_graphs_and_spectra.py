"""
Graphs, Laplacians and truncated Fourier bases
==============================================

Builds the two graph families used throughout, looks at their spectra and
shows how the lambda-ratio rule picks a truncation size.
"""

import numpy as np

from gsslsf.graphs import (
    build_laplacian,
    default_rgg_radius,
    generate_random_geometric,
    generate_random_regular,
)
from gsslsf.spectral import eigendecompose, project, reconstruct, select_cutoff, truncated_basis

rng = np.random.default_rng(0)

# A connected random geometric graph and a random 4-regular graph on 250 nodes
rgg = generate_random_geometric(250, rng=rng)
reg = generate_random_regular(250, 4, rng=rng)
print(f"rgg radius {default_rgg_radius(250):.3f}, mean degree {rgg.degrees().mean():.2f}")
print(f"regular graph degrees: {set(reg.degrees().tolist())}")

# Combinatorial Laplacians and their eigenpairs
eig_rgg = eigendecompose(build_laplacian(rgg))
eig_reg = eigendecompose(build_laplacian(reg))
for name, eig in [("rgg", eig_rgg), ("4-regular", eig_reg)]:
    print(f"{name:>9}: lambda_max {eig.lambda_max:6.2f}, first nonzero {eig.values[1]:.4f}")

# The cutoff rule keeps every non-constant eigenvalue below ratio * lambda_max
for ratio in (0.1, 0.3, 0.5):
    ks = [select_cutoff(e.values, ratio) for e in (eig_rgg, eig_reg)]
    print(f"lambda_ratio {ratio}: k = {ks}")

#############################################################################
# Projection onto a truncated basis is an orthogonal projection that drops
# the constant mode, so a smooth signal survives and a constant vanishes.

basis = truncated_basis(eig_rgg, select_cutoff(eig_rgg.values, 0.1))
smooth = eig_rgg.vectors[:, 1:4] @ np.array([1.0, -0.5, 0.25])
noisy = smooth + 0.3 * rng.standard_normal(250) + 2.0
back = reconstruct(basis, project(basis, noisy))
rel = lambda x: np.linalg.norm(x - smooth) / np.linalg.norm(smooth)
print(f"relative error before projection {rel(noisy - noisy.mean()):.3f}, after {rel(back):.3f}")
print(f"mean of the projected signal: {back.mean():.1e}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(eig_rgg.values, label="geometric")
    ax.plot(eig_reg.values, label="4-regular")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.legend()
    fig.tight_layout()
    fig.savefig("spectra.svg")
    print("wrote spectra.svg")
except ImportError:
    pass
