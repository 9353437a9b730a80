"""The precision-weighted posterior: how tau trades prior against views.

Builds a small equilibrium prior, injects deliberately different views, and
sweeps tau to show the posterior sliding from the prior to the views. Saves
a plot when matplotlib is available.
"""

import numpy as np

from blview import (
    BLInputs,
    ViewSet,
    condition_covariance,
    implied_equilibrium,
    posterior,
)

rng = np.random.default_rng(5)
n = 4
block = rng.normal(5e-4, 0.012, (n, 60))
sigma = condition_covariance(np.cov(block, ddof=1))
caps = np.array([4.0, 2.0, 1.0, 1.0]) * 1e9

prior = implied_equilibrium(caps, sigma, delta=2.5)
print("market weights:", np.round(prior.market_weights, 3))
print("prior pi (bp/day):", np.round(1e4 * prior.pi, 2))

# Views disagree with the prior on purpose
q = prior.pi + np.array([8e-4, -6e-4, 4e-4, -2e-4])
omega = np.diag(np.full(n, 2.5e-7))
views = ViewSet(q=q, P=np.eye(n), omega=omega, k=n)
print("views q (bp/day):", np.round(1e4 * q, 2))

taus = np.logspace(-4, 2, 25)
paths = []
for tau in taus:
    mu = posterior(BLInputs(prior=prior, sigma=sigma, tau=tau, views=views)).mu
    paths.append(mu)
paths = np.array(paths)

print(f"tau={taus[0]:.1e}: mu-pi distance {np.linalg.norm(paths[0] - prior.pi):.2e}")
print(f"tau={taus[-1]:.1e}: mu-q  distance {np.linalg.norm(paths[-1] - q):.2e}")
mid = len(taus) // 2
print(f"mid tau={taus[mid]:.2e}: mu (bp/day) {np.round(1e4 * paths[mid], 2)}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import os

    out = os.path.join(os.path.dirname(__file__), "output")
    os.makedirs(out, exist_ok=True)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i in range(n):
        ax.semilogx(taus, 1e4 * paths[:, i], label=f"asset {i}")
        ax.axhline(1e4 * q[i], ls=":", lw=0.8, color="grey")
    ax.set_xlabel("tau")
    ax.set_ylabel("posterior expected return (bp/day)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out, "03_posterior_paths.png"), dpi=110)
    print("saved", os.path.join(out, "03_posterior_paths.png"))
except ImportError:
    print("matplotlib not installed; skipping the plot")
