"""Real observables of density matrices and their column names.

Populations are ``rho_aa``; coherences below the diagonal (row label first)
are split into ``rho_ab_re`` / ``rho_ab_im``.
"""

from __future__ import annotations

import numpy as np


def observable_names(labels) -> list[str]:
    labels = list(labels)
    names = [f"rho_{a}{a}" for a in labels]
    for i in range(len(labels)):
        for j in range(i):
            names += [f"rho_{labels[i]}{labels[j]}_re", f"rho_{labels[i]}{labels[j]}_im"]
    return names


def observables(states: np.ndarray, labels) -> dict[str, np.ndarray]:
    """Map states of shape (..., d, d) to a dict of real arrays of shape (...)."""
    labels = list(labels)
    d = len(labels)
    out = {}
    for i, a in enumerate(labels):
        out[f"rho_{a}{a}"] = states[..., i, i].real.copy()
    for i in range(d):
        for j in range(i):
            c = states[..., i, j]
            out[f"rho_{labels[i]}{labels[j]}_re"] = c.real.copy()
            out[f"rho_{labels[i]}{labels[j]}_im"] = c.imag.copy()
    return out
