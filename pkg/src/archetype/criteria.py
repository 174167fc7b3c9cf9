"""Per-run quality measures used by model selection."""

import numpy as np

from archetype.core import DataError, as_matrix


def fit_l1(x, e, a) -> float:
    """Entrywise l1 norm of the residual ``X - E A``."""
    X = as_matrix(getattr(x, "data", x), "X")
    E = as_matrix(e, "endmembers")
    A = as_matrix(a, "abundances")
    if E.shape[0] != X.shape[0] or A.shape[1] != X.shape[1] or E.shape[1] != A.shape[0]:
        raise DataError(f"shape mismatch: X {X.shape}, E {E.shape}, A {A.shape}")
    return float(np.abs(X - E @ A).sum())


def coherence(e, normalized: bool = False) -> float:
    """Largest inner product between two distinct endmember columns.

    With ``normalized=True`` the columns are scaled to unit norm first, giving
    the maximal cosine similarity instead of the raw inner product.
    """
    E = as_matrix(e, "endmembers")
    p = E.shape[1]
    if p < 2:
        raise DataError("coherence undefined for fewer than two endmembers")
    if normalized:
        norms = np.linalg.norm(E, axis=0)
        if np.any(norms == 0):
            raise DataError("cosine coherence undefined for a zero endmember")
        E = E / norms
    gram = E.T @ E
    iu = np.triu_indices(p, k=1)
    return float(gram[iu].max())
