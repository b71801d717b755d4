"""Named experiment inputs for the command line, including negative controls."""
from __future__ import annotations

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .algebra import diagonal_algebra, full_algebra
from .cpmap import (CpMap, choi_from_superop, depolarizing, from_choi, from_kraus, identity_map,
                    mixed_unitary, random_channel, random_unitary, unitary_conjugation)

# name -> (description, builder(seed) -> (channel or None, explicit maps or None))
Builder = Callable[[int], Tuple[Optional[CpMap], Optional[List[CpMap]]]]


def _nonpsd_choi(seed: int) -> np.ndarray:
    """Choi matrix of a unitary conjugation pushed to eigenvalue -0.01 along its kernel."""
    U = random_unitary(2, np.random.default_rng(seed))
    C = choi_from_superop(unitary_conjugation(U).superop)
    w, V = np.linalg.eigh(C)
    v = V[:, 0]
    return C - 0.01 * np.outer(v, np.conj(v))


PRESETS: Dict[str, Tuple[str, Builder]] = {
    "identity": ("identity map on B(C^2)", lambda s: (identity_map(full_algebra(2)), None)),
    "unitary": ("Ad_U for a Haar unitary U on C^2",
                lambda s: (unitary_conjugation(random_unitary(2, np.random.default_rng(s))), None)),
    "unitary-qutrit": ("Ad_U for a Haar unitary U on C^3",
                       lambda s: (unitary_conjugation(random_unitary(3, np.random.default_rng(s))), None)),
    "depolarizing": ("qubit depolarizing map, p = 0.3", lambda s: (depolarizing(0.3, 2), None)),
    "depolarizing-half": ("qubit depolarizing map, p = 0.5", lambda s: (depolarizing(0.5, 2), None)),
    "depolarizing-qutrit": ("qutrit depolarizing map, p = 0.3", lambda s: (depolarizing(0.3, 3), None)),
    "dephasing-diagonal": ("mixed unitary I, Z on the diagonal algebra of M_2",
                           lambda s: (mixed_unitary([0.3, 0.7], [np.eye(2), np.diag([1.0, -1.0])],
                                                    diagonal_algebra(2)), None)),
    "nonpsd": ("negative control: Choi matrix with eigenvalue -0.01",
               lambda s: (from_choi(full_algebra(2), _nonpsd_choi(s)), None)),
    "nonunital": ("negative control: Kraus operator 0.9 I",
                  lambda s: (from_kraus(full_algebra(2), [0.9 * np.eye(2)]), None)),
    "nonsemigroup": ("negative control: P_0 = id, P_1 = P_2 = depolarizing(0.3)",
                     lambda s: (None, [identity_map(full_algebra(2)), depolarizing(0.3), depolarizing(0.3)])),
}
for _r in range(1, 5):
    PRESETS[f"random-rank{_r}"] = (
        f"random qubit channel with Choi rank {_r}",
        (lambda r: lambda s: (random_channel(2, r, np.random.default_rng(s)), None))(_r))


def load_preset(name: str, seed: int = 0) -> Tuple[Optional[CpMap], Optional[List[CpMap]]]:
    if name not in PRESETS:
        raise KeyError(name)
    return PRESETS[name][1](seed)
