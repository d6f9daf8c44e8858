"""Concrete groups: orthogonal, translation, general linear, permutation,
and semidirect/direct products, with Haar samplers where they exist.

Elements are plain values interpreted by their descriptor:

- orthogonal / general linear: dense (d, d) ndarray
- translation: (d,) ndarray
- permutation: tuple p with p[i] = sigma(i); composition (s*t)(i) = s(t(i))
- semidirect / direct products: pair (n, h) of factor elements

Haar on O(d)/SO(d) is QR of a Gaussian matrix with the R-diagonal signs
absorbed into Q (which makes the law exactly invariant); Haar on S_n is a
uniform shuffle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations as _itertools_permutations
from typing import Callable, List, Optional

import numpy as np

from .stochmap import RandomStream

AXIOM_TOL = 1e-9
REORTHO_TOL = 1e-12
DET_TOL = 1e-12


class GroupError(ValueError):
    pass


class NoHaarError(GroupError):
    """Haar sampling requested on a noncompact group."""


class SingularityError(GroupError):
    """General linear element with vanishing determinant."""


@dataclass
class GroupDescriptor:
    name: str
    mul: Callable
    inv: Callable
    identity: object
    haar: Optional[Callable] = None  # stream -> element
    elements: Optional[List] = None  # finite groups only, each listed once
    # random elements for property testing; Haar when available, otherwise
    # some fixed full-support distribution
    random_element: Optional[Callable] = None
    distance: Callable = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.distance is None:
            self.distance = element_distance
        if self.random_element is None and self.haar is not None:
            self.random_element = self.haar

    @property
    def compact(self) -> bool:
        return self.haar is not None


def mul(G: GroupDescriptor, g, h):
    return G.mul(g, h)


def inv(G: GroupDescriptor, g):
    return G.inv(g)


def haar_sample(G: GroupDescriptor, stream: RandomStream):
    if G.haar is None:
        raise NoHaarError(f"group {G.name} has no Haar measure (not compact)")
    return G.haar(stream)


def element_distance(g, h) -> float:
    """Max-abs distance between two elements of the same representation."""
    if isinstance(g, tuple) and not isinstance(h, np.ndarray):
        if len(g) != len(h):
            return float("inf")
        if g and isinstance(g[0], (int, np.integer)):
            return 0.0 if tuple(g) == tuple(h) else 1.0
        return max((element_distance(a, b) for a, b in zip(g, h)), default=0.0)
    ga, ha = np.asarray(g, dtype=float), np.asarray(h, dtype=float)
    if ga.shape != ha.shape:
        return float("inf")
    return float(np.max(np.abs(ga - ha))) if ga.size else 0.0


def elements_close(g, h, tol: float = AXIOM_TOL) -> bool:
    return element_distance(g, h) <= tol


# ---------------------------------------------------------------------------
# Matrix groups


def _reorthonormalize(Q: np.ndarray) -> np.ndarray:
    drift = np.linalg.norm(Q.T @ Q - np.eye(Q.shape[0]))
    if drift > REORTHO_TOL:
        U, _, Vt = np.linalg.svd(Q)
        Q = U @ Vt
    return Q


def _haar_orthogonal(d: int, stream: RandomStream, special: bool) -> np.ndarray:
    M = stream.normal((d, d))
    Q, R = np.linalg.qr(M)
    Q = Q * np.sign(np.diag(R))
    if special and np.linalg.det(Q) < 0:
        Q = Q.copy()
        Q[:, 0] = -Q[:, 0]
    return Q


def orthogonal_group(d: int, special: bool = False) -> GroupDescriptor:
    name = f"SO({d})" if special else f"O({d})"

    def gmul(a, b):
        return _reorthonormalize(a @ b)

    return GroupDescriptor(
        name=name,
        mul=gmul,
        inv=lambda g: g.T.copy(),
        identity=np.eye(d),
        haar=lambda stream: _haar_orthogonal(d, stream, special),
        meta={"kind": "orthogonal", "d": d, "special": special},
    )


def translation_group(d: int) -> GroupDescriptor:
    return GroupDescriptor(
        name=f"T_{d}",
        mul=lambda a, b: a + b,
        inv=lambda g: -g,
        identity=np.zeros(d),
        random_element=lambda stream: stream.normal(d),
        meta={"kind": "translation", "d": d},
    )


def general_linear_group(d: int) -> GroupDescriptor:
    def ginv(g):
        if abs(np.linalg.det(g)) <= DET_TOL:
            raise SingularityError("element of GL has |det| below threshold")
        return np.linalg.inv(g)

    def grandom(stream):
        # condition bound keeps float round-off in axiom/coset checks well
        # below the 1e-9 tolerance
        while True:
            A = stream.normal((d, d))
            if abs(np.linalg.det(A)) > 1e-3 and np.linalg.cond(A) < 1e3:
                return A

    return GroupDescriptor(
        name=f"GL({d})",
        mul=lambda a, b: a @ b,
        inv=ginv,
        identity=np.eye(d),
        random_element=grandom,
        meta={"kind": "general_linear", "d": d},
    )


# ---------------------------------------------------------------------------
# Permutations


def perm_compose(s: tuple, t: tuple) -> tuple:
    """(s*t)(i) = s(t(i))."""
    return tuple(s[t[i]] for i in range(len(s)))


def perm_inverse(s: tuple) -> tuple:
    out = [0] * len(s)
    for i, si in enumerate(s):
        out[si] = i
    return tuple(out)


def perm_apply(s: tuple, x: tuple) -> tuple:
    """Move entry i to position s(i): result[s(i)] = x[i]."""
    inv_s = perm_inverse(s)
    return tuple(x[inv_s[j]] for j in range(len(s)))


def symmetric_group(n: int) -> GroupDescriptor:
    return GroupDescriptor(
        name=f"S_{n}",
        mul=perm_compose,
        inv=perm_inverse,
        identity=tuple(range(n)),
        haar=lambda stream: stream.permutation(n),
        elements=[tuple(p) for p in _itertools_permutations(range(n))],
        meta={"kind": "permutation", "n": n},
    )


def trivial_group() -> GroupDescriptor:
    e = ()
    return GroupDescriptor(
        name="I",
        mul=lambda a, b: e,
        inv=lambda g: e,
        identity=e,
        haar=lambda stream: e,
        elements=[e],
        meta={"kind": "trivial"},
    )


# ---------------------------------------------------------------------------
# Products


def semidirect_product(
    N: GroupDescriptor,
    H: GroupDescriptor,
    rho: Callable,
    name: Optional[str] = None,
    check_samples: int = 32,
    check_stream: Optional[RandomStream] = None,
) -> GroupDescriptor:
    """Semidirect product N x| H with twist rho: (h, n) -> n'.

    Multiplication is (n, h)(n', h') = (n * rho(h, n'), h h') and inversion
    (n, h)^-1 = (rho(h^-1, n^-1), h^-1).  The compatibility condition
    rho(h, n * n') = rho(h, n) * rho(h, n') is verified on random samples
    at construction.
    """
    stream = check_stream if check_stream is not None else RandomStream(2**32 + 7)
    if N.random_element is not None and H.random_element is not None:
        for i in range(check_samples):
            s = stream.split(i)
            h = H.random_element(s.split(0))
            n1 = N.random_element(s.split(1))
            n2 = N.random_element(s.split(2))
            lhs = rho(h, N.mul(n1, n2))
            rhs = N.mul(rho(h, n1), rho(h, n2))
            if not elements_close(lhs, rhs):
                raise GroupError(
                    f"rho is not compatible with multiplication on {N.name}"
                )
            if not elements_close(rho(H.identity, n1), n1):
                raise GroupError("rho(identity, n) != n")

    def gmul(a, b):
        (n1, h1), (n2, h2) = a, b
        return (N.mul(n1, rho(h1, n2)), H.mul(h1, h2))

    def ginv(a):
        n, h = a
        hi = H.inv(h)
        return (rho(hi, N.inv(n)), hi)

    haar = None
    if N.haar is not None and H.haar is not None:
        haar = lambda stream: (N.haar(stream.split(0)), H.haar(stream.split(1)))

    random_element = None
    if N.random_element is not None and H.random_element is not None:
        random_element = lambda stream: (
            N.random_element(stream.split(0)),
            H.random_element(stream.split(1)),
        )

    elements = None
    if N.elements is not None and H.elements is not None:
        elements = [(n, h) for n in N.elements for h in H.elements]

    return GroupDescriptor(
        name=name or f"{N.name} x| {H.name}",
        mul=gmul,
        inv=ginv,
        identity=(N.identity, H.identity),
        haar=haar,
        elements=elements,
        random_element=random_element,
        meta={"kind": "semidirect", "N": N, "H": H, "rho": rho},
    )


def direct_product(G: GroupDescriptor, H: GroupDescriptor) -> GroupDescriptor:
    sd = semidirect_product(
        G, H, rho=lambda h, n: n, name=f"{G.name} x {H.name}", check_samples=0
    )
    sd.meta["kind"] = "direct"
    return sd


def special_euclidean_group(d: int) -> GroupDescriptor:
    """SE(d) = T_d x| SO(d), elements (t, Q), product (t + Q t', Q Q')."""
    N = translation_group(d)
    H = orthogonal_group(d, special=True)
    G = semidirect_product(N, H, rho=lambda Q, t: Q @ t, name=f"SE({d})")
    G.meta["kind"] = "euclidean"
    return G


def euclidean_group(d: int) -> GroupDescriptor:
    """Euc(d) = T_d x| O(d)."""
    N = translation_group(d)
    H = orthogonal_group(d, special=False)
    G = semidirect_product(N, H, rho=lambda Q, t: Q @ t, name=f"Euc({d})")
    G.meta["kind"] = "euclidean"
    return G
