"""Group actions, homomorphisms, and concrete coset bundles.

A CosetBundle packages, for a homomorphism phi: H -> G, the coset map
q: G -> G/H, a right-inverse s with q(s(c)) = c, and the induced action of
G on G/H that makes q equivariant: q(g g') = g . q(g').
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .groups import GroupDescriptor, trivial_group
from .stochmap import Space


class ActionError(TypeError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass
class Action:
    group: GroupDescriptor
    space: Space
    apply: Callable  # (group element, point) -> point


@dataclass
class Homomorphism:
    source: GroupDescriptor
    target: GroupDescriptor
    map: Callable  # element of source -> element of target


@dataclass
class CosetBundle:
    phi: Homomorphism
    coset_space: Space
    q: Callable  # G element -> coset point
    s: Callable  # coset point -> G element
    coset_action: Action  # G acting on G/H
    # descriptor of the coset space as a group, when it is one (trivial
    # bundle: G itself; semidirect bundles: the complementary factor)
    coset_group: Optional[GroupDescriptor] = None
    meta: dict = field(default_factory=dict)

    @property
    def group(self) -> GroupDescriptor:
        return self.phi.target


def trivial_action(G: GroupDescriptor, space: Space) -> Action:
    return Action(group=G, space=space, apply=lambda g, x: x)


def restrict_action(a: Action, phi: Homomorphism) -> Action:
    """Turn a G-action into an H-action along phi: H -> G."""
    if phi.target is not a.group:
        raise ActionError(
            f"cannot restrict along {phi.source.name}->{phi.target.name}: "
            f"action belongs to {a.group.name}"
        )
    return Action(group=phi.source, space=a.space, apply=lambda h, x: a.apply(phi.map(h), x))


def diagonal_action(aX: Action, aY: Action) -> Action:
    if aX.group is not aY.group:
        raise ActionError("diagonal action requires the same group on both factors")
    return Action(
        group=aX.group,
        space=Space(f"({aX.space.name})x({aY.space.name})"),
        apply=lambda g, xy: (aX.apply(g, xy[0]), aY.apply(g, xy[1])),
    )


def coset_bundle_trivial(G: GroupDescriptor) -> CosetBundle:
    """phi: I -> G; q = s = identity; coset action = left multiplication."""
    I = trivial_group()
    phi = Homomorphism(source=I, target=G, map=lambda e: G.identity)
    space = Space(f"coset:{G.name}/I")
    return CosetBundle(
        phi=phi,
        coset_space=space,
        q=lambda g: g,
        s=lambda c: c,
        coset_action=Action(group=G, space=space, apply=lambda g, c: G.mul(g, c)),
        coset_group=G,
        meta={"kind": "trivial"},
    )


def coset_bundle_orthogonal_in_gl(d: int, gl: Optional[GroupDescriptor] = None,
                                  orth: Optional[GroupDescriptor] = None) -> CosetBundle:
    """O(d) in GL(d,R): q(A) = A A^T onto positive-definite matrices.

    The right inverse is the lower-triangular Cholesky factor with positive
    diagonal, and the coset action is A . P = A P A^T.
    """
    from .groups import general_linear_group, orthogonal_group

    G = gl if gl is not None else general_linear_group(d)
    H = orth if orth is not None else orthogonal_group(d)
    phi = Homomorphism(source=H, target=G, map=lambda Q: Q)
    space = Space(f"pd({d})", (d, d))

    def s(P):
        P = np.asarray(P, dtype=float)
        eigvals = np.linalg.eigvalsh(P)
        if eigvals[0] <= 1e-12 * np.trace(P):
            raise NotPositiveDefiniteError(
                "coset representative requested for a non-positive-definite matrix"
            )
        return np.linalg.cholesky(P)

    return CosetBundle(
        phi=phi,
        coset_space=space,
        q=lambda A: A @ A.T,
        s=s,
        coset_action=Action(group=G, space=space, apply=lambda A, P: A @ P @ A.T),
        meta={"kind": "orthogonal_in_gl", "d": d},
    )


def coset_bundle_semidirect(product: GroupDescriptor, which: str) -> CosetBundle:
    """Coset bundles of a semidirect product N x| H along its inclusions.

    which='via_N': phi = i_N, q projects to H, s includes H back, coset
    action (n, h) . h' = h h'.
    which='via_H': phi = i_H, q projects to N, s includes N back, coset
    action (n, h) . n' = n * (h |> n'); for SE(d) this is (t, Q) . t' = t + Q t'.
    """
    kind = product.meta.get("kind")
    if kind not in ("semidirect", "direct", "euclidean"):
        raise ActionError(f"{product.name} is not a semidirect product descriptor")
    N: GroupDescriptor = product.meta["N"]
    H: GroupDescriptor = product.meta["H"]
    rho = product.meta["rho"]

    if which == "via_N":
        phi = Homomorphism(source=N, target=product, map=lambda n: (n, H.identity))
        space = Space(f"coset:{product.name}/N")
        return CosetBundle(
            phi=phi,
            coset_space=space,
            q=lambda g: g[1],
            s=lambda h: (N.identity, h),
            coset_action=Action(
                group=product, space=space, apply=lambda g, h2: H.mul(g[1], h2)
            ),
            coset_group=H,
            meta={"kind": "semidirect_via_N"},
        )
    if which == "via_H":
        phi = Homomorphism(source=H, target=product, map=lambda h: (N.identity, h))
        space = Space(f"coset:{product.name}/H")
        return CosetBundle(
            phi=phi,
            coset_space=space,
            q=lambda g: g[0],
            s=lambda n: (n, H.identity),
            coset_action=Action(
                group=product,
                space=space,
                apply=lambda g, n2: N.mul(g[0], rho(g[1], n2)),
            ),
            coset_group=N,
            meta={"kind": "semidirect_via_H"},
        )
    raise ActionError(f"unknown coset direction {which!r} (expected via_N or via_H)")
