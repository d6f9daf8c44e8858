"""The symmetrisation combinator and its supporting constructions.

symmetrise() turns a map that is equivariant to a subgroup H into one
equivariant to the full group G, by sampling a coset from gamma, un-acting
by its representative, applying the map, and re-acting:

    C ~ gamma(dc|x),  g = s(C),  Y ~ k(dy | g^-1 . x),  return g . Y

Also provided: Haar and columnwise-mean base cases for gamma, recursive
gamma construction, the expectation operator, and sequential composition
of symmetrisation procedures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .equivariance import Action, CosetBundle
from .groups import elements_close, haar_sample
from .stochmap import (
    EnumerationError,
    RandomStream,
    Space,
    StochasticMap,
    merge_atoms,
)


class SpecError(TypeError):
    pass


class GammaNotEquivariantError(ValueError):
    pass


@dataclass
class SymmetrisationSpec:
    bundle: CosetBundle
    action_x: Action
    action_y: Action
    gamma: StochasticMap  # X -> coset space, G-equivariant w.r.t. the coset action
    # points of X used to spot-check gamma's equivariance at construction;
    # empty disables the check (the obligation then rests on the caller)
    test_points: tuple = ()
    verify_stream_seed: int = 1234
    field_checked: bool = field(default=False, init=False)

    def __post_init__(self):
        if self.gamma.codomain != self.bundle.coset_space:
            raise SpecError(
                f"gamma codomain {self.gamma.codomain} does not match coset "
                f"space {self.bundle.coset_space}"
            )
        G = self.bundle.group
        if self.action_x.group is not G or self.action_y.group is not G:
            raise SpecError("actions and coset bundle must share the same group")
        if self.test_points:
            _verify_gamma(self)
            self.field_checked = True

    @property
    def group(self):
        return self.bundle.group


def _verify_gamma(spec: "SymmetrisationSpec") -> None:
    """Spot-check that gamma is equivariant: gamma(g.x) ~ g.gamma(x)."""
    G = spec.group
    stream = RandomStream(spec.verify_stream_seed)
    act = spec.bundle.coset_action.apply
    for i, x in enumerate(spec.test_points):
        g = G.random_element(stream.split(i)) if G.random_element else G.identity
        gx = spec.action_x.apply(g, x)
        if spec.gamma.deterministic:
            lhs = spec.gamma.sampler(gx, stream)
            rhs = act(g, spec.gamma.sampler(x, stream))
            if not elements_close(lhs, rhs, 1e-6):
                raise GammaNotEquivariantError(
                    f"deterministic gamma fails equivariance at test point {i}"
                )
        elif spec.gamma.finite_support and G.elements is not None:
            lhs = merge_atoms(spec.gamma.enumerator(gx))
            rhs = merge_atoms([(p, act(g, c)) for p, c in spec.gamma.enumerator(x)])
            from .stochmap import distributions_equal

            if not distributions_equal(lhs, rhs):
                raise GammaNotEquivariantError(
                    f"finite-support gamma fails exact equivariance at test point {i}"
                )
        else:
            n = 400
            lhs = _mean_point(spec.gamma, gx, stream.split(10_000 + i), n)
            rhs_draws = _mean_point(
                spec.gamma, x, stream.split(20_000 + i), n, post=lambda c: act(g, c)
            )
            if not elements_close(lhs, rhs_draws, 0.25):
                raise GammaNotEquivariantError(
                    f"gamma fails statistical equivariance check at test point {i}"
                )


def _mean_point(gamma: StochasticMap, x, stream: RandomStream, n: int, post=None):
    acc = None
    for j in range(n):
        c = gamma.sampler(x, stream.split(j))
        if post is not None:
            c = post(c)
        flat = _flatten_point(c)
        acc = flat if acc is None else acc + flat
    return acc / n


def _flatten_point(c):
    if isinstance(c, tuple):
        parts = [np.asarray(p, dtype=float).ravel() for p in c]
        return np.concatenate(parts) if parts else np.zeros(0)
    return np.asarray(c, dtype=float).ravel()


def symmetrise(k: StochasticMap, spec: SymmetrisationSpec) -> StochasticMap:
    """Symmetrise k along the spec's coset bundle using its gamma."""
    if k.domain != spec.action_x.space or k.codomain != spec.action_y.space:
        raise SpecError(
            f"map spaces ({k.domain}, {k.codomain}) do not match spec spaces "
            f"({spec.action_x.space}, {spec.action_y.space})"
        )
    G = spec.group
    bundle = spec.bundle
    ax, ay = spec.action_x.apply, spec.action_y.apply
    gamma = spec.gamma

    def sampler(x, stream: RandomStream):
        c = gamma.sampler(x, stream.split(0))
        g = bundle.s(c)
        y = k.sampler(ax(G.inv(g), x), stream.split(1))
        return ay(g, y)

    enum = None
    if gamma.finite_support and k.finite_support:

        def enum(x):
            out = []
            for p, c in gamma.enumerator(x):
                g = bundle.s(c)
                for q, y in k.enumerator(ax(G.inv(g), x)):
                    out.append((p * q, ay(g, y)))
            return merge_atoms(out)

    coupled = None
    if gamma.coupled_sampler is not None:

        def coupled(x, stream: RandomStream, gq):
            # evaluate at gq . x with the gamma draws coupled by gq, so that
            # the output equals gq . (draw at x with the same stream)
            c = gamma.coupled_sampler(x, stream.split(0), gq)
            g = bundle.s(c)
            y = k.sampler(ax(G.inv(g), ax(gq, x)), stream.split(1))
            return ay(g, y)

    out = StochasticMap(
        domain=k.domain,
        codomain=k.codomain,
        sampler=sampler,
        deterministic=gamma.deterministic and k.deterministic,
        enumerator=enum,
        coupled_sampler=coupled,
    )
    out.meta["symmetrised"] = True
    return out


def gamma_from_haar(bundle: CosetBundle, aX: Action) -> StochasticMap:
    """Input-independent gamma drawing Haar on the coset space.

    Available when the coset space is itself a compact group (the trivial
    bundle over a compact G, or a semidirect via_N bundle with compact H).
    Exactly equivariant because the Haar law is left-invariant.
    """
    cg = bundle.coset_group
    if cg is None or cg.haar is None:
        from .groups import NoHaarError

        raise NoHaarError(
            "gamma_from_haar needs a coset space that is a compact group"
        )
    act = bundle.coset_action.apply

    def sampler(x, stream: RandomStream):
        return haar_sample(cg, stream)

    sm = StochasticMap(
        domain=aX.space,
        codomain=bundle.coset_space,
        sampler=sampler,
        deterministic=False,
        coupled_sampler=lambda x, stream, g: act(g, haar_sample(cg, stream)),
    )
    if cg.elements is not None:
        p = Fraction(1, len(cg.elements))
        sm.enumerator = lambda x: [(p, e) for e in cg.elements]
    sm.meta["haar_gamma"] = True
    return sm


def gamma_columnwise_mean(d: int, n: int, mode: str = "translation") -> StochasticMap:
    """Deterministic gamma x -> (1/n) sum_i x_i for columnwise actions on R^{d x n}.

    mode='translation' targets the trivial bundle over T_d; mode='euclidean'
    targets the via_H coset space of SE(d) (also T_d concretely).
    """
    if n <= 0:
        raise ValueError("columnwise mean needs at least one column")
    if mode not in ("translation", "euclidean"):
        raise ValueError(f"unknown mode {mode!r}")
    domain = Space(f"R^({d}x{n})", (d, n))
    if mode == "translation":
        codomain = Space(f"coset:T_{d}/I")
    else:
        codomain = Space(f"coset:SE({d})/H")

    def f(x):
        return np.asarray(x, dtype=float).mean(axis=1)

    sm = StochasticMap(
        domain=domain,
        codomain=codomain,
        sampler=lambda x, stream: f(x),
        deterministic=True,
        enumerator=lambda x: [(Fraction(1), f(x))],
        coupled_sampler=None,
    )
    return sm


def gamma_recursive(gamma0: StochasticMap, inner_spec: SymmetrisationSpec) -> StochasticMap:
    """Build an equivariant gamma by symmetrising an unconstrained gamma0.

    inner_spec's Y-action must be the coset action of the bundle gamma0
    targets; the result is equivariant by construction.
    """
    if inner_spec.action_y.space != gamma0.codomain:
        raise SpecError(
            "inner spec's Y-action must live on gamma0's coset-space codomain"
        )
    return symmetrise(gamma0, inner_spec)


def average(
    k: StochasticMap,
    n_samples: int = 1,
    mode: str = "monte_carlo",
    seed: int = 0,
) -> StochasticMap:
    """Expectation operator: replace k by the deterministic map x -> E[k(.|x)].

    Exact mode sums p * y over the finite support (exact in rationals when
    the outcomes are rational).  Monte Carlo mode averages n_samples draws
    using streams derived from a seed frozen at construction, so the
    returned map is itself deterministic.
    """
    if mode == "exact_enumeration":
        if not k.finite_support:
            raise EnumerationError("exact averaging requires finite support")

        def f(x):
            atoms = merge_atoms(k.enumerator(x))
            return _convex_combination(atoms)

    elif mode == "monte_carlo":
        if n_samples < 1:
            raise ValueError("monte_carlo averaging needs n_samples >= 1")

        def f(x):
            stream = RandomStream(seed)
            acc = None
            for i in range(n_samples):
                y = np.asarray(k.sampler(x, stream.split(i)), dtype=float)
                acc = y if acc is None else acc + y
            return acc / n_samples

    else:
        raise ValueError(f"unknown averaging mode {mode!r}")

    return StochasticMap(
        domain=k.domain,
        codomain=k.codomain,
        sampler=lambda x, stream: f(x),
        deterministic=True,
        enumerator=lambda x: [(Fraction(1), f(x))],
    )


def _convex_combination(atoms):
    exact = all(
        isinstance(y, (int, Fraction)) and not isinstance(y, bool) for _, y in atoms
    )
    if exact:
        return sum((p * y for p, y in atoms), Fraction(0))
    acc = None
    for p, y in atoms:
        term = float(p) * np.asarray(y, dtype=float)
        acc = term if acc is None else acc + term
    return acc


def compose_procedures(
    outer: SymmetrisationSpec, inner: SymmetrisationSpec
) -> Callable[[StochasticMap], StochasticMap]:
    """Apply two symmetrisation procedures in sequence: K -> H -> G."""
    if inner.group.name != outer.bundle.phi.source.name:
        raise SpecError(
            "inner procedure must target the source group of the outer homomorphism"
        )
    return lambda k: symmetrise(symmetrise(k, inner), outer)
