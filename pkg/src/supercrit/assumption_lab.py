"""Sampled verification of the remainder inequalities and their constants.

Every estimator draws from a seeded plan (quasi-uniform grid plus pseudo-random
pairs) and reports a sup only when it is stable under sample doubling. These
are empirical constants, not proofs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nonlinearity import (
    AssumptionClass,
    NlsNonlinearitySpec,
    NonlinearitySpec,
    two_star,
)

__all__ = [
    "ConstantEstimate",
    "InequalityReport",
    "UnboundedEstimateError",
    "verify_sign_condition",
    "verify_growth_bound",
    "verify_potential_lower_bound",
    "verify_nls_coercivity",
    "estimate_remainder_constant",
    "estimate_taylor_constant",
    "estimate_phase_bound",
    "verify_nls_cancellation",
    "find_convexity_shift",
    "classify",
]

DEFAULT_SEED = 20240811
_STABILITY_SLACK = 0.05  # sup accepted when doubling moves it less than 5%
_NONNEG_SLACK = 1e-9     # numerical slack for analytic ">= 0" statements


class UnboundedEstimateError(RuntimeError):
    """Sup keeps growing under window doubling: the hypothesis looks violated."""


@dataclass(frozen=True)
class ConstantEstimate:
    name: str
    R: float
    value: float
    samples: int
    worst_pair: tuple
    stable: bool = True

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "R": self.R,
            "value": self.value,
            "samples": self.samples,
            "worst_pair": list(self.worst_pair),
            "stable": self.stable,
        }


@dataclass(frozen=True)
class InequalityReport:
    inequality: str
    holds: bool
    violations: list = field(default_factory=list)
    constant: ConstantEstimate | None = None

    def as_dict(self) -> dict:
        return {
            "inequality": self.inequality,
            "holds": self.holds,
            "violations": self.violations,
            "constant": None if self.constant is None else self.constant.as_dict(),
        }


def _pairs(R: float, W: float, n_random: int, seed: int):
    """Grid plus random (u, w) samples with |u| <= R, |w| <= W."""
    side = max(8, int(np.sqrt(n_random)))
    ug = np.linspace(-R, R, side)
    wg = np.linspace(-W, W, side)
    uu, ww = np.meshgrid(ug, wg, indexing="ij")
    rng = np.random.default_rng(seed)
    ur = rng.uniform(-R, R, n_random)
    wr = rng.uniform(-W, W, n_random)
    return np.concatenate([uu.ravel(), ur]), np.concatenate([ww.ravel(), wr])


def _sup_ratio(num, den, u, w):
    """Max of num/den over samples with den > 0, plus the attaining pair."""
    mask = den > 0
    ratio = np.where(mask, num / np.where(mask, den, 1.0), 0.0)
    ratio = np.where(np.isfinite(ratio), ratio, 0.0)
    i = int(np.argmax(ratio))
    if np.iscomplexobj(u) or np.iscomplexobj(w):
        return float(ratio[i]), (str(complex(u[i])), str(complex(w[i])))
    return float(ratio[i]), (float(u[i]), float(w[i]))


def _scalar_plan(R: float, n: int, seed: int) -> np.ndarray:
    """Fixed sample plan on [-R, R]: symmetric grid plus seeded randoms."""
    grid = np.linspace(-R, R, max(8, n // 4))
    rng = np.random.default_rng(seed)
    return np.concatenate([grid, rng.uniform(-R, R, n)])


def _record_violations(u: np.ndarray, lhs: np.ndarray, rhs: np.ndarray, limit: int = 16):
    bad = np.flatnonzero(~(lhs <= rhs))
    return [
        {"u": float(u[i]), "lhs": float(lhs[i]), "rhs": float(rhs[i])}
        for i in bad[:limit]
    ]


def verify_sign_condition(
    spec: NonlinearitySpec,
    R: float = 8.0,
    samples: int = 100_000,
    seed: int = DEFAULT_SEED,
) -> InequalityReport:
    """Defocusing sign condition u f(u) >= 0, checked exactly on the plan."""
    u = _scalar_plan(R, samples, seed)
    with np.errstate(over="ignore", invalid="ignore"):
        prod = u * spec.f(u)
    violations = _record_violations(u, np.zeros_like(prod), prod)
    return InequalityReport("H1", not violations, violations)


def verify_growth_bound(
    spec: NonlinearitySpec,
    R: float = 8.0,
    samples: int = 100_000,
    seed: int = DEFAULT_SEED,
) -> InequalityReport:
    """Growth bound |f(u)| <= C |u|^q with the spec's declared C and q."""
    if spec.q is None or spec.C_growth is None:
        raise ValueError(f"{spec.name} declares no growth bound")
    u = _scalar_plan(R, samples, seed)
    with np.errstate(over="ignore", invalid="ignore"):
        lhs = np.abs(spec.f(u))
        rhs = spec.C_growth * np.abs(u) ** spec.q * (1.0 + 1e-12)
    violations = _record_violations(u, lhs, rhs)
    return InequalityReport("H2", not violations, violations)


def verify_potential_lower_bound(
    spec: NonlinearitySpec,
    C: float = 1.0,
    R: float = 8.0,
    samples: int = 100_000,
    seed: int = DEFAULT_SEED,
) -> InequalityReport:
    """Lower bound F(u) >= -C u^2 on the plan (oscillating class and F_k)."""
    u = _scalar_plan(R, samples, seed)
    with np.errstate(over="ignore", invalid="ignore"):
        lhs = -C * u ** 2 - _NONNEG_SLACK
        rhs = spec.F(u)
    violations = _record_violations(u, lhs, rhs)
    return InequalityReport("H21", not violations, violations)


def verify_nls_coercivity(
    spec: NlsNonlinearitySpec,
    s_min: float = 5e-5,
    s_max: float = 50.0,
    samples: int = 100_000,
    seed: int = DEFAULT_SEED,
) -> InequalityReport:
    """Coercivity 0 <= sqrt(s) F'(s) <= C F(s) on the density plan [s_min, s_max].

    The lower end matters: for the built-in coercive entry the quotient
    behaves like 1/sqrt(s) near zero, so the declared constant is only valid
    down to the plan's s_min.
    """
    if spec.coercivity_constant is None:
        raise ValueError(f"{spec.name} declares no coercivity constant")
    rng = np.random.default_rng(seed)
    s = np.concatenate([
        np.geomspace(s_min, s_max, max(8, samples // 4)),
        rng.uniform(s_min, s_max, samples),
    ])
    mid = np.sqrt(s) * spec.Fsprime(s)
    low_bad = _record_violations(s, np.zeros_like(mid), mid)
    high_bad = _record_violations(s, mid, spec.coercivity_constant * spec.Fs(s))
    violations = low_bad + high_bad
    return InequalityReport("coercive", not violations, violations)


def estimate_remainder_constant(
    spec: NonlinearitySpec,
    R: float,
    n_random: int = 1_000_000,
    seed: int = DEFAULT_SEED,
) -> ConstantEstimate:
    """Smallest sampled C(R) with F(u+w) - F(u) - f(u)w >= -C(R) w^2 on |u| <= R."""
    if R <= 0:
        raise ValueError("R must be positive")

    def sup_for(W: float, n: int, s: int):
        u, w = _pairs(R, W, n, s)
        with np.errstate(over="ignore", invalid="ignore"):
            rem = spec.F(u + w) - spec.F(u) - spec.f(u) * w
            neg = np.maximum(0.0, -rem)
        return _sup_ratio(neg, w ** 2, u, w)

    W = 8.0 * R
    sups = [sup_for(W * 2 ** j, n_random, seed + j)[0] for j in range(4)]
    if sups[1] > sups[0] * 1.01 and sups[2] > sups[1] * 1.01 and sups[3] > sups[2] * 1.01:
        raise UnboundedEstimateError(
            f"remainder constant for {spec.name} grows under window doubling: {sups}"
        )
    value, worst = sup_for(W, n_random, seed)
    value2, _ = sup_for(W, 2 * n_random, seed + 101)
    stable = abs(value2 - value) <= _STABILITY_SLACK * max(value, value2, 1e-12)
    return ConstantEstimate("H11", R, max(value, value2), n_random, worst, stable)


def estimate_taylor_constant(
    spec: NonlinearitySpec,
    R: float,
    d: int,
    q_max: float = 10.0,
    n_random: int = 1_000_000,
    seed: int = DEFAULT_SEED,
) -> ConstantEstimate:
    """Sampled C(R) with |f(u+w) - f(u) - f'(u)w| <= C(R)(w^2 + |w|^p), p = 2*(d)."""
    if spec.q is None:
        raise ValueError(f"{spec.name} carries no growth exponent")
    p = two_star(d, q_max)
    if spec.q >= p:
        raise ValueError(f"q={spec.q} is not subcritical for d={d} (2*={p})")

    def sup_for(W: float, n: int, s: int):
        u, w = _pairs(R, W, n, s)
        with np.errstate(over="ignore", invalid="ignore"):
            rem = np.abs(spec.f(u + w) - spec.f(u) - spec.fprime(u) * w)
        return _sup_ratio(rem, w ** 2 + np.abs(w) ** p, u, w)

    W = 8.0 * R
    sups = [sup_for(W * 2 ** j, n_random, seed + j)[0] for j in range(4)]
    if sups[1] > sups[0] * 1.01 and sups[2] > sups[1] * 1.01 and sups[3] > sups[2] * 1.01:
        raise UnboundedEstimateError(
            f"Taylor constant for {spec.name} grows under window doubling: {sups}"
        )
    value, worst = sup_for(W, n_random, seed)
    value2, _ = sup_for(W, 2 * n_random, seed + 101)
    stable = abs(value2 - value) <= _STABILITY_SLACK * max(value, value2, 1e-12)
    return ConstantEstimate("H22", R, max(value, value2), n_random, worst, stable)


# ---------------------------------------------------------------------------
# NLS-side estimators
# ---------------------------------------------------------------------------

def _complex_pairs(R: float, W: float, n_random: int, seed: int):
    rng = np.random.default_rng(seed)
    side = max(8, int(np.sqrt(n_random // 2)))
    re = np.linspace(-1.0, 1.0, side)
    gre, gim = np.meshgrid(re, re, indexing="ij")
    ug = R * (gre + 1j * gim).ravel()
    wg = W * (gre + 1j * gim).ravel()
    # mismatched grid pairing is deliberate; randoms cover the rest
    m = min(ug.size, wg.size)
    ur = rng.uniform(-R, R, n_random) + 1j * rng.uniform(-R, R, n_random)
    wr = rng.uniform(-W, W, n_random) + 1j * rng.uniform(-W, W, n_random)
    u = np.concatenate([ug[:m], ur])
    w = np.concatenate([wg[:m][::-1], wr])
    keep = np.abs(u) <= R
    return u[keep], w[keep]


def _dot(a, b):
    """The paper-style real pairing Re(a conj(b))."""
    return np.real(a * np.conj(b))


def verify_nls_cancellation(
    spec: NlsNonlinearitySpec,
    samples: int = 100_000,
    radius: float = 5.0,
    seed: int = DEFAULT_SEED,
    tol: float = 1e-12,
) -> InequalityReport:
    """Check (f(u)-f(u+w)).(iw) = f(u).(iw) + f(u+w).(iu) exactly.

    The identity rests on f(z) conj(z) being real; any violation flags a
    broken spec rather than numerical noise.
    """
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, (2, samples)))
    th = rng.uniform(0.0, 2.0 * np.pi, (2, samples))
    u = r[0] * np.exp(1j * th[0])
    w = r[1] * np.exp(1j * th[1])
    fu, fv = spec.force(u), spec.force(u + w)
    lhs = _dot(fu - fv, 1j * w)
    rhs = _dot(fu, 1j * w) + _dot(fv, 1j * u)
    scale = 1.0 + np.abs(lhs) + np.abs(rhs)
    bad = np.abs(lhs - rhs) > tol * scale
    violations = [
        {
            "u": [float(u[i].real), float(u[i].imag)],
            "w": [float(w[i].real), float(w[i].imag)],
            "lhs": float(lhs[i]),
            "rhs": float(rhs[i]),
        }
        for i in np.flatnonzero(bad)[:16]
    ]
    return InequalityReport("Gronw4", not violations, violations)


def estimate_phase_bound(
    spec: NlsNonlinearitySpec,
    R: float,
    d: int,
    q_max: float = 10.0,
    n_random: int = 400_000,
    seed: int = DEFAULT_SEED,
) -> ConstantEstimate:
    """Sampled C(R) with |(f(u)-f(u+w)).(iw)| <= C(R)(|w|^2 + |w|^p)."""
    p = two_star(d, q_max)
    u, w = _complex_pairs(R, 8.0 * R, n_random, seed)
    with np.errstate(over="ignore", invalid="ignore"):
        num = np.abs(_dot(spec.force(u) - spec.force(u + w), 1j * w))
    aw = np.abs(w)
    value, worst_i = _sup_ratio(num, aw ** 2 + aw ** p, u, w)
    u2, w2 = _complex_pairs(R, 8.0 * R, 2 * n_random, seed + 101)
    with np.errstate(over="ignore", invalid="ignore"):
        num2 = np.abs(_dot(spec.force(u2) - spec.force(u2 + w2), 1j * w2))
    aw2 = np.abs(w2)
    value2, _ = _sup_ratio(num2, aw2 ** 2 + aw2 ** p, u2, w2)
    stable = abs(value2 - value) <= _STABILITY_SLACK * max(value, value2, 1e-12)
    return ConstantEstimate("Gronw6", R, max(value, value2), n_random, worst_i, stable)


def estimate_nls_taylor_constant(
    spec: NlsNonlinearitySpec,
    R: float,
    d: int,
    q_max: float = 10.0,
    n_random: int = 400_000,
    seed: int = DEFAULT_SEED,
) -> ConstantEstimate:
    """Complex-setting Taylor constant: |f(u+w)-f(u)-Df(u)w| <= C(|w|^2+|w|^p)."""
    p = two_star(d, q_max)
    u, w = _complex_pairs(R, 8.0 * R, n_random, seed)
    with np.errstate(over="ignore", invalid="ignore"):
        num = np.abs(spec.force(u + w) - spec.force(u) - spec.dforce(u, w))
    aw = np.abs(w)
    value, worst = _sup_ratio(num, aw ** 2 + aw ** p, u, w)
    return ConstantEstimate("H222", R, value, n_random, worst)


def find_convexity_shift(
    spec: NlsNonlinearitySpec,
    R: float,
    n_random: int = 200_000,
    seed: int = DEFAULT_SEED,
    a_cap: float = 1e6,
) -> ConstantEstimate:
    """Smallest A >= 0 making the shifted convexity defect nonnegative.

    Bisects to 1e-3 on the sampled minimum of
    F(|u+w|^2/2) - F(|u|^2/2) - f(u).w + (A+1)|w|^2, doubling the w-window
    until the answer stops moving.
    """
    if spec.assumption_class not in (
        AssumptionClass.NLS_COERCIVE,
        AssumptionClass.NLS_SUBCRIT,
    ):
        raise ValueError(f"{spec.name} is not an admissible NLS class")

    def solve(W: float, s: int):
        u, w = _complex_pairs(R, W, n_random, s)
        with np.errstate(over="ignore", invalid="ignore"):
            base = (
                spec.potential(u + w)
                - spec.potential(u)
                - _dot(spec.force(u), w)
                + np.abs(w) ** 2
            )
        base = np.where(np.isfinite(base), base, np.inf)
        wsq = np.abs(w) ** 2

        def ok(A: float) -> bool:
            return bool(np.min(base + A * wsq) >= -_NONNEG_SLACK)

        if ok(0.0):
            return 0.0, (0.0, 0.0)
        if not ok(a_cap):
            raise UnboundedEstimateError(
                f"no shift A <= {a_cap:g} suffices for {spec.name} at R={R}"
            )
        lo, hi = 0.0, a_cap
        while hi - lo > 1e-3:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        i = int(np.argmin(base + hi * wsq))
        return hi, (complex(u[i]), complex(w[i]))

    W = 4.0 * R
    a_prev, worst = solve(W, seed)
    for j in range(1, 5):
        a_next, worst = solve(W * 2 ** j, seed + j)
        if abs(a_next - a_prev) <= 1e-2 * (1.0 + max(a_next, a_prev)):
            return ConstantEstimate("ClaimA", R, max(a_next, a_prev), n_random,
                                    (str(worst[0]), str(worst[1])))
        a_prev = a_next
    return ConstantEstimate("ClaimA", R, a_prev, n_random,
                            (str(worst[0]), str(worst[1])), stable=False)


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------

def classify(
    spec,
    R: float = 2.0,
    d: int = 3,
    seed: int = DEFAULT_SEED,
    n_random: int | None = None,
) -> list:
    """Run every verifier applicable to the spec's assumption class.

    ``n_random`` overrides the default sample counts of every estimator, which
    is mainly useful to keep exploratory calls quick.
    """
    reports = []
    if isinstance(spec, NonlinearitySpec):
        n = n_random if n_random is not None else 1_000_000
        nv = n_random if n_random is not None else 100_000
        if spec.assumption_class == AssumptionClass.DEFOCUSING:
            reports.append(verify_sign_condition(spec, samples=nv, seed=seed))
        elif spec.assumption_class == AssumptionClass.OSCILLATING:
            reports.append(
                verify_potential_lower_bound(spec, C=1.0, samples=nv, seed=seed)
            )
        if spec.q is not None and spec.C_growth is not None:
            reports.append(verify_growth_bound(spec, samples=nv, seed=seed))
        c11 = estimate_remainder_constant(spec, R, n_random=n, seed=seed)
        reports.append(InequalityReport("H11", c11.stable, [], c11))
        if spec.q is not None:
            c22 = estimate_taylor_constant(spec, R, d, n_random=n, seed=seed)
            reports.append(InequalityReport("H22", c22.stable, [], c22))
    elif isinstance(spec, NlsNonlinearitySpec):
        n = n_random if n_random is not None else 400_000
        nv = n_random if n_random is not None else 100_000
        reports.append(verify_nls_cancellation(spec, samples=nv, seed=seed))
        if spec.assumption_class == AssumptionClass.NLS_COERCIVE:
            reports.append(verify_nls_coercivity(spec, samples=nv, seed=seed))
        ca = find_convexity_shift(spec, R, n_random=min(n, 200_000), seed=seed)
        reports.append(InequalityReport("ClaimA", np.isfinite(ca.value), [], ca))
        if spec.assumption_class == AssumptionClass.NLS_SUBCRIT:
            # polynomial-denominator bounds presume the subcritical growth
            # hypothesis; they are meaningless for exponential densities
            c6 = estimate_phase_bound(spec, R, d, n_random=n, seed=seed)
            reports.append(InequalityReport("Gronw6", c6.stable, [], c6))
            c222 = estimate_nls_taylor_constant(spec, R, d, n_random=n, seed=seed)
            reports.append(InequalityReport("H222", np.isfinite(c222.value), [], c222))
    else:
        raise TypeError(f"unsupported spec type {type(spec)!r}")
    return reports
