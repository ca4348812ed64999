"""Retraction dynamics on gamma-normalized strata: one interior class-A root
moves at unit speed, class-B roots track their bound roots of P^(k), and the
first confluence hands the flow to a lower-dimensional stratum."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import configvec as cvm
from .configvec import CLASS_A, CLASS_B, ConfigVector
from .polycore import RootConfiguration, derivative_roots, gamma_normalize
from .sensitivity import sensitivity_rows
from .strata import _bound_xi_flat_indices

EPS_DRIFT = 1e-10
SIGMA_BISECT_TOL = 1e-12
MAX_STEP = 1e-2

EVENT_XI_MEETS_A = "xi-meets-A-root"
EVENT_MOVER_MEETS_XI = "mover-meets-xi"
EVENT_MOVER_MEETS_A = "mover-meets-A-root"


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpeedVector:
    speeds: tuple[float, ...]  # one per distinct root


@dataclass(frozen=True)
class FlowEvent:
    kind: str
    participants: tuple[int, ...]
    sigma0: float


@dataclass
class FlowState:
    rc: RootConfiguration
    cv: ConfigVector
    mover: int  # index among distinct roots; interior class A
    bindings: dict[int, int]  # class-B root index -> flat xi index
    sigma: float = 0.0


@dataclass
class Trajectory:
    k: int
    samples: list[tuple[float, tuple[float, ...], tuple[float, ...]]] = field(
        default_factory=list
    )

    def append(self, sigma: float, rc: RootConfiguration):
        xs = derivative_roots(rc, self.k).flat()
        self.samples.append((sigma, rc.roots, xs))

    def to_csv(self) -> str:
        q = len(self.samples[0][1])
        nk = len(self.samples[0][2])
        header = (
            "sigma,"
            + ",".join("y_%d" % (i + 1) for i in range(q))
            + ","
            + ",".join("xi_%d" % (i + 1) for i in range(nk))
        )
        lines = [header]
        for s, ys, xs in self.samples:
            lines.append(",".join("%.17g" % v for v in (s,) + ys + xs))
        return "\n".join(lines) + "\n"


@dataclass
class FlowResult:
    start_cv: ConfigVector
    mover: int
    endpoint: RootConfiguration
    endpoint_cv: ConfigVector
    events: list[FlowEvent]
    trajectory: Trajectory
    # Final positions before merging coincident roots of P; same mults as start.
    raw_final: RootConfiguration = None
    bindings: dict[int, int] = field(default_factory=dict)
    k: int = 0


def _classes(cv: ConfigVector) -> list[str]:
    """Per distinct root of P, its class letter in CV order."""
    return [e.kind for e in cv.mult_entries()]


def solve_speeds(
    state: FlowState, k: int, direction: float = 1.0, check_bounds: bool = True
) -> SpeedVector:
    """Unique speeds with mover at `direction` and class-B roots tracking
    their bound derivative roots; non-mover class-A roots are stationary.

    check_bounds=False skips the dominance, series and range certificates,
    which lose meaning right at a confluence where the squeezed
    sensitivities are only approximate but the speeds still make usable
    extrapolation rates.
    """
    rc = state.rc
    b_idx = sorted(state.bindings)
    speeds = np.zeros(rc.q)
    speeds[state.mover] = direction
    if b_idx:
        rows = sensitivity_rows(rc, k, [state.bindings[i] for i in b_idx])
        g = rows[:, b_idx]
        h = rows[:, state.mover] * direction
        mat = np.eye(len(b_idx)) - g
        margin = min(
            abs(mat[r, r]) - sum(abs(mat[r, c]) for c in range(len(b_idx)) if c != r)
            for r in range(len(b_idx))
        )
        if check_bounds and margin <= 0:
            raise FlowError("speed system lost diagonal dominance (margin %g)" % margin)
        v = np.linalg.solve(mat, h)
        # Cross-check against the Neumann series the dominance guarantees.
        # Near a confluence the contraction factor approaches 1 and the series
        # converges too slowly to compare, so only check once it has settled.
        acc = h.copy()
        term = h.copy()
        for _ in range(500):
            nxt = g @ term
            if np.max(np.abs(nxt)) > np.max(np.abs(term)) + 1.0:
                break
            term = nxt
            acc = acc + term
            if np.max(np.abs(term)) < 1e-14:
                break
        if (
            check_bounds
            and np.max(np.abs(term)) < 1e-10
            and np.max(np.abs(acc - v)) > 1e-8
        ):
            raise FlowError("direct solve disagrees with series expansion")
        lo, hi = (0.0, 1.0) if direction > 0 else (-1.0, 0.0)
        if check_bounds and (np.any(v < lo - 1e-9) or np.any(v > hi + 1e-9)):
            raise FlowError("class-B speed out of [%g, %g]: %s" % (lo, hi, v))
        speeds[b_idx] = v
    return SpeedVector(tuple(speeds))


def _project(
    y: np.ndarray, mults: tuple[int, ...], k: int, bindings: dict[int, int]
) -> np.ndarray:
    """Re-solve the class-B positions so y_i = xi_{binding(i)} exactly."""
    if not bindings:
        return y
    y = y.copy()
    b_idx = sorted(bindings)
    prev = np.inf
    for _ in range(50):
        rc = RootConfiguration(tuple(y), mults)
        xs = derivative_roots(rc, k).flat()
        res = np.array([y[i] - xs[bindings[i]] for i in b_idx])
        worst = np.max(np.abs(res))
        if worst < EPS_DRIFT * 1e-2:
            return y
        if worst >= 0.7 * prev:
            # Roundoff in locating squeezed derivative roots caps the
            # attainable residual; accept it once Newton stops improving.
            if worst < 1e-6:
                return y
            raise FlowError(
                "constraint projection stalled at residual %g" % worst
            )
        prev = worst
        rows = sensitivity_rows(rc, k, [bindings[i] for i in b_idx])
        jac = np.eye(len(b_idx)) - rows[:, b_idx]
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise FlowError("constraint projection Jacobian is singular") from exc
        # Backtrack if the full Newton step would cross a neighbouring root.
        damp = 1.0
        while damp > 1e-8:
            trial = y.copy()
            trial[b_idx] += damp * step
            if np.all(np.diff(trial) > 0):
                break
            damp *= 0.5
        else:
            raise FlowError("constraint projection collapsed the root ordering")
        y[b_idx] += damp * step
    raise FlowError("constraint projection did not converge")


def advance(state: FlowState, k: int, dsigma: float, direction: float = 1.0) -> FlowState:
    """One explicit step of size dsigma followed by projection.

    The state is fully determined by the class-A positions and the binding
    constraints: the mover advances exactly linearly and the class-B roots
    are re-solved by the projection, so the explicit speeds only serve as
    the projection's starting guess and a single Euler stage suffices.
    """
    if dsigma < 0:
        raise ValueError("dsigma must be >= 0")
    if dsigma == 0:
        return FlowState(state.rc, state.cv, state.mover, dict(state.bindings), state.sigma)
    mults = state.rc.mults
    y0 = np.array(state.rc.roots)
    v = np.array(solve_speeds(state, k, direction).speeds)
    y = _project(y0 + dsigma * v, mults, k, state.bindings)
    rc = RootConfiguration(tuple(y), mults)
    return FlowState(rc, state.cv, state.mover, dict(state.bindings), state.sigma + dsigma)


def _monitored_pairs(state: FlowState, k: int, classes: list[str]) -> list[tuple[str, tuple[int, int]]]:
    """Gap pairs fixed at flow start; the flat xi order is preserved along
    the flow, so participants stay valid until the first confluence.

    Participants are 0-based: (mover, xi) for mover-meets-xi, (mover, root)
    for mover-meets-A, (xi, root) for xi-meets-A.
    """
    rc = state.rc
    xs = derivative_roots(rc, k).flat()
    carried = set()
    for i, m in enumerate(rc.mults):
        # Carried xi's sit exactly on roots of multiplicity > k.
        if m > k:
            for j, x in enumerate(xs):
                if x == rc.roots[i]:
                    carried.add(j)
    pairs = []
    mover = state.mover
    my = rc.roots[mover]
    # Mover vs nearest xi strictly to its right (bound xi's included: hitting
    # one is the second confluence possibility with a class-B participant).
    right_xis = [(x, j) for j, x in enumerate(xs) if x > my and j not in carried]
    if right_xis:
        _, j = min(right_xis)
        pairs.append((EVENT_MOVER_MEETS_XI, (mover, j)))
    # Mover vs next class-A root to its right.
    for i in range(mover + 1, rc.q):
        if classes[i] == CLASS_A:
            pairs.append((EVENT_MOVER_MEETS_A, (mover, i)))
            break
    # Each xi vs the next class-A root to its right.  Bound xi's ride their
    # class-B roots and can reach a stationary class-A root just as a free xi
    # can.  The mover is skipped as a target: it moves at unit speed and
    # every xi is strictly slower.
    for j, x in enumerate(xs):
        if j in carried:
            continue
        for i in range(rc.q):
            if rc.roots[i] > x and classes[i] == CLASS_A and i != mover:
                pairs.append((EVENT_XI_MEETS_A, (j, i)))
                break
    return pairs


def _eval_gaps(
    state: FlowState, k: int, pairs: list[tuple[str, tuple[int, int]]]
) -> list[float]:
    """Signed values of the monitored gap functions at one state.

    A bound xi sits on its class-B root to projection accuracy, so its gaps
    are read off the root positions, which stay exact even when a collapse
    limits how precisely free derivative roots can be located.
    """
    rc = state.rc
    xs = derivative_roots(rc, k).flat()
    root_of = {j: i for i, j in state.bindings.items()}
    vals = []
    for kind, part in pairs:
        if kind == EVENT_MOVER_MEETS_XI:
            mover, j = part
            x = rc.roots[root_of[j]] if j in root_of else xs[j]
            vals.append(x - rc.roots[mover])
        elif kind == EVENT_MOVER_MEETS_A:
            mover, i = part
            vals.append(rc.roots[i] - rc.roots[mover])
        else:
            j, i = part
            x = rc.roots[root_of[j]] if j in root_of else xs[j]
            vals.append(rc.roots[i] - x)
    return vals


def flow_to_boundary(
    rc: RootConfiguration,
    k: int,
    mover: int,
    tol: float = cvm.DEFAULT_CLASSIFY_TOL,
    cv: ConfigVector | None = None,
) -> FlowResult:
    """Integrate the retraction flow until the first confluence.

    The configuration vector of rc may be passed in when already known (for
    example along a retraction chain); otherwise it is classified here.
    """
    rc = gamma_normalize(rc)
    if cv is None:
        # Coincidences inherited from an earlier confluence are held to an
        # absolute accuracy, so keep a floor under the relative tolerance.
        cv = cvm.classify(rc, k, tol, tol_abs=max(tol * rc.min_gap(), 1e-10))
    classes = _classes(cv)
    if classes[mover] != CLASS_A or mover in (0, rc.q - 1):
        raise ValueError("mover must be an interior class-A root")
    bindings = {}
    all_bindings = _bound_xi_flat_indices(cv)
    b_i = 0
    for i, kind in enumerate(classes):
        if kind == CLASS_B:
            bindings[i] = all_bindings[i]
    state = FlowState(rc, cv, mover, bindings, 0.0)
    traj = Trajectory(k=k)
    traj.append(0.0, rc)
    pairs = _monitored_pairs(state, k, classes)

    def gap_after(base: FlowState, h: float) -> float:
        """Smallest monitored gap after a step of h; -inf once roots cross."""
        try:
            trial = advance(base, k, h)
        except (ValueError, FlowError, np.linalg.LinAlgError):
            return -np.inf
        return min(_eval_gaps(trial, k, pairs))

    sigma_max = 1.0 + 1e-9
    while True:
        min_gap = min(_eval_gaps(state, k, pairs))
        if min_gap < SIGMA_BISECT_TOL:
            break
        # Cap the step by the smallest gap: relative closing speeds are at
        # most 2, so the crossing stays inside a single bisectable step even
        # when several roots collapse onto one point simultaneously.
        h = min(MAX_STEP, 0.4 * min_gap, sigma_max - state.sigma)
        if h <= 0:
            raise FlowError("no confluence before sigma = 1 (gap %g)" % min_gap)
        if gap_after(state, h) > 0:
            state = advance(state, k, h)
            traj.append(state.sigma, state.rc)
            continue
        # Bisect the step size to land just before the first crossing (or
        # just before the integrator breaks down, which near a multi-root
        # collapse happens a little ahead of the crossing itself).
        lo, hi = 0.0, h
        for _ in range(80):
            if hi - lo < SIGMA_BISECT_TOL:
                break
            mid = 0.5 * (lo + hi)
            if gap_after(state, mid) > 0:
                lo = mid
            else:
                hi = mid
        if lo <= SIGMA_BISECT_TOL:
            # No further progress is possible at any step size.
            break
        state = advance(state, k, lo)
        traj.append(state.sigma, state.rc)

    sigma0 = state.sigma
    final_gaps = _eval_gaps(state, k, pairs)
    root_of = {j: i for i, j in state.bindings.items()}

    # A multi-root collapse squeezes derivative roots between roots of P and
    # caps how accurately they can be located, so the integrator can stall a
    # little short of the exact confluence with the participating gaps at
    # unequal (but all tiny) values.  Identify the participants by their
    # extrapolated crossing times rather than by a fixed distance cutoff.
    speeds = None
    try:
        speeds = np.array(solve_speeds(state, k, check_bounds=False).speeds)
    except (ValueError, FlowError, np.linalg.LinAlgError):
        pass

    def closing_rate(kind, part):
        if kind == EVENT_MOVER_MEETS_A:
            return speeds[part[0]] - speeds[part[1]]
        if kind == EVENT_MOVER_MEETS_XI:
            m_i, j = part
            if j in root_of:
                return speeds[m_i] - speeds[root_of[j]]
            row = sensitivity_rows(state.rc, k, [j])[0]
            return speeds[m_i] - float(row @ speeds)
        j, i = part
        if j in root_of:
            return speeds[root_of[j]] - speeds[i]
        row = sensitivity_rows(state.rc, k, [j])[0]
        return float(row @ speeds) - speeds[i]

    hit = []
    hit_gaps = []
    if speeds is not None:
        try:
            times = []
            for (kind, part), g in zip(pairs, final_gaps):
                r = closing_rate(kind, part)
                times.append(g / r if r > 1e-9 else np.inf)
            t0 = min(times)
            if t0 <= 1e-3:
                # Crossings this close together cannot be told apart at the
                # endpoint's attainable precision, so conflate them.
                slack = max(100.0 * t0, 1e-7)
                for (kind, part), g, t in zip(pairs, final_gaps, times):
                    if t <= slack:
                        hit.append((kind, part))
                        hit_gaps.append(g)
        except (ValueError, FlowError, np.linalg.LinAlgError):
            hit = []
    if not hit:
        achieved = max(min(final_gaps), 0.0)
        if achieved > 1e-4:
            raise FlowError(
                "integration stalled with smallest monitored gap %g at sigma %g"
                % (achieved, sigma0)
            )
        cutoff = max(1e-9, min(1e-4, 100.0 * achieved))
        for (kind, part), g in zip(pairs, final_gaps):
            if g < cutoff:
                hit.append((kind, part))
                hit_gaps.append(g)
    events = [FlowEvent(kind, part, sigma0) for kind, part in hit]

    raw_final = state.rc
    xs_final = derivative_roots(raw_final, k).flat()
    bind_resid = max(
        (abs(raw_final.roots[i] - xs_final[j]) for i, j in state.bindings.items()),
        default=0.0,
    )

    # Merge the roots of P that the confluence identifies: each participating
    # pair spans an index interval and everything inside it collapses too.
    q = raw_final.q
    join_tol = max(1e-9, 2.0 * bind_resid)
    join = [raw_final.roots[a + 1] - raw_final.roots[a] < join_tol for a in range(q - 1)]
    free_coinc = 0.0
    for (kind, part), g in zip(hit, hit_gaps):
        if kind == EVENT_MOVER_MEETS_A:
            lo_i, hi_i = part
        elif kind == EVENT_MOVER_MEETS_XI and part[1] in root_of:
            lo_i, hi_i = part[0], root_of[part[1]]
        elif kind == EVENT_XI_MEETS_A and part[0] in root_of:
            lo_i, hi_i = sorted((root_of[part[0]], part[1]))
        else:
            # A free derivative root lands on a root of P without any roots
            # of P merging; the coincidence survives into the endpoint at
            # this accuracy.
            free_coinc = max(free_coinc, g)
            continue
        for a in range(lo_i, hi_i):
            join[a] = True
    groups = [[0]]
    for a in range(q - 1):
        if join[a]:
            groups[-1].append(a + 1)
        else:
            groups.append([a + 1])
    vals, mults = [], []
    for grp in groups:
        mults.append(sum(raw_final.mults[i] for i in grp))
        stationary = [
            i for i in grp if speeds is not None and abs(speeds[i]) < 1e-12
        ]
        if stationary:
            # The collapse runs into a motionless root; its position is the
            # exact limit.
            vals.append(raw_final.roots[stationary[0]])
        else:
            w = [raw_final.mults[i] for i in grp]
            vals.append(
                sum(raw_final.roots[i] * wi for i, wi in zip(grp, w)) / sum(w)
            )
    endpoint = RootConfiguration(tuple(vals), tuple(mults))
    endpoint = gamma_normalize(endpoint)
    # Coincidences are only maintained to the projection residual and the
    # resolution of the confluence, which can exceed the relative tolerance
    # when the endpoint gaps are small.
    endpoint_cv = cvm.classify(
        endpoint,
        k,
        tol,
        tol_abs=max(
            tol * endpoint.min_gap(), 1e-9, 2.0 * bind_resid, 10.0 * free_coinc
        ),
    )
    if cvm.dimension(endpoint_cv).conv_dim >= cvm.dimension(cv).conv_dim:
        raise FlowError(
            "endpoint CV %s does not drop dimension from %s" % (endpoint_cv, cv)
        )
    return FlowResult(
        start_cv=cv,
        mover=mover,
        endpoint=endpoint,
        endpoint_cv=endpoint_cv,
        events=events,
        trajectory=traj,
        raw_final=raw_final,
        bindings=bindings,
        k=k,
    )


def leftmost_interior_a(cv: ConfigVector) -> int:
    classes = _classes(cv)
    for i in range(1, len(classes) - 1):
        if classes[i] == CLASS_A:
            return i
    raise ValueError("no interior class-A root in %s" % cv)


def rightmost_interior_a(cv: ConfigVector) -> int:
    classes = _classes(cv)
    for i in range(len(classes) - 2, 0, -1):
        if classes[i] == CLASS_A:
            return i
    raise ValueError("no interior class-A root in %s" % cv)


def retract(
    rc: RootConfiguration,
    k: int,
    policy=leftmost_interior_a,
    tol: float = cvm.DEFAULT_CLASSIFY_TOL,
) -> list[tuple[ConfigVector, RootConfiguration]]:
    """Flow down to the unique zero-dimensional stratum of the closure."""
    rc = gamma_normalize(rc)
    cv = cvm.classify(rc, k, tol, tol_abs=max(tol * rc.min_gap(), 1e-10))
    chain = [(cv, rc)]
    while cvm.dimension(cv).conv_dim > 0:
        mover = policy(cv)
        result = flow_to_boundary(rc, k, mover, tol, cv=cv)
        rc, cv = result.endpoint, result.endpoint_cv
        chain.append((cv, rc))
    return chain


def reverse_check(result: FlowResult, step: float = 1e-4) -> dict:
    """Certify re-entry into the pre-confluence stratum under reversed speeds.

    Returns a report with the re-entry flag, the reversed class-B speeds and
    the velocity of the confluence derivative root (when the event involves
    one), which must lie strictly in (-1, 0).
    """
    k = result.k
    rc = result.raw_final
    state = FlowState(rc, result.start_cv, result.mover, dict(result.bindings))
    sp = solve_speeds(state, k, direction=-1.0)
    speeds = np.array(sp.speeds)

    xi_dots = {}
    for ev in result.events:
        if ev.kind in (EVENT_MOVER_MEETS_XI, EVENT_XI_MEETS_A):
            j = ev.participants[1] if ev.kind == EVENT_MOVER_MEETS_XI else ev.participants[0]
            row = sensitivity_rows(rc, k, [j])[0]
            xi_dots[j] = float(row @ speeds)

    y = np.array(rc.roots) + step * speeds
    y = _project(y, rc.mults, k, result.bindings)
    back = gamma_normalize(RootConfiguration(tuple(y), rc.mults))
    # Separations opened by the small reverse step can be far below the
    # ambient root gaps, so classify with an absolute coincidence tolerance.
    back_cv = cvm.classify(back, k, tol_abs=1e-10)
    reentered = str(back_cv) == str(result.start_cv)
    return {
        "reentered": reentered,
        "back_cv": back_cv,
        "reversed_speeds": sp,
        "confluence_xi_dot": xi_dots,
    }
