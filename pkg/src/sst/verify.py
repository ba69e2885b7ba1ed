"""Statistical and exact verification harness.

Provides the brute-force Gibbs-marginal oracle, Monte Carlo frequency
tables, chi-square goodness-of-fit and two-sample homogeneity tests,
and the named verification suites exposed by the CLI.

Seeding policy: a suite seed feeds ``numpy.random.SeedSequence(seed)``
whose children are consumed in a fixed order (instance parameters
first, then noise streams), so reports are byte-stable.  Statistical
checks at level 0.01 that fail are rerun once with the noise seed
offset by ``RETRY_OFFSET``; the laws under test are exact, so a repeat
failure is treated as an implementation error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit, gammaincc
from scipy.stats import kstest

from .argmax import (
    cle_max_arborescence,
    kruskal_max_tree,
    sample_arborescence_categorical,
    sample_tree_categorical,
    sample_topk_without_replacement,
    solve_map,
    topk_select,
)
from .errors import InputError, SolverError
from .grad import FDConfig, gradcheck
from .relax import (
    Regularizer,
    RelaxationSpec,
    directed_matrix_tree_marginals,
    matrix_tree_marginals,
    relax,
    sinkhorn_relax,
    supported_pairs,
)
from .structures import (
    Graph,
    StructureKind,
    StructureSpec,
    default_enum_limit,
    enumerate_vertices,
)
from .utilities import UtilityFamily, UtilitySpec, draw

__all__ = [
    "FrequencyTable",
    "TestReport",
    "gibbs_marginals_bruteforce",
    "mc_frequencies",
    "chi_square_gof",
    "two_sample_equivalence",
    "ks_report",
    "run_suite",
    "SUITE_NAMES",
    "RETRY_OFFSET",
]

RETRY_OFFSET = 1_000_003


def as_bits(vertex) -> tuple:
    return tuple(int(b) for b in vertex)


@dataclass(frozen=True)
class FrequencyTable:
    """Counts of realized vertices; support entries are unique bit tuples."""

    support: tuple
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if len(set(self.support)) != len(self.support):
            raise InputError("support entries must be unique")
        if int(self.counts.sum()) != self.total:
            raise InputError("counts must sum to total")

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.total

    def to_dict(self) -> dict:
        return {
            "support": [list(v) for v in self.support],
            "counts": [int(c) for c in self.counts],
            "total": self.total,
        }


@dataclass(frozen=True)
class TestReport:
    statistic: float
    dof: Optional[int]
    p_value: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "passed": self.passed,
        }


def gibbs_marginals_bruteforce(spec: StructureSpec, u: np.ndarray, t: float,
                               limit: Optional[int] = None) -> np.ndarray:
    """Exact marginal vector of p(x) ~ exp(u . x / t) by enumeration."""
    verts = np.stack(enumerate_vertices(spec, limit or default_enum_limit())).astype(float)
    logw = verts @ (np.asarray(u, dtype=float) / t)
    w = np.exp(logw - logw.max())
    return verts.T @ w / w.sum()


def mc_frequencies(sampler: Callable[[np.random.Generator], np.ndarray],
                   draws: int, seed: int,
                   support: Optional[Sequence] = None) -> FrequencyTable:
    """Tally ``draws`` calls of ``sampler(rng)`` under a fresh seeded stream.

    With ``support`` given, the table is aligned to it (zero counts kept)
    and draws outside it are an error; otherwise the realized support is
    used, sorted lexicographically.
    """
    if draws < 1:
        raise InputError("draws must be >= 1")
    rng = np.random.default_rng(seed)
    counter: dict = {}
    for _ in range(draws):
        # raw bytes of the int8 bit vector; cheap and hashable
        key = np.asarray(sampler(rng), dtype=np.int8).tobytes()
        counter[key] = counter.get(key, 0) + 1
    realized = {as_bits(np.frombuffer(k, dtype=np.int8)): c for k, c in counter.items()}
    if support is None:
        keys = sorted(realized)
    else:
        keys = [as_bits(v) for v in support]
        unknown = set(realized) - set(keys)
        if unknown:
            raise InputError(
                f"sampler produced vertices outside the given support: {sorted(unknown)[:3]}"
            )
    counts = np.array([realized.get(k, 0) for k in keys], dtype=np.int64)
    return FrequencyTable(support=tuple(keys), counts=counts, total=draws)


def chi_square_gof(table: FrequencyTable, expected: np.ndarray,
                   level: float = 0.01) -> TestReport:
    """Pearson goodness-of-fit against cell probabilities ``expected``."""
    expected = np.asarray(expected, dtype=float)
    if expected.shape != (len(table.support),):
        raise InputError("expected probabilities must align with the table support")
    if not (expected > 0).all():
        raise InputError("expected probabilities must be strictly positive on the support")
    if abs(expected.sum() - 1.0) > 1e-9:
        raise InputError("expected probabilities must sum to 1")
    exp_counts = table.total * expected
    if exp_counts.min() < 5.0:
        raise InputError(
            f"minimum expected count {exp_counts.min():.2f} < 5; increase draws"
        )
    stat = float((((table.counts - exp_counts) ** 2) / exp_counts).sum())
    dof = len(table.support) - 1
    p = float(gammaincc(dof / 2.0, stat / 2.0))
    return TestReport(statistic=stat, dof=dof, p_value=p, passed=bool(p >= level))


def two_sample_equivalence(table_a: FrequencyTable, table_b: FrequencyTable,
                           level: float = 0.01) -> TestReport:
    """Chi-square homogeneity test that two samplers share one law."""
    keys = sorted(set(table_a.support) | set(table_b.support))
    idx_a = dict(zip(table_a.support, table_a.counts))
    idx_b = dict(zip(table_b.support, table_b.counts))
    ca = np.array([idx_a.get(k, 0) for k in keys], dtype=float)
    cb = np.array([idx_b.get(k, 0) for k in keys], dtype=float)
    na, nb = table_a.total, table_b.total
    pooled = (ca + cb) / (na + nb)
    ea, eb = na * pooled, nb * pooled
    if min(ea.min(), eb.min()) < 5.0:
        raise InputError(
            f"minimum pooled expected count {min(ea.min(), eb.min()):.2f} < 5; increase draws"
        )
    stat = float((((ca - ea) ** 2) / ea).sum() + (((cb - eb) ** 2) / eb).sum())
    dof = len(keys) - 1
    p = float(gammaincc(dof / 2.0, stat / 2.0))
    return TestReport(statistic=stat, dof=dof, p_value=p, passed=bool(p >= level))


def ks_report(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray],
              level: float = 0.01) -> TestReport:
    """One-sample Kolmogorov-Smirnov test against a continuous cdf."""
    res = kstest(samples, cdf)
    return TestReport(
        statistic=float(res.statistic), dof=None,
        p_value=float(res.pvalue), passed=bool(res.pvalue >= level),
    )


# --- named suites ------------------------------------------------------------

def _softmax(theta):
    e = np.exp(theta - theta.max())
    return e / e.sum()


def _complete_graph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def _complete_digraph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(n) if i != j),
                 directed=True)


def _report(name, ok, **extra) -> dict:
    out = {"check": name, "passed": bool(ok)}
    out.update(extra)
    return out


def _from_test(name, rep: TestReport, **extra) -> dict:
    return _report(name, rep.passed, statistic=rep.statistic, dof=rep.dof,
                   p_value=rep.p_value, **extra)


def _with_retry(make: Callable[[int], TestReport], noise_seed: int, name: str, **extra) -> dict:
    rep = make(noise_seed)
    if rep.passed:
        return _from_test(name, rep, **extra)
    rep = make(noise_seed + RETRY_OFFSET)
    return _from_test(name, rep, retried=True, **extra)


def suite_gumbel_max(seed: int, draws: int = 100_000) -> list:
    """Argmax of Gumbel-perturbed scores follows the softmax law."""
    ss = np.random.SeedSequence(seed).spawn(2)
    theta = np.random.default_rng(ss[0]).uniform(-1.0, 1.0, 5)
    spec = StructureSpec(StructureKind.ONE_HOT, n=5)
    uspec = UtilitySpec(UtilityFamily.GUMBEL, theta)
    support = enumerate_vertices(spec)

    def run(noise_seed) -> TestReport:
        table = mc_frequencies(
            lambda rng: solve_map(spec, draw(uspec, rng).u).vertex,
            draws, noise_seed, support=support,
        )
        expected = np.array([_softmax(theta) @ v for v in support])
        return chi_square_gof(table, expected, level=0.01)

    return [_with_retry(run, ss[1].generate_state(1)[0], "one_hot argmax matches softmax law",
                        draws=draws)]


def suite_subsets(seed: int, draws: int = 100_000) -> list:
    """Thresholded logistic utilities give coordinatewise Bernoulli(sigmoid)."""
    ss = np.random.SeedSequence(seed).spawn(2)
    n = 6
    theta = np.random.default_rng(ss[0]).uniform(-2.0, 2.0, n)
    spec = StructureSpec(StructureKind.SUBSETS, n=n)
    uspec = UtilitySpec(UtilityFamily.LOGISTIC, theta)
    target = expit(theta)

    def run(noise_seed):
        rng = np.random.default_rng(noise_seed)
        hits = np.zeros(n)
        for _ in range(draws):
            hits += solve_map(spec, draw(uspec, rng).u).vertex
        freq = hits / draws
        se = np.sqrt(target * (1.0 - target) / draws)
        return np.abs(freq - target) / se

    z = run(ss[1].generate_state(1)[0])
    ok = bool(z.max() <= 3.0)
    if not ok:
        z = run(ss[1].generate_state(1)[0] + RETRY_OFFSET)
        ok = bool(z.max() <= 3.0)
    return [_report("subset coordinate frequencies match sigmoid(theta)", ok,
                    max_z_score=float(z.max()), draws=draws)]


def suite_topk(seed: int, draws: int = 100_000) -> list:
    """Top-k of Gumbel scores equals k sequential draws without replacement."""
    ss = np.random.SeedSequence(seed).spawn(3)
    n, k = 4, 2
    theta = np.random.default_rng(ss[0]).uniform(-1.0, 1.0, n)
    uspec = UtilitySpec(UtilityFamily.GUMBEL, theta)

    def run(noise_seed) -> TestReport:
        ta = mc_frequencies(
            lambda rng: topk_select(draw(uspec, rng).u, k), draws, noise_seed
        )
        tb = mc_frequencies(
            lambda rng: sample_topk_without_replacement(theta, k, rng),
            draws, noise_seed + 1,
        )
        return two_sample_equivalence(ta, tb, level=0.01)

    return [_with_retry(run, ss[1].generate_state(1)[0],
                        "top-k on gumbel scores matches without-replacement sampling",
                        draws=draws)]


def suite_tree(seed: int, draws: int = 100_000) -> list:
    """Max tree under Gumbel scores equals the categorical edge process."""
    ss = np.random.SeedSequence(seed).spawn(3)
    graph = _complete_graph(4)
    theta = np.random.default_rng(ss[0]).uniform(-1.0, 1.0, graph.num_edges)
    uspec = UtilitySpec(UtilityFamily.GUMBEL, theta)

    def run(noise_seed) -> TestReport:
        ta = mc_frequencies(
            lambda rng: kruskal_max_tree(graph, draw(uspec, rng).u),
            draws, noise_seed,
        )
        tb = mc_frequencies(
            lambda rng: sample_tree_categorical(graph, theta, rng),
            draws, noise_seed + 1,
        )
        return two_sample_equivalence(ta, tb, level=0.01)

    return [_with_retry(run, ss[1].generate_state(1)[0],
                        "kruskal on gumbel scores matches categorical tree process",
                        draws=draws)]


def suite_arborescence(seed: int, draws: int = 100_000, roots=(0, 1, 2)) -> list:
    """Max arborescence on negated exponential utilities equals rate sampling.

    Run once per root of the 3-node complete digraph, so the union of
    the tested supports covers all nine of its arborescences.
    """
    ss = np.random.SeedSequence(seed).spawn(3)
    graph = _complete_digraph(3)
    theta = np.random.default_rng(ss[0]).uniform(-1.0, 1.0, graph.num_edges)
    lam = np.exp(theta)
    out = []
    for i, root in enumerate(roots):
        def run(noise_seed, root=root) -> TestReport:
            def maximize(rng):
                u = -rng.exponential(scale=1.0 / lam)
                return cle_max_arborescence(graph, root, u)

            ta = mc_frequencies(maximize, draws, noise_seed)
            tb = mc_frequencies(
                lambda rng: sample_arborescence_categorical(graph, root, lam, rng),
                draws, noise_seed + 1,
            )
            return two_sample_equivalence(ta, tb, level=0.01)

        out.append(_with_retry(
            run, ss[1].generate_state(1)[0] + 7 * i,
            f"max arborescence on -Exp(rates) matches rate sampling (root {root})",
            draws=draws,
        ))
    return out


def _random_connected_graph(rng: np.random.Generator) -> Graph:
    while True:
        n = int(rng.integers(2, 6))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.7]
        try:
            g = Graph(n, tuple(edges))
        except Exception:
            continue
        if g.is_connected():
            return g


def _random_rooted_digraph(rng: np.random.Generator):
    while True:
        n = int(rng.integers(2, 6))
        edges = [(i, j) for i in range(n) for j in range(n)
                 if i != j and rng.random() < 0.6]
        root = int(rng.integers(n))
        if not edges:
            continue
        g = Graph(n, tuple(edges), directed=True)
        if g.reachable_from(root) == set(range(n)):
            return g, root


def suite_matrix_tree(seed: int, tol: float = 1e-8, instances: int = 50) -> list:
    """Reduced-Laplacian marginals match the enumeration oracle."""
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    out = []
    k3 = _complete_graph(3)
    x = matrix_tree_marginals(k3, np.zeros(3)).x
    out.append(_report(
        "triangle with flat scores has marginal 2/3 per edge",
        bool(np.abs(x - 2.0 / 3.0).max() <= 1e-12),
        max_error=float(np.abs(x - 2.0 / 3.0).max()),
    ))
    worst = 0.0
    for i in range(instances // 2):
        g = _random_connected_graph(rng)
        u = rng.normal(size=g.num_edges)
        spec = StructureSpec(StructureKind.SPANNING_TREE, graph=g)
        got = matrix_tree_marginals(g, u, 1.0).x
        want = gibbs_marginals_bruteforce(spec, u, 1.0)
        worst = max(worst, float(np.abs(got - want).max()))
    out.append(_report("undirected marginals match enumeration", worst <= tol,
                       max_error=worst, instances=instances // 2))
    worst = 0.0
    for i in range(instances - instances // 2):
        g, root = _random_rooted_digraph(rng)
        u = rng.normal(size=g.num_edges)
        spec = StructureSpec(StructureKind.ARBORESCENCE, graph=g, root=root)
        got = directed_matrix_tree_marginals(g, root, u, 1.0).x
        want = gibbs_marginals_bruteforce(spec, u, 1.0)
        worst = max(worst, float(np.abs(got - want).max()))
    out.append(_report("directed marginals match enumeration", worst <= tol,
                       max_error=worst, instances=instances - instances // 2))
    return out


def _limit_instances():
    g4 = _complete_graph(4)
    d3 = _complete_digraph(3)
    for kind, reg in supported_pairs():
        spec = {
            StructureKind.ONE_HOT: StructureSpec(StructureKind.ONE_HOT, n=5),
            StructureKind.SUBSETS: StructureSpec(StructureKind.SUBSETS, n=5),
            StructureKind.K_SUBSETS: StructureSpec(StructureKind.K_SUBSETS, n=5, k=2),
            StructureKind.CORR_K_SUBSETS: StructureSpec(StructureKind.CORR_K_SUBSETS, n=5, k=2),
            StructureKind.MATCHING: StructureSpec(StructureKind.MATCHING, n=3),
            StructureKind.SPANNING_TREE: StructureSpec(StructureKind.SPANNING_TREE, graph=g4),
            StructureKind.ARBORESCENCE: StructureSpec(StructureKind.ARBORESCENCE, graph=d3, root=0),
        }[kind]
        yield spec, reg


def suite_limits(seed: int, draws: int = 100, gap: float = 1e-3,
                 t_floor: float = 1e-6) -> list:
    """Halving the temperature drives every relaxation to the argmax vertex.

    The Sinkhorn solve runs at a looser tolerance with duals warmed
    along the temperature schedule: near the permutation limit its
    residual decays like 1/iterations, and the pass condition is
    checked on the computed point either way.
    """
    ss = np.random.SeedSequence(seed)
    out = []
    for (spec, reg), child in zip(_limit_instances(), ss.spawn(64)):
        rng = np.random.default_rng(child)
        sinkhorn_pair = (
            spec.kind == StructureKind.MATCHING and reg == Regularizer.SHANNON
        )
        worst_t = 1.0
        ok = True
        for _ in range(draws):
            u = rng.normal(size=spec.dim)
            hard = solve_map(spec, u).vertex.astype(float)
            t = 1.0
            warm = None
            while True:
                try:
                    if sinkhorn_pair:
                        point = sinkhorn_relax(
                            u.reshape(spec.n, spec.n), t,
                            tol=5e-4, max_iter=100_000, warm_start=warm,
                        )
                        warm = point.dual
                    else:
                        rspec = RelaxationSpec(reg, temperature=t, tol=1e-8,
                                               max_iter=400_000)
                        point = relax(spec, rspec, u)
                except SolverError:
                    ok = False
                    break
                if np.abs(point.x - hard).max() <= gap:
                    worst_t = min(worst_t, t)
                    break
                t *= 0.5
                if t < t_floor:
                    ok = False
                    break
            if not ok:
                break
        out.append(_report(
            f"zero-temperature limit: {spec.kind.value} / {reg.value}",
            ok, smallest_t=worst_t, draws=draws,
        ))
    return out


def _gradcheck_instances():
    g3 = _complete_graph(3)
    d3 = _complete_digraph(3)
    for kind, reg in supported_pairs():
        spec = {
            StructureKind.ONE_HOT: StructureSpec(StructureKind.ONE_HOT, n=4),
            StructureKind.SUBSETS: StructureSpec(StructureKind.SUBSETS, n=4),
            StructureKind.K_SUBSETS: StructureSpec(StructureKind.K_SUBSETS, n=5, k=2),
            StructureKind.CORR_K_SUBSETS: StructureSpec(StructureKind.CORR_K_SUBSETS, n=4, k=2),
            StructureKind.MATCHING: StructureSpec(StructureKind.MATCHING, n=3),
            StructureKind.SPANNING_TREE: StructureSpec(StructureKind.SPANNING_TREE, graph=g3),
            StructureKind.ARBORESCENCE: StructureSpec(StructureKind.ARBORESCENCE, graph=d3, root=0),
        }[kind]
        yield spec, reg


def suite_gradcheck(seed: int, instances: int = 20, tolerance: float = 1e-6) -> list:
    """Finite differences agree with exact Jacobians; Jacobians are symmetric."""
    ss = np.random.SeedSequence(seed)
    out = []
    for (spec, reg), child in zip(_gradcheck_instances(), ss.spawn(64)):
        rng = np.random.default_rng(child)
        rspec = RelaxationSpec(reg, temperature=1.0, tol=1e-12, max_iter=20_000)
        worst_sym = worst_disc = worst_cov = 0.0
        ok = True
        for _ in range(instances):
            u = rng.normal(size=spec.dim)
            rep = gradcheck(spec, rspec, u, tolerance=tolerance, fd=FDConfig())
            worst_sym = max(worst_sym, rep.symmetry_defect)
            if rep.max_discrepancy is not None:
                worst_disc = max(worst_disc, rep.max_discrepancy)
            if rep.covariance_discrepancy is not None:
                worst_cov = max(worst_cov, rep.covariance_discrepancy)
            ok = ok and rep.passed
        out.append(_report(
            f"gradcheck: {spec.kind.value} / {reg.value}", ok,
            symmetry_defect=worst_sym, max_discrepancy=worst_disc,
            covariance_discrepancy=worst_cov, instances=instances,
        ))
    return out


_SUITES = {
    "gumbel-max": suite_gumbel_max,
    "subsets": suite_subsets,
    "topk": suite_topk,
    "tree": suite_tree,
    "arborescence": suite_arborescence,
    "matrix-tree": suite_matrix_tree,
    "limits": suite_limits,
    "gradcheck": suite_gradcheck,
}

SUITE_NAMES = tuple(_SUITES)


def run_suite(name: str, seed: int, **kwargs) -> list:
    """Run one named suite; returns a list of JSON-ready report dicts."""
    if name not in _SUITES:
        raise InputError(f"unknown suite {name!r}; choose from {', '.join(SUITE_NAMES)}")
    reports = _SUITES[name](seed, **kwargs)
    for rep in reports:
        rep["suite"] = name
    return reports
