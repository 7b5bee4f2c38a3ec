"""End-to-end fixture suite behind ``surrogate-effects selftest``.

Every fixture goes through the same file round trip a user would take:
graph text to disk, ``simulate --exact`` to a covariance document, then
``identify`` reading both back. Output lines contain no paths or timings so
the report is byte-identical for a fixed seed.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Iterator, List, Tuple


from .criteria import back_door, conditional_iv, single_door, theorem1_check, theorem2_check
from .dsl import load_covariance, load_graph, parse_graph
from .exceptions import InfeasibleModelError
from .fixtures import FIXTURES
from .gaussian import conditional_cov, recover_lambda, regression_coef
from .sem import implied_covariance, random_dag, random_sem, replicate_rng, total_effect_oracle

EXACT_EFFECT_TOL = 1e-9
SOUNDNESS_TOL = 1e-9
ZERO_PATTERN_TOL = 1e-8


def _subset(rng, pool, max_size):
    pool = sorted(pool)
    k = int(rng.integers(0, min(max_size, len(pool)) + 1))
    return tuple(sorted(str(v) for v in rng.choice(pool, size=k, replace=False))) if k else ()


def _random_model(rng, bidirected_prob=0.0):
    while True:
        n = int(rng.integers(4, 8))
        g = random_dag(rng, n, edge_prob=0.4, bidirected_prob=bidirected_prob)
        try:
            return g, random_sem(g, rng, max_tries=200)
        except InfeasibleModelError:
            continue


def backdoor_cases(rng, count: int) -> Iterator[Tuple[float, float]]:
    """Yield ``(regression coefficient, total effect)`` for random back-door hits."""
    found = 0
    while found < count:
        g, m = _random_model(rng, 0.15)
        cov = implied_covariance(m)
        order = m.order
        i, j = sorted(rng.choice(len(order), size=2, replace=False))
        x, y = order[i], order[j]
        t = _subset(rng, [v for v in order if v not in (x, y)], 3)
        if back_door(g, x, y, t):
            found += 1
            yield regression_coef(cov, y, x, t), total_effect_oracle(m, x, y)


def single_door_cases(rng, count: int) -> Iterator[Tuple[float, float]]:
    found = 0
    while found < count:
        g, m = _random_model(rng, 0.15)
        if not g.directed:
            continue
        cov = implied_covariance(m)
        edges = sorted(g.directed)
        i, j = edges[int(rng.integers(len(edges)))]
        z = _subset(rng, [v for v in m.order if v not in (i, j)], 3)
        if single_door(g, i, j, z):
            found += 1
            yield regression_coef(cov, j, i, z), m.coefficients[(i, j)]


def civ_cases(rng, count: int) -> Iterator[Tuple[float, float]]:
    found = 0
    while found < count:
        g, m = _random_model(rng, 0.25)
        cov = implied_covariance(m)
        order = m.order
        picks = rng.choice(len(order), size=3, replace=False)
        inst, x, y = (order[k] for k in picks)
        t = _subset(rng, [v for v in order if v not in (inst, x, y)], 2)
        if not conditional_iv(g, x, y, inst, t):
            continue
        sxz = float(conditional_cov(cov, x, inst, t)[0, 0])
        if abs(sxz) < 1e-3:
            continue
        found += 1
        syz = float(conditional_cov(cov, y, inst, t)[0, 0])
        yield syz / sxz, total_effect_oracle(m, x, y)


def counter_fixtures():
    """Documented cases on which each observed-variable criterion must fail."""
    a = parse_graph(FIXTURES["A"].source).diagram
    c = parse_graph(FIXTURES["C"].source).diagram
    confounded = parse_graph("observed A B\nA -> B\nA <-> B\n").diagram
    return [
        ("back_door(A: X, Y | T)", back_door(a, "X", "Y", ("T",))),
        ("single_door(A -> B with A <-> B)", single_door(confounded, "A", "B", ())),
        ("conditional_iv(C: X, Y, T | {})", conditional_iv(c, "X", "Y", "T", ())),
    ]


def _fmt(v: float) -> str:
    return format(v, ".17g")


def run_selftest(workdir: Path, seed: int = 0, tol: float = 1e-8) -> Tuple[List[str], bool]:
    from .cli import main

    lines: List[str] = []
    ok = True

    def report(passed, text):
        nonlocal ok
        ok = ok and passed
        lines.append(("PASS " if passed else "FAIL ") + text)

    for name, fx in FIXTURES.items():
        gpath = workdir / f"fixture{name}.pd"
        cpath = workdir / f"fixture{name}_exact.json"
        gpath.write_text(fx.source, encoding="utf-8")
        buf = io.StringIO()
        code = main(["simulate", "--graph", str(gpath), "--exact"], out=buf, err=io.StringIO())
        cpath.write_text(buf.getvalue(), encoding="utf-8")
        argv = ["identify", "--graph", str(gpath), "--cov", str(cpath), "--strategy", fx.strategy,
                "--tol", repr(tol)]
        for key, value in fx.roles.to_dict().items():
            if key == "y_kind" or not value:
                continue
            argv += [f"--{key}", value if isinstance(value, str) else ",".join(value)]
        buf, ebuf = io.StringIO(), io.StringIO()
        code = code or main(argv, out=buf, err=ebuf)
        if code:
            report(False, f"c1 fixture {name}: exit {code} {ebuf.getvalue().strip()}")
            continue
        tau2 = json.loads(buf.getvalue())["tau_squared"]
        err = abs(tau2 - fx.truth)
        report(err < EXACT_EFFECT_TOL, f"c1 fixture {name} {fx.strategy} tau_squared={_fmt(tau2)} truth={fx.truth}")

        g = load_graph(gpath).diagram
        cov = load_covariance(cpath)
        if name == "D":
            cert = theorem2_check(g, fx.roles)
            parts = list(cert.sub_certificates)
        else:
            parts = [theorem1_check(g, fx.roles)]
        worst = max(recover_lambda(cov, c.roles, c, tol).zero_pattern_residual for c in parts)
        report(worst < ZERO_PATTERN_TOL, f"c6 fixture {name} zero-pattern max|entry|={worst:.3e}")

    rng = replicate_rng(seed, 3)
    for label, gen in (("back_door", backdoor_cases), ("single_door", single_door_cases), ("conditional_iv", civ_cases)):
        diffs = [abs(a - b) for a, b in gen(rng, 25)]
        report(max(diffs) < SOUNDNESS_TOL, f"c3 {label} 25 random models max|diff|={max(diffs):.3e}")
    for label, value in counter_fixtures():
        report(value is False, f"c3 counter-fixture {label} -> {value}")
    lines.append("selftest " + ("passed" if ok else "FAILED"))
    return lines, ok
