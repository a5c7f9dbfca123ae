"""Built-in oracle suites behind the `verify` subcommand.

Each suite re-derives a core identity against an independent route: the
separable propagator against the dense matrix, the exact transient against the
interpolated-mask forward pass, the closed-form scale against random
perturbations, and the assignment solver against exhaustive search.
"""

from __future__ import annotations

import sys

import numpy as np

__all__ = ["run_verification"]


def _random_layout(rng, n, z_choices=(-30e-6, 0.0, 30e-6)):
    from .geometry import TrapLayout, TrapSite

    sites = tuple(
        TrapSite(
            f"v{i}",
            float(rng.uniform(-40e-6, 40e-6)),
            float(rng.uniform(-40e-6, 40e-6)),
            float(rng.choice(z_choices)),
        )
        for i in range(n)
    )
    return TrapLayout(sites)


def _check_propagation(rng, cases) -> tuple[bool, str]:
    from .geometry import OpticalConfig
    from .propagation import PhaseMask, build_dense, build_separable, forward, forward_dense

    worst = 0.0
    for _ in range(cases):
        grid = int(rng.choice([16, 32, 64]))
        cfg = OpticalConfig(820e-9, 4e-3, grid, grid, 17e-6)
        layout = _random_layout(rng, int(rng.integers(1, 17)))
        mask = PhaseMask(rng.uniform(0, 2 * np.pi, (grid, grid)))
        e_sep = forward(build_separable(cfg, layout), mask).amplitudes
        e_den = forward_dense(build_dense(cfg, layout), mask).amplitudes
        rel = np.max(np.abs(e_sep - e_den)) / np.max(np.abs(e_den))
        worst = max(worst, rel)
    return worst <= 1e-10, f"max relative deviation {worst:.3e} (tol 1e-10)"


def _check_transient(rng, cases) -> tuple[bool, str]:
    from .geometry import OpticalConfig
    from .propagation import PhaseMask, build_separable, forward
    from .transient import pixel_interpolate, transient_exact

    cfg = OpticalConfig(820e-9, 4e-3, 32, 32, 17e-6)
    worst = 0.0
    for _ in range(cases):
        layout = _random_layout(rng, int(rng.integers(1, 10)))
        prop = build_separable(cfg, layout)
        m0 = PhaseMask(rng.uniform(0, 2 * np.pi, (32, 32)))
        m1 = PhaseMask(rng.uniform(0, 2 * np.pi, (32, 32)))
        for a in np.linspace(0.1, 0.9, 9):
            e_exact = transient_exact(prop, m0, m1, float(a)).amplitudes
            e_interp = forward(prop, pixel_interpolate(m0, m1, float(a))).amplitudes
            rel = np.max(np.abs(e_exact - e_interp)) / np.max(np.abs(e_interp))
            worst = max(worst, rel)
    return worst <= 1e-12, f"max relative deviation {worst:.3e} (tol 1e-12)"


def _check_scale(rng, cases) -> tuple[bool, str]:
    from .propagation import TrapField
    from .solvers import TargetSpec, objective, scale_update

    failures = 0
    for _ in range(cases):
        n = int(rng.integers(2, 12))
        field = TrapField(rng.normal(size=n) + 1j * rng.normal(size=n))
        target = TargetSpec(rng.uniform(0.5, 2.0, n), rng.uniform(-np.pi, np.pi, n))
        w = rng.uniform(0.5, 1.5, n)
        s = scale_update(field, w, target)
        base = objective(field, w, s, target)
        for _ in range(100):
            delta = 0.1 * (rng.normal() + 1j * rng.normal())
            if objective(field, w, s + delta, target) < base - 1e-12:
                failures += 1
                break
    return failures == 0, f"{failures} instances beaten by a perturbation"


def _check_assignment(rng, cases) -> tuple[bool, str]:
    from .planner import assign, brute_force_assign

    mismatches = 0
    for _ in range(cases):
        n_tgt = int(rng.integers(1, 8))
        n_src = n_tgt + int(rng.integers(0, 3))
        src = _random_layout(rng, n_src, z_choices=(0.0,))
        tgt = _random_layout(rng, n_tgt, z_choices=(0.0,))
        fast = assign(src, tgt)
        slow = brute_force_assign(src, tgt)
        if abs(fast.total_cost - slow.total_cost) > 1e-12 * (1 + slow.total_cost):
            mismatches += 1
    return mismatches == 0, f"{mismatches} cost mismatches vs exhaustive search"


def run_verification(quick: bool = False, out=sys.stdout) -> bool:
    rng = np.random.default_rng(20260810)
    suites = [
        ("separable vs dense propagation", _check_propagation, 5 if quick else 20),
        ("exact transient identity", _check_transient, 3 if quick else 10),
        ("closed-form scale optimality", _check_scale, 10 if quick else 50),
        ("assignment vs exhaustive oracle", _check_assignment, 30 if quick else 200),
    ]
    all_ok = True
    for name, fn, cases in suites:
        ok, detail = fn(rng, cases)
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name} ({cases} cases): {detail}", file=out)
    return all_ok
