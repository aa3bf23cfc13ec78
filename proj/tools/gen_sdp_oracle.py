#!/usr/bin/env python3
"""Regenerates tests/data/sdp_oracle_cases.txt.

Each case is a small separating-ellipsoid instance (obstacle points, grid
points, goal, all in the robot frame) together with a reference objective
computed by an independent convex solver.  The program solved is

    min  nu + sum(lambda_j) - log det(P) + eps * tr(P)
    s.t. P >= I                  (Loewner order)
         v(c_k) <= -1            footprint corners
         v(z_i) >= +1            obstacle points
         lambda_j >= 0,  lambda_j >= v(g_j) + 1
         nu >= 0,        nu >= v(goal) + 1

with v(x) = x'Px + q'x + r and eps = 1e-3.  The recorded objective is
re-evaluated from the returned ellipsoid with exact hinge slacks, so it is
the true objective of a feasible point within solver accuracy of the
optimum.
"""

import sys

import numpy as np
import cvxpy as cp

EPS_REG = 1e-3
CORNERS = [(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)]


def solve_instance(cloud, grid, goal):
    P = cp.Variable((2, 2), symmetric=True)
    q = cp.Variable(2)
    r = cp.Variable()
    k = len(grid)
    lam = cp.Variable(k, nonneg=True) if k else None
    nu = cp.Variable(nonneg=True)

    def val(pt):
        pt = np.asarray(pt, dtype=float)
        return cp.quad_form(pt, P) + q @ pt + r

    cons = [P >> np.eye(2)]
    for c in CORNERS:
        cons.append(val(c) <= -1)
    for z in cloud:
        cons.append(val(z) >= 1)
    for j, g in enumerate(grid):
        cons.append(lam[j] >= val(g) + 1)
    cons.append(nu >= val(goal) + 1)

    slack_sum = (cp.sum(lam) if k else 0) + nu
    objective = cp.Minimize(slack_sum - cp.log_det(P) + EPS_REG * cp.trace(P))
    problem = cp.Problem(objective, cons)
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.SolverError:
        return None
    if problem.status != cp.OPTIMAL:
        return None

    Pv, qv, rv = P.value, q.value, r.value
    Pv = 0.5 * (Pv + Pv.T)

    def value_at(pt):
        pt = np.asarray(pt, dtype=float)
        return float(pt @ Pv @ pt + qv @ pt + rv)

    if np.linalg.eigvalsh(Pv).min() < 1 - 1e-7:
        return None
    if any(value_at(c) > -1 + 1e-7 for c in CORNERS):
        return None
    if any(value_at(z) < 1 - 1e-7 for z in cloud):
        return None

    sign, logabsdet = np.linalg.slogdet(Pv)
    assert sign > 0
    clean = -logabsdet + EPS_REG * np.trace(Pv)
    clean += sum(max(0.0, value_at(g) + 1.0) for g in grid)
    clean += max(0.0, value_at(goal) + 1.0)
    if abs(clean - problem.value) > 2e-5 * max(1.0, abs(clean)):
        return None
    return float(clean)


def draw_instance(rng, near_side):
    m = int(rng.integers(1, 7))
    cloud = []
    if near_side:
        for _ in range(int(rng.integers(1, 3))):
            side = int(rng.integers(0, 4))
            along = rng.uniform(-0.4, 0.4)
            off = 0.5 + rng.uniform(0.06, 0.25)
            pt = [(off, along), (-off, along), (along, off), (along, -off)][side]
            cloud.append(pt)
        far_radius = (2.2, 4.5)
    else:
        far_radius = (1.1, 4.5)
    while len(cloud) < m:
        radius = rng.uniform(*far_radius)
        bearing = rng.uniform(-np.pi, np.pi)
        cloud.append((radius * np.cos(bearing), radius * np.sin(bearing)))
    k = int(rng.integers(0, 5))
    grid = [tuple(rng.uniform(-5, 5, size=2)) for _ in range(k)]
    goal = tuple(rng.uniform(-4.8, 4.8, size=2))
    return cloud[:m], grid, goal


def main():
    out_path = sys.argv[1] if len(sys.argv) > 1 else "tests/data/sdp_oracle_cases.txt"
    rng = np.random.default_rng(20240817)
    cases = []
    attempts = 0
    while len(cases) < 200 and attempts < 2000:
        attempts += 1
        near = len(cases) % 5 == 4  # every fifth case hugs a footprint side
        cloud, grid, goal = draw_instance(rng, near)
        ref = solve_instance(cloud, grid, goal)
        if ref is None:
            continue
        cases.append((cloud, grid, goal, ref))

    if len(cases) < 200:
        raise SystemExit(f"only {len(cases)} solvable cases in {attempts} attempts")

    with open(out_path, "w") as f:
        f.write("# separating-ellipsoid reference objectives\n")
        f.write("# regenerate with tools/gen_sdp_oracle.py\n")
        f.write(f"cases {len(cases)} eps {EPS_REG:.17g}\n")
        for cloud, grid, goal, ref in cases:
            f.write(f"case {len(cloud)} {len(grid)}\n")
            for z in cloud:
                f.write(f"z {z[0]:.17g} {z[1]:.17g}\n")
            for g in grid:
                f.write(f"g {g[0]:.17g} {g[1]:.17g}\n")
            f.write(f"goal {goal[0]:.17g} {goal[1]:.17g}\n")
            f.write(f"objective {ref:.17g}\n")
    print(f"wrote {len(cases)} cases ({attempts} attempts)")


if __name__ == "__main__":
    main()
