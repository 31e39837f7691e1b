"""CSV emission: UTF-8, comma-separated, header row, LF line endings,
17-significant-digit decimals."""

from __future__ import annotations

import numpy as np


def fmt(value):
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_g_csv(path, model, gsol):
    """GSolution export: one row per (grid point, atom), time ascending."""
    rows = []
    for m, t in enumerate(gsol.grid):
        for i, gamma in enumerate(model.dist.gammas):
            rows.append((t, i, gamma, gsol.g1[i, m], gsol.g2[i, m], gsol.g3[i, m]))
    write_csv(path, ["t", "atom_index", "gamma", "g1", "g2", "g3"], rows)


def write_strategy_csv(path, spath):
    rows = zip(spath.grid, spath.q_hat, spath.pi_hat, spath.regime)
    write_csv(path, ["t", "q_hat", "pi_hat", "regime"], rows)


def write_admissibility_csv(path, model, report):
    rows = []
    for m, t in enumerate(report.grid):
        for i in range(len(model.dist.gammas)):
            lhs = report.lhs[i, m]
            rows.append((t, i, lhs, report.rhs, report.rhs - lhs))
    write_csv(path, ["t", "atom_index", "lhs", "rhs", "margin"], rows)


def write_simulation_csv(path, result):
    rows = []
    for i, gamma in enumerate(result.gammas):
        rows.append(
            (i, gamma, result.utility_mean[i], result.utility_se[i],
             result.cert_equiv[i], result.reward)
        )
    write_csv(
        path,
        ["atom_index", "gamma", "utility_mean", "utility_se", "cert_equiv", "reward_J"],
        rows,
    )
