import numpy as np


def random_state(mesh, seed, vscale=20.0, dmean=5000.0, dspread=500.0):
    rng = np.random.default_rng(seed)
    V = rng.uniform(-vscale, vscale, mesh.n_edges)
    D = dmean + rng.uniform(-dspread, dspread, mesh.n_cells)
    return V, D


# acceptance verdicts, echoed in the terminal summary by conftest
VERDICTS = []


def verdict(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line
