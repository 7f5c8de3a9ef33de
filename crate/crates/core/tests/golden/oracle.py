#!/usr/bin/env python3
"""Independent dense oracle for the golden files in this directory.

Rebuilds both hypotheses from scratch with numpy (no shared code with the
Rust crate) and writes `key = value` records. Run from this directory:

    python3 oracle.py
"""

import numpy as np


def fmt(x):
    return f"{x:.16e}"


def write(path, items):
    with open(path, "w") as f:
        for k, v in items:
            if isinstance(v, str):
                f.write(f'{k} = "{v}"\n')
            elif isinstance(v, (list, tuple, np.ndarray)):
                f.write(f"{k} = [" + ", ".join(fmt(float(x)) for x in v) + "]\n")
            else:
                f.write(f"{k} = {fmt(float(v))}\n")


def thermal(nbar, cutoff):
    q = nbar / (nbar + 1.0)
    p = np.array([q**n / (nbar + 1.0) for n in range(cutoff)])
    return p / p.sum()


def flat(nbar, cutoff):
    levels = max(int(round(nbar)), 1)
    p = np.zeros(cutoff)
    p[:levels] = 1.0 / levels
    return p


def pair(theta, eta, nbar, cutoffs, background, idler):
    ci, c1, c2 = cutoffs
    marg = thermal if background == "thermal" else flat
    b = np.kron(np.diag(marg(nbar, c1)), np.diag(marg(nbar, c2)))
    c, s = np.cos(theta), np.sin(theta)
    if idler == "paper-pure":
        a = np.zeros(ci, dtype=complex)
        a[0], a[1] = c, -1j * s
        p = np.outer(a, a.conj())
    else:
        p = np.zeros((ci, ci))
        p[0, 0], p[1, 1] = c * c, s * s
    rho0 = np.kron(p, b).astype(complex)
    psi = np.zeros(ci * c1 * c2, dtype=complex)
    psi[0] = c
    psi[1 * c1 * c2 + 1 * c2 + 1] = -1j * s
    rho1 = (1 - eta) * rho0 + eta * np.outer(psi, psi.conj())
    return rho0, rho1


def spectral(rho):
    w, v = np.linalg.eigh(rho)
    return w, v


def powm(sys, x, cut=1e-12):
    w, v = sys
    lim = cut * max(w.max(), 0.0)
    f = np.array([0.0 if (l <= lim or l <= 0) else (1.0 if x == 0 else l**x) for l in w])
    return (v * f) @ v.conj().T


def q_s(s0, s1, x):
    return float(np.real(np.trace(powm(s0, x) @ powm(s1, 1 - x))))


def helstrom(rho0, rho1, pi0=0.5):
    d = (1 - pi0) * rho1 - pi0 * rho0
    return 0.5 * (1 - np.abs(np.linalg.eigvalsh(d)).sum())


GOLDEN = dict(theta=0.1, eta=0.05, nbar=3.0, cutoffs=(2, 6, 6), background="thermal",
              idler="paper-pure")

EQUIV = [
    ("thermal3", 0.1, 0.05, 3.0, (2, 6, 6), "thermal", "paper-pure"),
    ("thermal3_traced", 0.1, 0.05, 3.0, (2, 6, 6), "thermal", "traced"),
    ("thermal3_c8", 0.1, 0.05, 3.0, (2, 8, 8), "thermal", "paper-pure"),
    ("flat3", 0.1, 0.05, 3.0, (2, 6, 6), "flat", "paper-pure"),
    ("flat20", 0.05, 0.04, 20.0, (2, 20, 20), "flat", "paper-pure"),
    ("flat20_traced", 0.05, 0.04, 20.0, (2, 20, 20), "flat", "traced"),
    ("thermal2_c10", 0.2, 0.3, 2.0, (3, 10, 10), "thermal", "paper-pure"),
]


def golden_pair():
    g = GOLDEN
    rho0, rho1 = pair(g["theta"], g["eta"], g["nbar"], g["cutoffs"], g["background"], g["idler"])
    s0, s1 = spectral(rho0), spectral(rho1)
    grid = np.linspace(0.0, 1.0, 10001)
    qs = np.array([q_s(s0, s1, x) for x in grid])
    k = int(np.argmin(qs))
    q_half = q_s(s0, s1, 0.5)
    # partial trace over the idler
    c1, c2 = g["cutoffs"][1], g["cutoffs"][2]
    r = rho1.reshape(g["cutoffs"][0], c1 * c2, g["cutoffs"][0], c1 * c2)
    pt = np.einsum("iaib->ab", r)
    write("pair_golden.txt", [
        ("q_half", q_half),
        ("q_quarter", q_s(s0, s1, 0.25)),
        ("s_star", grid[k]),
        ("q_star", qs[k]),
        ("exponent", -np.log(qs[k])),
        ("bhattacharyya_m100", 0.5 * q_half**100),
        ("helstrom", helstrom(rho0, rho1)),
        ("rho1_spectrum", np.sort(s1[0])[::-1]),
        ("partial_trace_re", pt.real.flatten()),
        ("partial_trace_im", pt.imag.flatten()),
    ])


def equivalence():
    items = []
    for name, theta, eta, nbar, cut, bg, idler in EQUIV:
        rho0, rho1 = pair(theta, eta, nbar, cut, bg, idler)
        s0, s1 = spectral(rho0), spectral(rho1)
        items.append((f"{name}.q_half", q_s(s0, s1, 0.5)))
        items.append((f"{name}.q_0_3", q_s(s0, s1, 0.3)))
        items.append((f"{name}.helstrom", helstrom(rho0, rho1)))
    write("equivalence.txt", items)


def evolution(gt=0.1, chain=8):
    n = np.arange(chain)
    h = np.zeros((chain, chain))
    for k in range(chain - 1):
        h[k, k + 1] = h[k + 1, k] = (k + 1) ** 1.5
    w, v = np.linalg.eigh(h)
    e0 = np.zeros(chain)
    e0[0] = 1.0
    amp = v @ (np.exp(-1j * gt * w) * (v.T @ e0))
    mean = float(np.sum(n * np.abs(amp) ** 2))
    write("evolution.txt", [
        ("gt", gt),
        ("amplitudes_re", amp.real),
        ("amplitudes_im", amp.imag),
        ("mean_photons", mean),
    ])


def backgrounds():
    p = thermal(20.0, 256)
    q = flat(20.0, 256)
    write("backgrounds.txt", [("trace_distance_n20_c256", 0.5 * np.abs(p - q).sum())])


def regime_point():
    # flat nbar = 50 is small enough for a direct dense solve
    rho0, rho1 = pair(0.01, 0.01, 50.0, (2, 50, 50), "flat", "paper-pure")
    s0, s1 = spectral(rho0), spectral(rho1)
    write("regime_point.txt", [("t_principal", q_s(s0, s1, 0.5)), ("t_paper", 1 - 0.1 / 50)])


if __name__ == "__main__":
    golden_pair()
    equivalence()
    evolution()
    backgrounds()
    regime_point()
