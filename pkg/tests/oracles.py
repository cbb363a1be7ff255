"""Reference implementations that share no code with the package.

* Fresnel / Airy closed forms for one and two interfaces.
* Characteristic-matrix (Abeles) propagation of (E, H) upward from the
  substrate, giving r and the field at any depth.
* Direct solution of the sheet-source problem E'' + q^2 E = -k0^2 P delta(z - z_s)
  by marching (E, E') down the stack with jump conditions.
* Pairwise coincidence counting.

Conventions follow the package: exp(-i w t), depth z downward from the top of
the first layer, incident unit wave in the ambient.
"""

from __future__ import annotations

import numpy as np


def fresnel_r(n1, n2):
    return (n1 - n2) / (n1 + n2)


def airy_r(n0, n1, n2, d, lam):
    r01, r12 = fresnel_r(n0, n1), fresnel_r(n1, n2)
    ph = np.exp(2j * (2 * np.pi * n1 * d / lam))
    return (r01 + r12 * ph) / (1 + r01 * r12 * ph)


def airy_t(n0, n1, n2, d, lam):
    t01, t12 = 2 * n0 / (n0 + n1), 2 * n1 / (n1 + n2)
    r01, r12 = fresnel_r(n0, n1), fresnel_r(n1, n2)
    delta = 2 * np.pi * n1 * d / lam
    return t01 * t12 * np.exp(1j * delta) / (1 + r01 * r12 * np.exp(2j * delta))


def _layer_matrix(n, d, lam):
    """Maps (E, H) at the bottom of a layer to (E, H) at its top; H = n (E+ - E-)."""
    delta = 2 * np.pi * n * d / lam
    c, s = np.cos(delta), np.sin(delta)
    return np.array([[c, -1j * s / n], [-1j * n * s, c]])


def abeles(n, d, lam):
    """Reflection/transmission amplitudes and a depth -> (E, dE/dz) evaluator.

    ``n``: ambient, layers..., substrate; ``d``: layer thicknesses.
    """
    n = np.asarray(n, complex)
    d = np.asarray(d, float)
    tops = np.concatenate([[0.0], np.cumsum(d)])
    # state at the substrate top for unit transmitted amplitude
    state_bottom = np.array([1.0, n[-1]], complex)
    states = [state_bottom]
    for j in range(d.size - 1, -1, -1):
        states.append(_layer_matrix(n[j + 1], d[j], lam) @ states[-1])
    E0, H0 = states[-1]
    inc = (E0 + H0 / n[0]) / 2
    ref = (E0 - H0 / n[0]) / 2
    r, t = ref / inc, 1.0 / inc
    layer_bottom_states = states[::-1][1:]  # state at the bottom of layer j (= top of j+1)
    k0 = 2 * np.pi / lam

    def field(z):
        z = np.atleast_1d(np.asarray(z, float))
        E = np.empty(z.shape, complex)
        dE = np.empty(z.shape, complex)
        for i, zi in enumerate(z):
            if zi < 0:
                q = k0 * n[0]
                E[i] = (np.exp(1j * q * zi) + r * np.exp(-1j * q * zi))
                dE[i] = 1j * q * (np.exp(1j * q * zi) - r * np.exp(-1j * q * zi))
                continue
            if zi >= tops[-1]:
                q = k0 * n[-1]
                E[i] = t * np.exp(1j * q * (zi - tops[-1]))
                dE[i] = 1j * q * E[i]
                continue
            j = int(np.searchsorted(tops, zi, side="right")) - 1
            bottom = layer_bottom_states[j]
            st = _layer_matrix(n[j + 1], tops[j + 1] - zi, lam) @ bottom / inc
            E[i] = st[0]
            dE[i] = 1j * k0 * st[1]
        return E, dE

    return r, t, field


def _march(E, D, q, length):
    """Advance (E, dE/dz) by ``length`` in a homogeneous region of wavevector q."""
    c, s = np.cos(q * length), np.sin(q * length)
    return E * c + D * s / q, -q * E * s + D * c


def sheet_reflection(n, d, lam, z_sheets, p_sheets, mirror=False):
    """Upward amplitude in the ambient (at z = 0) radiated by polarization sheets.

    Solves E'' + (k0 n)^2 E = -k0^2 sum P_s delta(z - z_s) with outgoing waves,
    using E continuous and dE/dz jumping by -k0^2 P_s at each sheet.
    """
    n = np.asarray(n, complex)
    d = np.asarray(d, float)
    k0 = 2 * np.pi / lam
    q = k0 * n
    bounds = np.concatenate([[0.0], np.cumsum(d)])
    order = np.argsort(z_sheets)
    zs = np.asarray(z_sheets, float)[order]
    ps = np.asarray(p_sheets, complex)[order]

    def run(a, with_sources):
        # upward wave a e^{-i q0 z} above the stack
        E, D = a, -1j * q[0] * a
        z = 0.0
        k = 0
        for j in range(d.size):
            z_end = bounds[j + 1]
            while with_sources and k < zs.size and zs[k] < z_end:
                E, D = _march(E, D, q[j + 1], zs[k] - z)
                D = D - k0 ** 2 * ps[k]
                z = zs[k]
                k += 1
            E, D = _march(E, D, q[j + 1], z_end - z)
            z = z_end
        return E, D

    UE, UD = run(1.0 + 0j, False)
    VE, VD = run(0.0 + 0j, True)
    if mirror:
        return -VE / UE
    qs = q[-1]
    return (1j * qs * VE - VD) / (UD - 1j * qs * UE)


def pairwise_histogram(t1, t2, bin_width, half_window, chunk=512):
    """Count every pair (i, j) with t2[j] - t1[i] in the centred window bins."""
    t1 = np.asarray(t1, np.int64)
    t2 = np.asarray(t2, np.int64)
    counts = np.zeros(2 * half_window + 1, np.int64)
    for start in range(0, t1.size, chunk):
        d = (t2[None, :] - t1[start:start + chunk, None]).ravel().astype(float)
        k = np.floor(d / bin_width + 0.5).astype(np.int64)
        k = k[np.abs(k) <= half_window]
        counts += np.bincount(k + half_window, minlength=counts.size)
    return counts
