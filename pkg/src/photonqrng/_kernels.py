"""Compiled inner loops.

Each gate consumes exactly two uniforms from ``u``: ``u[2g]`` picks the photon
number by inversion of the tabulated Poisson CDF, ``u[2g+1]`` decides the
click. Dead gates consume their pair too, so the bit sequence depends only on
the uniform stream and never on how it was chunked.
"""
import numba
import numpy as np

# afterpulse history fits in one int64 bitmask up to this horizon
MASK_HORIZON_MAX = 62


@numba.njit(cache=True, nogil=True)
def _photon_index(u, cdf, guide):
    k = guide.shape[0]
    i = guide[int(u * k)]
    last = cdf.shape[0] - 1
    while i < last and u >= cdf[i]:
        i += 1
    return i


@numba.njit(cache=True, nogil=True)
def gates_masked(u, cdf, guide, noclick, byte_tab, nbytes, hmask, mask, dead, dead_gates, out):
    """Simulate ``out.size`` gates with the history kept as a bitmask.

    Bit ``a - 1`` of ``mask`` is set when the gate ``a`` steps back clicked.
    ``byte_tab[j, b]`` is the product of afterpulse survival factors for the
    ages encoded by byte ``j`` of the mask.
    """
    for g in range(out.shape[0]):
        q = noclick[_photon_index(u[2 * g], cdf, guide)]
        m = mask
        for j in range(nbytes):
            q *= byte_tab[j, m & 0xFF]
            m >>= 8
        click = 0
        if dead > 0:
            dead -= 1
        elif u[2 * g + 1] >= q:
            click = 1
            dead = dead_gates
        out[g] = click
        mask = ((mask << 1) | click) & hmask
    return mask, dead


@numba.njit(cache=True, nogil=True)
def gates_ring(u, cdf, guide, noclick, factors, ring, pos, dead, dead_gates, out):
    """Same model as :func:`gates_masked` for arbitrary horizons.

    ``ring[(pos - a) % H]`` holds the click flag of the gate ``a`` steps back.
    """
    h = ring.shape[0]
    for g in range(out.shape[0]):
        q = noclick[_photon_index(u[2 * g], cdf, guide)]
        for a in range(1, h + 1):
            if ring[(pos - a + h) % h]:
                q *= factors[a - 1]
        click = 0
        if dead > 0:
            dead -= 1
        elif u[2 * g + 1] >= q:
            click = 1
            dead = dead_gates
        out[g] = click
        if h:
            ring[pos] = click
            pos = (pos + 1) % h
    return pos, dead


def byte_product_table(factors):
    """Per-byte products of ``factors`` (index ``a - 1`` = age ``a``)."""
    nbytes = (len(factors) + 7) // 8
    padded = np.ones(8 * max(nbytes, 1))
    padded[: len(factors)] = factors
    bits = (np.arange(256)[:, None] >> np.arange(8)[None, :]) & 1
    tab = np.ones((max(nbytes, 1), 256))
    for j in range(nbytes):
        f = padded[8 * j : 8 * j + 8]
        tab[j] = np.prod(np.where(bits == 1, f[None, :], 1.0), axis=1)
    return tab, nbytes
