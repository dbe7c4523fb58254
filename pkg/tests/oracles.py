"""Reference computations that share no code with the package."""

import mpmath as mp


def ritz_sector_eigenvalues(r, t, ell, size=24, dps=60, k=3):
    """Lowest ``k`` Ritz values of the angular sector ``ell`` of the model Laplacian.

    In the sector ``u = e^{i ell theta} rho^ell e^{-t rho^r} q(rho)`` the form is
    ``(1/4) int p |q'|^2 / int p |q|^2`` with ``p = rho^{2 ell + 1} e^{-2 t rho^r}``.
    Trial functions are ``q = rho^e`` with ``e >= 2|ell|`` for negative sectors
    (regularity at the origin).  Moments of ``p`` are Gamma values.
    """
    with mp.workdps(dps):
        r, t = mp.mpf(r), mp.mpf(t)

        def moment(a):
            return mp.gamma((a + 1) / r) / (r * (2 * t) ** ((a + 1) / r))

        lo = 2 * abs(ell) if ell < 0 else 0
        exps = [lo + j for j in range(size)]
        base = 2 * ell + 1
        A = mp.matrix(size, size)
        B = mp.matrix(size, size)
        for i, a in enumerate(exps):
            for j, b in enumerate(exps):
                A[i, j] = a * b * moment(base + a + b - 2) / 4 if a and b else mp.mpf(0)
                B[i, j] = moment(base + a + b)
        L = mp.cholesky(B)
        Li = mp.inverse(L)
        C = Li * A * Li.T
        C = (C + C.T) / 2
        vals = sorted(mp.eigsy(C, eigvals_only=True))
        return [float(v) for v in vals[:k]]


def gaussian_integral_radial(n, t=1.0):
    """``int |z|^{2n} e^{-2t|z|^2} dA = pi n! / (2t)^{n+1}``."""
    return float(mp.pi * mp.factorial(n) / (2 * mp.mpf(t)) ** (n + 1))


def egg_monomial_norm_quadrature(k, a, b):
    """``pi^2 int_{u + v^k < 1} u^a v^b du dv`` (``u = |z1|^2``, ``v = |z2|^2``)."""
    with mp.workdps(30):
        inner = lambda v: (1 - v**k) ** (a + 1) / (a + 1)  # noqa: E731
        return float(mp.pi**2 * mp.quad(lambda v: v**b * inner(v), [0, 1]))


def egg_diagonal_closed_form(k, u, w):
    """Diagonal kernel of ``E_k`` at ``|z1|^2 = u``, ``|z2|^2 = w``.

    Summing both monomial series in closed form:
    ``(k / pi^2) (1-u)^{-2-1/k} k^{-2} [(1+y)/(1-y)^3 + k/(1-y)^2]``, ``y = w (1-u)^{-1/k}``.
    """
    with mp.workdps(40):
        u, w = mp.mpf(u), mp.mpf(w)
        y = w / (1 - u) ** (mp.mpf(1) / k)
        s = ((1 + y) / (1 - y) ** 3 + k / (1 - y) ** 2) / k**2
        return float(k / mp.pi**2 * (1 - u) ** (-2 - mp.mpf(1) / k) * s)
