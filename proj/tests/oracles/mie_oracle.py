"""Sound-soft disk reference values for test_postprocess (scipy, cross-checked with mpmath)."""
import mpmath as mp
import numpy as np
import scipy.special as sp

k, R, alpha = 2 * np.pi, 0.5, np.pi / 6


def coeff(n):
    return sp.jv(n, k * R) / sp.hankel1(n, k * R)


def far_field(phi):
    s = sum((1 if n == 0 else 2) * coeff(n) * np.cos(n * (phi - alpha)) for n in range(60))
    return -(1 - 1j) / np.sqrt(np.pi * k) * s


def scattered(x, y):
    r, a = np.hypot(x, y), np.arctan2(y, x) - alpha
    return -sum((1 if n == 0 else 2) * 1j**n * coeff(n) * sp.hankel1(n, k * r) * np.cos(n * a) for n in range(80))


if __name__ == "__main__":
    for j in range(4):
        print("F", j, repr(far_field(j * np.pi / 2)))
    print("us(1, 0.5)", repr(scattered(1.0, 0.5)))
    print("us(-0.3, 0.6)", repr(scattered(-0.3, 0.6)))
    mp.mp.dps = 30
    cm = lambda n: mp.besselj(n, k * R) / mp.hankel1(n, k * R)
    print("F 0 mpmath", -(1 - 1j) / mp.sqrt(mp.pi * k) * sum((1 if n == 0 else 2) * cm(n) * mp.cos(n * alpha) for n in range(60)))
