"""Arbitrary-precision reference values frozen into the likelihood/bic tests.

Run with `python3 normal_tail.py`; requires mpmath.
"""
from mpmath import mp, mpf, ncdf, npdf, log, exp, cos, sin

mp.dps = 60


def log_phi(x):
    return log(ncdf(mpf(x)))


def f_prime(x):
    x = mpf(x)
    return -npdf(x) / ncdf(x)


def xi(x):
    x = mpf(x)
    return (1 / ncdf(x) + 1 / ncdf(-x)) * exp(-x * x)


print("# log_phi")
for x in [0, 1, -1, 3, -3, -5, -7.5, -8, -8.5, -10, -15, -20, -30, -40, 5, 10]:
    print(f"({x!r}, {mp.nstr(log_phi(x), 25)}),")

print("# complementary at 1: log(1 - Phi(1))")
print(mp.nstr(log(1 - ncdf(1)), 25))

print("# f_prime")
for x in [0, 2, -2, -7.9, -8.1, -10, -25, -40, 20]:
    print(f"({x!r}, {mp.nstr(f_prime(x), 25)}),")

print("# xi")
for x in [0, 1.3, 5, -5, 12]:
    print(f"({x!r}, {mp.nstr(xi(x), 25)}),")

# N=2, M=1 toy for the negative log-likelihood.
y = [1, -1]
h = [mpf("-0.3"), mpf("0.5")]
omega, a, b, lam = mpf("0.9"), mpf("0.7"), mpf("-0.4"), mpf("1.3")
total = mpf(0)
for n in range(2):
    r = a * cos(omega * n) + b * sin(omega * n)
    total += -log(ncdf(y[n] * (r - lam * h[n])))
print("# toy nll")
print(mp.nstr(total, 25))
