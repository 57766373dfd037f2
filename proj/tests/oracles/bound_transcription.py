#!/usr/bin/env python3
"""Independent transcription of the finite-sample bound formulas, evaluated at
fixed inputs. The C++ implementation must reproduce these to 1e-12 relative.

Frozen into tests/test_analysis.cpp.
"""
import math

# shared fixed inputs
gamma = 0.8
alpha = 0.9
lam = 1.0
card_A = 4
card_S = 6
sigma = 0.03          # sigma-floor
m, kappa = 2.5, 0.7   # mixing envelope
d0 = 1.3              # ||D^{pi*}_{pi0}||_inf


def psi(B, theta, m, kappa, gamma):
    if theta < kappa:
        return m * kappa ** B / ((1 - gamma) * (kappa - theta))
    if theta == kappa:
        return m * B * theta ** (B - 1) / (1 - gamma)
    if theta < 1:
        return m * theta ** B / ((1 - gamma) * (theta - kappa))
    return m / (B * (1 - gamma) * (1 - kappa))


# ---- constant-step bound (K=800, B=32, theta=0.5) ----
K, B, theta = 800, 32, 0.5
eta_star = math.sqrt(alpha * lam * sigma ** 2 * (1 - gamma) ** 4 * d0
                     / (6 * card_A ** 2 * (K + 1)))
t1 = (3 / ((K + 1) * alpha * sigma * (1 - gamma) ** 3)
      + (2 / math.sqrt(K + 1)) * math.sqrt(6 * card_A ** 2 * d0
                                           / (alpha * lam * sigma ** 2 * (1 - gamma) ** 6))
      + 2 * psi(B, theta, m, kappa, gamma) / (sigma * (1 - gamma) ** 2))

L = card_A * (math.ceil(math.log(1.0 / m) / math.log(kappa)) + 1 / (1 - kappa))
t3 = (3 / ((K + 1) * alpha * sigma * (1 - gamma) ** 3)
      + (2 / math.sqrt(K + 1)) * math.sqrt((6 + 4 * L) * card_A ** 2 * d0
                                           / (alpha * lam * sigma ** 2 * (1 - gamma) ** 6))
      + 2 * psi(B, theta, m, kappa, gamma) / (sigma * (1 - gamma) ** 2))

# ---- adaptive-step bound (K=40, constant B=64, eta=12) ----
K2, B2, eta2 = 40, 64, 12.0
rho = 1 - (1 - gamma) * alpha * sigma
C1 = math.sqrt(4 * card_S * card_A / (1 - gamma) ** 2 * (1 + m / (1 - kappa)))


def xi(t):
    acc = 0.0
    for k in range(t):
        acc = rho * acc + B2 ** -0.5 if False else acc  # (direct sum below)
    s = 0.0
    for k in range(t):
        s += rho ** (t - 1 - k) * B2 ** -0.5
    return s


t2 = (2 / (alpha * sigma * (1 - gamma) ** 2) * rho ** (K2 - 1)
      + 2 * gamma / (alpha * eta2 * (1 - gamma) ** 2 * sigma ** 2)
      + (1 / (sigma * (1 - gamma))) * C1 * (xi(K2) + xi(K2 - 1) + B2 ** -0.5))

cor1 = rho ** K2 / (1 - gamma) + alpha * C1 * xi(K2)

print(f"psi_value = {psi(B, theta, m, kappa, gamma):.17g}")
print(f"eta_star  = {eta_star:.17g}")
print(f"L         = {L:.17g}")
print(f"T1        = {t1:.17g}")
print(f"T3        = {t3:.17g}")
print(f"C1        = {C1:.17g}")
print(f"T2        = {t2:.17g}")
print(f"Cor1      = {cor1:.17g}")
