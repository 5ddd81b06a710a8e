"""Frozen values from the independent scipy computation in oracles/kernel_oracle.py."""

# central height w(0) of the ground state, p = 3
PEAK_N2_P3 = 2.2062008646506843
PEAK_N3_P3 = 4.33738767997696
# w(r) ~ A r^{-1} e^{-r} for N = 3
TAIL_AMP_N3_P3 = 2.7128083610158122

# (psi, psi1, psi2) for N = 3, p = 3
KERNELS_N3_P3 = {
    8.0: (0.0043626941209306295, -0.004968623631289631, 0.0005453367651173277),
    12.0: (5.129737854973639e-05, -5.59009894446605e-05, 4.274781545897417e-06),
}
