"""Frozen sign and phase conventions.

The one-pole soliton is written in terms of the complex coordinate

    omega = x + mu (t + y) / 2 + (t - y) / (2 mu)

and the phase ``c`` multiplying the rank-one projector. Of the four
combinations (mu or conj(mu) in the phase, mu or conj(mu) in omega), exactly
two make the Ward-equation residual converge to zero for a non-static pole
(mu = i + 0.5), and they are the same family relabelled by mu -> conj(mu).
We keep omega in terms of mu and take ``c = conj(mu)/mu``.
``tests/test_solitons.py`` re-runs the calibration and fails if these
constants drift.

The standard-gauge dictionary is fixed the same way: with
``Phi = -Lx/2, Ax = +Lx/2, Ay = At = (Ly + Lt)/2`` all three Bogomolny
residuals vanish on exact solutions of the chiral equation as written
(``d_t Lt - d_x Lx - d_y Ly + [Ly, Lt] = 0``); the opposite sign of
``Phi``/``Ax`` leaves the first and third residuals non-zero.
"""

# phase c = PHASE(mu); the projector enters as I + (c - 1) P
PHASE_CONJ_OVER_MU = True

# omega uses mu itself (not its conjugate)
OMEGA_USES_CONJ = False

# standard gauge: Phi = PHI_SIGN * Lx / 2 and Ax = -Phi
PHI_SIGN = -1.0

# orientation of (x, y, theta) for the charge integrand tr(Rx [Ry, Rtheta]);
# +1 makes (mu = i, f = omega) come out positive
CHARGE_SIGN = 1.0
