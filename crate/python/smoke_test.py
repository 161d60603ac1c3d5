"""Smoke test for the mflab_py extension module.

Builds nothing itself: expects the cdylib at target/<profile>/libmflab_py.so
(override with MFLAB_PY_SO) and stages it into a temp directory under the
importable name mflab_py.so.
"""

import math
import os
import shutil
import sys
import tempfile


def stage_module():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    so = os.environ.get("MFLAB_PY_SO")
    if so is None:
        for profile in ("debug", "release"):
            cand = os.path.join(root, "target", profile, "libmflab_py.so")
            if os.path.exists(cand):
                so = cand
                break
    if so is None or not os.path.exists(so):
        sys.exit("libmflab_py.so not found; run: cargo build -p mflab-py")
    stage = tempfile.mkdtemp(prefix="mflab_py_")
    shutil.copy(so, os.path.join(stage, "mflab_py.so"))
    sys.path.insert(0, stage)


stage_module()
import mflab_py  # noqa: E402


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


# space construction
space = mflab_py.Space.two_mode(1.0, 0.4)
assert space.dim == 2

phi0 = [0.8 + 0.0j, 0.0 + 0.6j]
approx(space.norm(phi0), 1.0)

# Hartree flow conserves norm and energy
traj = mflab_py.hartree(space, phi0, 0.5, 1e-3, "rk4")
approx(traj.t_max, 0.5)
phi_t = traj.state_at(0.5)
approx(space.norm(phi_t), 1.0, 1e-8)
approx(space.energy(phi_t), space.energy(phi0), 1e-8)

# Theta is symplectic and satisfies the Hartree-pair relation
th = mflab_py.theta(space, traj, 1e-3, "midpoint-magnus")
r1, r2, r3 = th.residuals(space, traj, 0.5)
assert r1 < 1e-10 and r2 < 1e-10 and r3 < 1e-6, (r1, r2, r3)

u, v = th.at(0.0)
approx(abs(u[0][0] - 1.0), 0.0, 1e-12)
approx(abs(v[0][0]), 0.0, 1e-12)

# covariance of a single observable: real diagonal, charfn 1 at tau = 0
sz = [[1.0 + 0.0j, 0.0j], [0.0j, -1.0 + 0.0j]]
sigma = mflab_py.covariance(space, traj, th, [sz], 0.5)
assert abs(sigma[0][0].imag) < 1e-6
assert sigma[0][0].real > 0.0
approx(abs(mflab_py.gaussian_charfn_py(sigma, [0.0])), 1.0, 1e-12)
assert abs(mflab_py.gaussian_charfn_py(sigma, [1.0])) < 1.0

# xi machinery
w = mflab_py.xi_coefficients(100, 10)
approx(w[2], -1.0 / math.sqrt(2.0), 1e-12)
w_inf = mflab_py.xi_infinity(10)
approx(w_inf[4], math.sqrt(3.0 / 8.0), 1e-12)
apriori, total, diff5, d_sq, l_used = mflab_py.xi_norms(100, 60)
assert apriori <= 10.0
assert 0.999 <= total / d_sq <= 1.001
assert diff5 < 1e-3
assert l_used >= 60

print("smoke test passed")
