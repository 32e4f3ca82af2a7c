# Independent reference for the gamma = 0.2 circular-pivot periodic orbit.
#
# Equations of motion are derived symbolically from the Lagrangian in chart
# coordinates (x, y) with Rayleigh dissipation, integrated with DOP853 at
# tight tolerance, and the period-map fixed point is solved with scipy.
# Run: python3 reference_orbit.py

import numpy as np, sympy as sp
from scipy.integrate import solve_ivp
from scipy.optimize import root

def build(m, g, gam, ell, axc, axs, aec, aes, T):
    x, y, vx, vy, t = sp.symbols('x y vx vy t', real=True)
    q = sp.Matrix([x, y]); qd = sp.Matrix([vx, vy])
    z = sp.sqrt(ell**2 - x**2 - y**2)
    r = sp.Matrix([x, y, z])
    J = r.jacobian(q)
    rd = J * qd
    w = 2*sp.pi/T
    xi = sum(a*sp.cos((k+1)*w*t) for k, a in enumerate(axc)) + sum(b*sp.sin((k+1)*w*t) for k, b in enumerate(axs))
    eta = sum(a*sp.cos((k+1)*w*t) for k, a in enumerate(aec)) + sum(b*sp.sin((k+1)*w*t) for k, b in enumerate(aes))
    rho_dd = sp.Matrix([sp.diff(xi, t, 2), sp.diff(eta, t, 2), 0])
    L = m/2*(rd.T*rd)[0] - m*g*z - m*(rho_dd.T*r)[0]
    D = gam/2*(rd.T*rd)[0]
    # Euler-Lagrange: M qdd + (d/dt dL/dqd wrt q)*qd - dL/dq + dD/dqd = 0
    p = sp.Matrix([sp.diff(L, s) for s in qd])
    M = p.jacobian(qd)
    rhs = sp.Matrix([sp.diff(L, s) for s in q]) - p.jacobian(q)*qd - sp.diff(p, t) - sp.Matrix([sp.diff(D, s) for s in qd])
    fM = sp.lambdify((t, x, y, vx, vy), M, 'numpy')
    fr = sp.lambdify((t, x, y, vx, vy), rhs, 'numpy')
    def f(tt, u):
        Mm = np.array(fM(tt, *u), dtype=float); rr = np.array(fr(tt, *u), dtype=float).ravel()
        a = np.linalg.solve(Mm, rr)
        return [u[2], u[3], a[0], a[1]]
    return f

def period_map(f, u, T, t0=0.0):
    s = solve_ivp(f, (t0, t0+T), u, method='DOP853', rtol=1e-13, atol=1e-15)
    return s.y[:, -1]

def solve(m=1., g=1., gam=0.2, ell=1., axc=(0.1,), axs=(), aec=(), aes=(0.1,), T=2*np.pi, guess=None):
    f = build(m, g, gam, ell, list(axc), list(axs), list(aec), list(aes), T)
    if guess is None:
        guess = np.zeros(4)
    sol = root(lambda u: period_map(f, u, T) - u, guess, method='hybr', tol=1e-14)
    u = sol.x
    for _ in range(3):
        # polish with Newton, central-difference Jacobian
        R = period_map(f, u, T) - u
        Jm = np.zeros((4, 4)); h = 1e-6
        for j in range(4):
            e = np.zeros(4); e[j] = h
            Jm[:, j] = (period_map(f, u+e, T) - period_map(f, u-e, T))/(2*h)
        u = u - np.linalg.solve(Jm - np.eye(4), R)
    R = period_map(f, u, T) - u
    return u, np.linalg.norm(R), np.linalg.eigvals(Jm)

if __name__ == '__main__':
    np.set_printoptions(precision=17)
    g2 = 0.2
    A = -0.1/(2+g2**2/2); B = -g2*A/2
    # linear guess: x = A cos t + B sin t ; y = A sin t - B cos t
    guess = np.array([A, -B, B, A])
    u, res, ev = solve(gam=g2, guess=guess)
    print('ref gamma=0.2', repr(u.tolist()), res, ev)
