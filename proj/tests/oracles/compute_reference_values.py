#!/usr/bin/env python3
"""Independent reference values for the regression tests.

Nothing here shares code with the C++ library: transition matrices come from
scipy's expm, Gramians from adaptive quadrature, and the optimal endpoint
covariance from a generic quasi-Newton minimization of the Gaussian relative
entropy objective. The printed constants are frozen into tests/reference_values.hpp.
"""
import numpy as np
from scipy.integrate import quad_vec, solve_ivp
from scipy.linalg import expm
from scipy.optimize import minimize


def prior(A, B, sigma0, T):
    phi = expm(A * T)
    gram, _ = quad_vec(lambda s: expm(A * (T - s)) @ B @ B.T @ expm(A * (T - s)).T,
                       0.0, T, epsabs=1e-14, epsrel=1e-13)
    n = A.shape[0]
    s_t = phi @ sigma0 @ phi.T + gram
    S = np.block([[sigma0, sigma0 @ phi.T], [phi @ sigma0, s_t]])
    return phi, gram, S


def objective(joint, S):
    try:
        L = np.linalg.cholesky(joint)
    except np.linalg.LinAlgError:
        return np.inf
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -logdet + np.trace(np.linalg.solve(S, joint))


def two_kl(joint, S):
    d = S.shape[0]
    return objective(joint, S) - d + np.linalg.slogdet(S)[1]


def scalar_case():
    z = (np.sqrt(5.0) - 1.0) / 2.0
    S = np.array([[1.0, 1.0], [1.0, 2.0]])
    joint = np.array([[1.0, z], [z, 1.0]])
    print("scalar z          = %.17g" % z)
    print("scalar Pi(0)      = %.17g" % (z * z))
    print("scalar objective  = %.17g" % objective(joint, S))
    print("scalar 2KL        = %.17g" % two_kl(joint, S))

    # Energy by integrating the closed-loop variance ODE with Pi(t) = z/(1+z(1-t)).
    pi = lambda t: z / (1.0 + z * (1.0 - t))
    sol = solve_ivp(lambda t, y: [-2.0 * pi(t) * y[0] + 1.0, pi(t) ** 2 * y[0]],
                    (0.0, 1.0), [1.0, 0.0], rtol=1e-12, atol=1e-14)
    print("scalar Sigma(1)   = %.17g" % sol.y[0, -1])
    print("scalar energy ODE = %.17g" % sol.y[1, -1])


def ou_case():
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    B = np.array([[0.0], [1.0]])
    sigma0 = 0.5 * np.eye(2)
    C = np.array([[0.0, 1.0]])
    target = 1.0 / 16.0
    phi, gram, S = prior(A, B, sigma0, 1.0)
    print("OU Phi(1,0)       =", np.array2string(phi, precision=17, separator=", "))
    print("OU M01            =", np.array2string(gram, precision=17, separator=", "))
    print("OU S_T            =", np.array2string(S[2:, 2:], precision=17, separator=", "))

    # Unknowns: X11, X12 (X22 pinned to the target) and the four entries of Y.
    def unpack(v):
        X = np.array([[v[0], v[1]], [v[1], target]])
        Y = v[2:].reshape(2, 2)
        return np.block([[sigma0, Y], [Y.T, X]])

    f = lambda v: objective(unpack(v), S)
    v0 = np.array([S[2, 2], 0.0, 0.0, 0.0, 0.0, 0.0])
    best = None
    for method in ("BFGS", "Nelder-Mead"):
        res = minimize(f, v0 if best is None else best.x, method=method,
                       options={"gtol": 1e-12, "maxiter": 200000} if method == "BFGS"
                       else {"xatol": 1e-13, "fatol": 1e-15, "maxiter": 200000, "maxfev": 400000})
        if best is None or res.fun < best.fun:
            best = res
    res = minimize(f, best.x, method="BFGS", options={"gtol": 1e-13})
    joint = unpack(res.x)
    X = joint[2:, 2:]
    Y = joint[:2, 2:]
    print("OU objective      = %.17g" % res.fun)
    print("OU 2KL            = %.17g" % two_kl(joint, S))
    print("OU X              =", np.array2string(X, precision=17, separator=", "))
    print("OU Y              =", np.array2string(Y, precision=17, separator=", "))


if __name__ == "__main__":
    np.set_printoptions(floatmode="unique")
    scalar_case()
    ou_case()
