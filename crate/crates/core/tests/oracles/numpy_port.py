"""Independent numpy/scipy implementation of the optimizer loop in
MATLAB-style numbering.

Used only to generate the frozen values in ../numpy_port.rs:

    python3 numpy_port.py 120 80 1e-6 5
    python3 numpy_port.py 40 20 5 8

Arguments: nelx nely beta iterations. beta stays fixed (no smooth
evaluation), so the output exercises FEA, damping, filtering, floating
projection and the bisection/move-limit update exactly as written.
"""
import sys

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve


def run(nelx, nely, beta, iters, volfrac=0.5, rmin=2.0):
    xmin, move, E0, nu = 1e-3, 0.02, 1.0, 0.3
    A11 = np.array([[12, 3, -6, -3], [3, 12, 3, 0], [-6, 3, 12, -3], [-3, 0, -3, 12]])
    A12 = np.array([[-6, -3, 0, 3], [-3, -6, -3, -6], [0, -3, -6, 3], [3, -6, 3, -6]])
    B11 = np.array([[-4, 3, -2, 9], [3, -4, -9, 4], [-2, -9, -4, -3], [9, 4, -3, -4]])
    B12 = np.array([[2, -3, 4, -9], [-3, 2, 9, -2], [4, 9, 2, 3], [-9, -2, 3, 2]])
    KE = 1 / (1 - nu**2) / 24 * (np.block([[A11, A12], [A12.T, A11]]) + nu * np.block([[B11, B12], [B12.T, B11]]))
    nodenrs = np.arange(1, (1 + nelx) * (1 + nely) + 1).reshape((1 + nely, 1 + nelx), order="F")
    edofVec = (2 * nodenrs[:-1, :-1] + 1).reshape(-1, order="F")
    edofMat = edofVec[:, None] + np.array([0, 1, 2 * nely + 2, 2 * nely + 3, 2 * nely + 0, 2 * nely + 1, -2, -1])[None, :]
    edofMat -= 1  # zero based
    ndof = 2 * (nely + 1) * (nelx + 1)
    iK = np.kron(edofMat, np.ones((8, 1), dtype=int)).reshape(-1)
    jK = np.kron(edofMat, np.ones((1, 8), dtype=int)).reshape(-1)
    F = np.zeros(ndof)
    F[2 * (nely + 1) * (nelx + 1) - nely - 1] = -1.0
    fixed = np.arange(0, 2 * (nely + 1))
    free = np.setdiff1d(np.arange(ndof), fixed)

    rows, cols, vals = [], [], []
    c = int(np.ceil(rmin))
    for i1 in range(nelx):
        for j1 in range(nely):
            e1 = i1 * nely + j1
            for i2 in range(max(i1 - c, 0), min(i1 + c, nelx - 1) + 1):
                for j2 in range(max(j1 - c, 0), min(j1 + c, nely - 1) + 1):
                    rows.append(e1)
                    cols.append(i2 * nely + j2)
                    vals.append(max(0.0, rmin - np.hypot(i1 - i2, j1 - j2)))
    H = sp.csr_matrix((vals, (rows, cols)), shape=(nelx * nely, nelx * nely))
    Hs = np.asarray(H.sum(axis=1)).ravel()

    n = nelx * nely
    rho = np.full(n, volfrac)  # element order: column-major (ix*nely + iy)
    dc = None
    out = []
    for it in range(1, iters + 1):
        oldrho = rho.copy()
        olddc = dc
        sK = (KE.reshape(-1)[None, :] * (rho * E0)[:, None]).reshape(-1)
        # kron ordering matches KE(:) column-major == row-major for symmetric KE
        K = sp.csc_matrix((sK, (iK, jK)), shape=(ndof, ndof))
        K = (K + K.T) / 2
        U = np.zeros(ndof)
        U[free] = spsolve(K[free][:, free], F[free])
        Ue = U[edofMat]
        ce = np.sum((Ue @ KE) * Ue, axis=1)
        comp = float(np.sum(rho * E0 * ce))
        dc = -E0 * ce
        dfdx = np.ones(n) / n
        if it > 1:
            dc = (dc + olddc) / 2.0
        lower, upper = 0.0, 1e6
        while upper - lower > 1e-6:
            lam = (lower + upper) / 2.0
            r = np.maximum(xmin, np.minimum(1.0, oldrho * (lam * (-dc / dfdx))))
            rho1 = H @ r / Hs
            l1, l2 = 0.0, 1.0
            while l2 - l1 > 1e-10:
                ls = (l1 + l2) / 2.0
                rho2 = np.maximum(xmin, (np.tanh(beta * ls) + np.tanh(beta * (rho1 - ls))) / (np.tanh(beta * ls) + np.tanh(beta * (1.0 - ls))))
                if rho2.sum() - rho1.sum() > 0:
                    l1 = ls
                else:
                    l2 = ls
            rho = np.maximum(xmin, np.maximum(oldrho - move, np.minimum(1.0, np.minimum(oldrho + move, rho2))))
            if rho.sum() / n < volfrac:
                lower = lam
            else:
                upper = lam
        change = float(np.abs(oldrho - rho).sum() / n)
        out.append((it, comp, change, float(rho.mean())))
    return out


if __name__ == "__main__":
    nelx, nely, beta, iters = int(sys.argv[1]), int(sys.argv[2]), float(sys.argv[3]), int(sys.argv[4])
    for it, comp, change, vol in run(nelx, nely, beta, iters):
        print(f"{it} {comp!r} {change!r} {vol!r}")
