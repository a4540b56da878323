"""Cyclic Jacobi eigensolver for stacks of small symmetric matrices."""
import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50


class JacobiNotConverged(RuntimeError):
    pass


def jacobi_eigh(a, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigenvalues (ascending) and eigenvectors (columns) of symmetric matrices.

    ``a`` has shape (..., n, n). Each sweep applies one rotation per (p, q)
    pair to the whole batch at once; sweeps stop when every off-diagonal
    Frobenius norm is at most ``tol * max(1, ||a||_F)`` (plus one more sweep
    to polish the reconstruction).
    """
    a = np.array(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected (..., n, n) symmetric matrices, got {a.shape}")
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n))
    a = 0.5 * (a + np.swapaxes(a, 1, 2))
    v = np.broadcast_to(np.eye(n), a.shape).copy()
    scale = np.maximum(1.0, np.sqrt(np.sum(a * a, axis=(1, 2))))
    offmask = ~np.eye(n, dtype=bool)

    # one polishing sweep after a matrix meets the tolerance
    polished = np.zeros(len(a), dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.where(offmask, a * a, 0.0), axis=(1, 2)))
        done = off <= tol * scale
        active = ~(done & polished)
        polished |= done
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        sub, vs = a[idx], v[idx]
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = sub[:, p, q]
                nz = apq != 0.0
                # a tiny apq sends theta to inf and t to 0: the rotation is the identity
                with np.errstate(over="ignore", divide="ignore"):
                    theta = np.where(nz, (sub[:, q, q] - sub[:, p, p]) / np.where(nz, 2.0 * apq, 1.0), 0.0)
                    t = np.where(nz, np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
                t = np.where(nz & (theta == 0.0), 1.0, t)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                c3, s3 = c[:, None], s[:, None]
                colp, colq = sub[:, :, p].copy(), sub[:, :, q].copy()
                sub[:, :, p] = c3 * colp - s3 * colq
                sub[:, :, q] = s3 * colp + c3 * colq
                rowp, rowq = sub[:, p, :].copy(), sub[:, q, :].copy()
                sub[:, p, :] = c3 * rowp - s3 * rowq
                sub[:, q, :] = s3 * rowp + c3 * rowq
                sub[:, p, q] = 0.0
                sub[:, q, p] = 0.0
                vp, vq = vs[:, :, p].copy(), vs[:, :, q].copy()
                vs[:, :, p] = c3 * vp - s3 * vq
                vs[:, :, q] = s3 * vp + c3 * vq
        a[idx], v[idx] = sub, vs
    else:
        off = np.sqrt(np.sum(np.where(offmask, a * a, 0.0), axis=(1, 2)))
        if np.any(off > tol * scale):
            raise JacobiNotConverged(f"no convergence in {max_sweeps} sweeps")

    w = np.diagonal(a, axis1=1, axis2=2).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w.reshape(batch_shape + (n,)), v.reshape(batch_shape + (n, n))


def eigvalsh(a):
    return jacobi_eigh(a)[0]
