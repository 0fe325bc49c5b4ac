"""Independent dense-linear-algebra references used to freeze expected values.

Everything here deliberately avoids the package's sparse code paths: matrices
are dense, least squares go through lstsq/pinv, and the model update solves
an explicitly stacked real least-squares system per node instead of the
closed form.
"""

import numpy as np


def dense_plain_stencil(nx, nz, dx, dz, omega, m_values):
    """5-point Helmholtz matrix with no absorbing pad, assembled by loops."""
    n = nx * nz
    a = np.zeros((n, n), dtype=complex)
    for iz in range(nz):
        for ix in range(nx):
            row = iz * nx + ix
            a[row, row] = -2.0 / dx**2 - 2.0 / dz**2 + omega**2 * m_values[row]
            if ix + 1 < nx:
                a[row, row + 1] = 1.0 / dx**2
            if ix - 1 >= 0:
                a[row, row - 1] = 1.0 / dx**2
            if iz + 1 < nz:
                a[row, row + nx] = 1.0 / dz**2
            if iz - 1 >= 0:
                a[row, row - nx] = 1.0 / dz**2
    return a


def dense_augmented_solve(a, p, lam, rhs_wave, rhs_data):
    """Normal-equation minimizer of ||P u - d||^2 + lam ||A u - b||^2."""
    a = np.asarray(a)
    normal = lam * (a.conj().T @ a)
    rhs = lam * (a.conj().T @ rhs_wave)
    if p is not None and p.shape[0] > 0:
        normal = normal + p.conj().T @ p
        rhs = rhs + p.conj().T @ rhs_data
    return np.linalg.solve(normal, rhs)


def dense_target_lstsq(a2, rhs):
    """Column-wise least squares via the pseudoinverse."""
    return np.linalg.pinv(np.asarray(a2)) @ rhs


def dense_model_update(u_rows, y_rows, omega, prev, lo, hi, threshold_rel=1e-10):
    """Per-node box-clipped real least squares of omega^2 * u * m ~ y.

    Solves each node's 1-unknown system by stacking real and imaginary parts
    and calling lstsq, then clips; nodes below the illumination threshold keep
    their previous value.
    """
    n = u_rows.shape[0]
    out = np.array(prev, dtype=float, copy=True)
    den = (omega**2) * np.sum(np.abs(u_rows) ** 2, axis=1)
    den_max = den.max() if n else 0.0
    for j in range(n):
        if den[j] <= 0 or den[j] < threshold_rel * den_max:
            continue
        col = (omega**2) * u_rows[j]
        lhs = np.concatenate([col.real, col.imag])[:, None]
        rhs = np.concatenate([y_rows[j].real, y_rows[j].imag])
        sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
        out[j] = sol[0]
    return np.clip(out, lo, hi)


def dense_lwi_iteration(a_dense, idx_background, idx_target, lap_dense,
                        u1_frozen, m1_values_unused, b, b_hat, d, d_hat,
                        p_dense, omega, m2_prev, lo, hi):
    """One localized iteration composed entirely from dense pieces.

    Returns (u2, m2, b_hat_next, d_hat_next). ``a_dense`` must already carry
    the current target model values; ``lap_dense`` is its model-independent
    part.
    """
    a1 = a_dense[:, idx_background]
    a2 = a_dense[:, idx_target]
    rhs = b + b_hat - a1 @ u1_frozen
    u2 = dense_target_lstsq(a2, rhs)
    lap2 = lap_dense[:, idx_target]
    y = b + b_hat - a1 @ u1_frozen - lap2 @ u2
    m2 = dense_model_update(u2, y[idx_target], omega, m2_prev, lo, hi)
    a2_new = lap2 + np.zeros_like(a2)
    a2_new[idx_target, np.arange(idx_target.size)] += omega**2 * m2
    wave_lhs = a1 @ u1_frozen + a2_new @ u2
    n = a_dense.shape[0]
    u_full = np.zeros((n, u2.shape[1]), dtype=complex)
    u_full[idx_background] = u1_frozen
    u_full[idx_target] = u2
    b_hat_next = b_hat + (b - wave_lhs)
    d_hat_next = d_hat + (d - p_dense @ u_full)
    return u2, m2, b_hat_next, d_hat_next
