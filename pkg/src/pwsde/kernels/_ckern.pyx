# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernels for the shipped models.

One specialised code path per model id; the math mirrors kernels.pure
step for step (see that module for the contract).  Dimensions are small,
so every per-path scratch vector lives on the stack.
"""

from libc.math cimport fabs, sqrt

from ..transform import TransformInversionError


cdef enum:
    MAXD = 8

# model ids, keep in sync with the builders in pwsde.models
cdef enum:
    MID_STEP = 1
    MID_CIRCLE = 2
    MID_DIVIDEND = 3
    MID_PRESCRIBED = 4


# ---------------------------------------------------------------------
# profile of the straightening map and its derivatives

cdef inline double ramp(double t, double width) nogil:
    cdef double v = t / width
    cdef double f
    if fabs(v) <= 1.0:
        f = 1.0 - v * v
    else:
        f = 0.0
    return t * fabs(t) * (f * f * f)


cdef inline double ramp_d1(double t, double width) nogil:
    cdef double v = t / width
    cdef double f
    if fabs(v) <= 1.0:
        f = 1.0 - v * v
    else:
        f = 0.0
    return 2.0 * fabs(t) * f * f * (1.0 - 4.0 * v * v)


cdef inline double ramp_d2(double t, double width) nogil:
    cdef double v = t / width
    cdef double f, v2, sign
    if fabs(v) <= 1.0:
        f = 1.0 - v * v
    else:
        f = 0.0
    sign = 1.0 if t >= 0.0 else -1.0
    v2 = v * v
    return 2.0 * sign * f * (1.0 - 17.0 * v2 + 28.0 * v2 * v2)


# ---------------------------------------------------------------------
# dividend helpers; parameter layout (d = state dimension):
#   [0] payout rate, [1] signal noise, [2] last regime drift,
#   [3 : 3+d-1] regime drift offsets,
#   [3+d-1 : 3+2(d-1)] filter drift constants,
#   [.. : ..+(d-1)^2] filter drift matrix, row j column m,
#   [.. : ..+d] unit normal of the threshold plane, [last] plane offset

cdef inline double* div_nhat(double* par, int d) nogil:
    return par + 3 + 2 * (d - 1) + (d - 1) * (d - 1)


cdef inline double div_mix(double* par, double* x, int d) nogil:
    cdef double acc = 0.0
    cdef int j
    for j in range(d - 1):
        acc += par[3 + j] * x[j + 1]
    return acc


cdef inline double div_s(double* par, double* x, int d) nogil:
    """Noise component across the plane (noise column dot unit normal)."""
    cdef double beta = par[1]
    cdef double* nhat = div_nhat(par, d)
    cdef double mix = div_mix(par, x, d)
    cdef double acc = 0.0
    cdef int r
    for r in range(1, d):
        acc += x[r] * (par[3 + r - 1] - mix) * nhat[r]
    return beta * nhat[0] + acc / beta


cdef inline void div_s_grad(double* par, double* x, int d, double* out) nogil:
    cdef double beta = par[1]
    cdef double* nhat = div_nhat(par, d)
    cdef double mix = div_mix(par, x, d)
    cdef double tail = 0.0
    cdef int r
    for r in range(1, d):
        tail += nhat[r] * x[r]
    out[0] = 0.0
    for r in range(1, d):
        out[r] = (nhat[r] * (par[3 + r - 1] - mix) - par[3 + r - 1] * tail) / beta


# ---------------------------------------------------------------------
# surface quantities per model

cdef inline double signed_dist(int mid, double* par, double* x, int d) nogil:
    cdef double acc
    cdef double* nhat
    cdef int i
    if mid == MID_STEP or mid == MID_PRESCRIBED:
        return x[0]
    if mid == MID_CIRCLE:
        return sqrt(x[0] * x[0] + x[1] * x[1]) - 1.0
    nhat = div_nhat(par, d)
    acc = 0.0
    for i in range(d):
        acc += x[i] * nhat[i]
    return acc - par[3 + 2 * (d - 1) + (d - 1) * (d - 1) + d]


cdef inline void project(int mid, double* par, double* x, int d, double sd, double* out) nogil:
    cdef double rho
    cdef double* nhat
    cdef int i
    if mid == MID_STEP or mid == MID_PRESCRIBED:
        for i in range(d):
            out[i] = x[i]
        out[0] = 0.0
        return
    if mid == MID_CIRCLE:
        rho = sqrt(x[0] * x[0] + x[1] * x[1])
        out[0] = x[0] / rho
        out[1] = x[1] / rho
        return
    nhat = div_nhat(par, d)
    for i in range(d):
        out[i] = x[i] - sd * nhat[i]


cdef inline void unit_normal_at(int mid, double* par, double* xi, int d, double* out) nogil:
    cdef double rho
    cdef double* nhat
    cdef int i
    if mid == MID_STEP or mid == MID_PRESCRIBED:
        out[0] = 1.0
        for i in range(1, d):
            out[i] = 0.0
        return
    if mid == MID_CIRCLE:
        rho = sqrt(xi[0] * xi[0] + xi[1] * xi[1])
        out[0] = xi[0] / rho
        out[1] = xi[1] / rho
        return
    nhat = div_nhat(par, d)
    for i in range(d):
        out[i] = nhat[i]


# ---------------------------------------------------------------------
# base coefficients per model

cdef inline void drift_eval(int mid, double* par, double* x, int d, double* out) nogil:
    cdef double sd, mix, acc, v, f, v2, sign, g1, g2
    cdef int m, j
    if mid == MID_STEP:
        out[0] = par[0] if x[0] >= 0.0 else -par[0]
        out[1] = 1.0
        return
    if mid == MID_CIRCLE:
        sd = sqrt(x[0] * x[0] + x[1] * x[1]) - 1.0
        if sd >= 0.0:
            out[0] = 1.0
            out[1] = 1.0
        else:
            out[0] = -x[0]
            out[1] = x[1]
        return
    if mid == MID_DIVIDEND:
        mix = div_mix(par, x, d)
        sd = signed_dist(mid, par, x, d)
        out[0] = par[2] + mix
        if sd >= 0.0:
            out[0] = out[0] - par[0]
        for m in range(d - 1):
            acc = par[3 + (d - 1) + m]
            for j in range(d - 1):
                acc += x[j + 1] * par[3 + 2 * (d - 1) + j * (d - 1) + m]
            out[m + 1] = acc
        return
    # prescribed: drift derived from the fixed straightening map, width par[0]
    v = x[0] / par[0]
    if fabs(v) <= 1.0:
        f = 1.0 - v * v
    else:
        f = 0.0
    sign = 1.0 if x[0] >= 0.0 else -1.0
    v2 = v * v
    g2 = 2.0 * sign * f * (1.0 - 17.0 * v2 + 28.0 * v2 * v2)
    g1 = 2.0 * fabs(x[0]) * f * f * (1.0 - 4.0 * v2)
    acc = 1.0 + g1
    out[0] = -g2 / (2.0 * acc * acc * acc)


cdef inline int noise_column(int mid, double* par, double* x, int d, double* out) nogil:
    """First (only) column of the noise matrix; 0 means identity instead."""
    cdef double scale, mix, v, f, g1
    cdef int r
    if mid == MID_STEP:
        return 0
    if mid == MID_CIRCLE:
        scale = 2.0 / ((1.0 + x[0] * x[0]) + x[1] * x[1])
        out[0] = scale * x[0]
        out[1] = scale * x[1]
        return 1
    if mid == MID_DIVIDEND:
        mix = div_mix(par, x, d)
        out[0] = par[1]
        for r in range(1, d):
            out[r] = x[r] * (par[3 + r - 1] - mix) / par[1]
        return 1
    v = x[0] / par[0]
    if fabs(v) <= 1.0:
        f = 1.0 - v * v
    else:
        f = 0.0
    g1 = 2.0 * fabs(x[0]) * f * f * (1.0 - 4.0 * v * v)
    out[0] = 1.0 / (1.0 + g1)
    return 1


cdef inline void sig_dw(int mid, double* par, double* x, double* dw, int d, double* out) nogil:
    cdef double col[MAXD]
    cdef double w0
    cdef int i
    if noise_column(mid, par, x, d, col):
        w0 = dw[0]
        for i in range(d):
            out[i] = col[i] * w0
    else:
        for i in range(d):
            out[i] = dw[i]


# ---------------------------------------------------------------------
# jump ratio (ambient formulas, evaluated at surface points)

cdef inline void ratio_value(int mid, double* par, double* xi, int d, double* out) nogil:
    cdef double s
    cdef int i
    for i in range(d):
        out[i] = 0.0
    if mid == MID_STEP:
        out[0] = -par[0]
    elif mid == MID_CIRCLE:
        out[0] = -0.5 * (xi[0] + 1.0)
        out[1] = 0.5 * (xi[1] - 1.0)
    elif mid == MID_DIVIDEND:
        s = div_s(par, xi, d)
        out[0] = 0.5 * par[0] / (s * s)
    else:
        out[0] = 1.0


# ---------------------------------------------------------------------
# straightening map: offset, inverse, Jacobian and transformed drift

cdef inline void offset_eval(int mid, double* par, double* x, int d, double width, double* out) nogil:
    cdef double xi[MAXD]
    cdef double av[MAXD]
    cdef double sd, g
    cdef int i
    sd = signed_dist(mid, par, x, d)
    if fabs(sd) >= width:
        for i in range(d):
            out[i] = 0.0
        return
    project(mid, par, x, d, sd, xi)
    ratio_value(mid, par, xi, d, av)
    g = ramp(sd, width)
    for i in range(d):
        out[i] = g * av[i]


cdef inline int invert_point(int mid, double* par, double* y, int d, double width,
                             double tol, int max_iter, double* out) nogil:
    """Fixed-point inversion of one point; returns 0 on failure."""
    cdef double z[MAXD]
    cdef double off[MAXD]
    cdef double znew, step, diff
    cdef int i, it
    for i in range(d):
        z[i] = y[i]
    for it in range(max_iter):
        offset_eval(mid, par, z, d, width, off)
        step = 0.0
        for i in range(d):
            znew = y[i] - off[i]
            diff = fabs(znew - z[i])
            if diff > step:
                step = diff
            z[i] = znew
        if step < tol:
            for i in range(d):
                out[i] = z[i]
            return 1
    return 0


cdef inline void transformed_step_terms(int mid, double* par, double* x, int d,
                                        double width, double* drift_out, double* jac) nogil:
    """Fill mu_tilde(x) and the d x d (row-major) Jacobian of the map at x."""
    cdef double xi[MAXD]
    cdef double av[MAXD]
    cdef double nvec[MAXD]
    cdef double mu[MAXD]
    cdef double col[MAXD]
    cdef double covn[MAXD]
    cdef double comp[MAXD * MAXD]
    cdef double hessv[MAXD]
    cdef double sgrad[MAXD]
    cdef double cperp[MAXD]
    cdef double sd, g0, g1, g2, rho, e0, e1, nn, trh, cn, ce, cnorm2, s, acc, ito
    cdef double ubar, beta, vdotn, w0, w1, sg_cp, nh_cp, tb_cp, hterm, ndc
    cdef double* nhat
    cdef int i, j, k, has_col

    drift_eval(mid, par, x, d, mu)
    sd = signed_dist(mid, par, x, d)

    if fabs(sd) >= width:
        for i in range(d):
            for j in range(d):
                jac[i * d + j] = 1.0 if i == j else 0.0
            drift_out[i] = mu[i]
        return

    has_col = noise_column(mid, par, x, d, col)
    project(mid, par, x, d, sd, xi)
    unit_normal_at(mid, par, xi, d, nvec)
    ratio_value(mid, par, xi, d, av)
    g0 = ramp(sd, width)
    g1 = ramp_d1(sd, width)
    g2 = ramp_d2(sd, width)

    # cov = sigma sigma^T applied to the normal, plus the scalars needed later
    if has_col:
        cn = 0.0
        cnorm2 = 0.0
        for i in range(d):
            cn += col[i] * nvec[i]
            cnorm2 += col[i] * col[i]
        for i in range(d):
            covn[i] = col[i] * cn
    else:
        for i in range(d):
            covn[i] = nvec[i]
    nn = 0.0
    for i in range(d):
        nn += nvec[i] * covn[i]

    # composite ratio Jacobian (ratio jac times projection Jacobian),
    # cov against the distance Hessian, and the curvature/ratio-Hessian
    # part of the second-order term
    for i in range(d):
        hessv[i] = 0.0
        for j in range(d):
            comp[i * d + j] = 0.0
    trh = 0.0

    if mid == MID_CIRCLE:
        rho = sqrt(x[0] * x[0] + x[1] * x[1])
        e0 = x[0] / rho
        e1 = x[1] / rho
        # ratio jac is diag(-1/2, 1/2); projection Jacobian (1/rho)(I - e e^T)
        comp[0] = -0.5 * (1.0 - e0 * e0) / rho
        comp[1] = -0.5 * (-e0 * e1) / rho
        comp[2] = 0.5 * (-e1 * e0) / rho
        comp[3] = 0.5 * (1.0 - e1 * e1) / rho
        ce = col[0] * e0 + col[1] * e1
        trh = (cnorm2 - ce * ce) / rho
        # projection curvature contracted with cov, then hit with ratio jac
        w0 = -(2.0 * ce * col[0] + (cnorm2 - 3.0 * ce * ce) * e0) / (rho * rho)
        w1 = -(2.0 * ce * col[1] + (cnorm2 - 3.0 * ce * ce) * e1) / (rho * rho)
        hessv[0] = -0.5 * w0
        hessv[1] = 0.5 * w1
    elif mid == MID_DIVIDEND:
        ubar = par[0]
        beta = par[1]
        nhat = div_nhat(par, d)
        s = div_s(par, xi, d)
        div_s_grad(par, xi, d, sgrad)
        # ratio jac row 0 is -ubar s^-3 grad s; others vanish
        vdotn = 0.0
        for j in range(d):
            vdotn += sgrad[j] * nhat[j]
        for j in range(d):
            comp[j] = -ubar / (s * s * s) * (sgrad[j] - vdotn * nhat[j])
        # tangential part of the noise column
        ndc = 0.0
        for j in range(d):
            ndc += nhat[j] * col[j]
        for j in range(d):
            cperp[j] = col[j] - ndc * nhat[j]
        sg_cp = 0.0
        nh_cp = 0.0
        tb_cp = 0.0
        for j in range(1, d):
            sg_cp += sgrad[j] * cperp[j]
            nh_cp += nhat[j] * cperp[j]
            tb_cp += par[3 + j - 1] * cperp[j]
        hterm = 3.0 * ubar / (s * s * s * s) * sg_cp * sg_cp
        hterm = hterm - ubar / (s * s * s) * (-(2.0 / beta) * nh_cp * tb_cp)
        hessv[0] = hterm

    # assemble Jacobian, second-order term and transformed drift
    for k in range(d):
        for j in range(d):
            jac[k * d + j] = (1.0 if k == j else 0.0) + g1 * av[k] * nvec[j] + g0 * comp[k * d + j]
    for k in range(d):
        acc = 0.0
        for j in range(d):
            acc += comp[k * d + j] * covn[j]
        ito = 0.5 * (g2 * nn * av[k] + g1 * trh * av[k] + 2.0 * g1 * acc + g0 * hessv[k])
        drift_out[k] = ito
    for k in range(d):
        acc = 0.0
        for j in range(d):
            acc += jac[k * d + j] * mu[j]
        drift_out[k] = acc + drift_out[k]


# ---------------------------------------------------------------------
# public entry points

def em_terminal(int mid, double[::1] par, double[::1] x0, double dt,
                double[:, :, ::1] inc, double[:, ::1] out):
    """Direct scheme over a batch; fills ``out`` with terminal states."""
    cdef Py_ssize_t n = inc.shape[0]
    cdef Py_ssize_t steps = inc.shape[1]
    cdef int d = <int> inc.shape[2]
    cdef double x[MAXD]
    cdef double mu[MAXD]
    cdef double noise[MAXD]
    cdef double* pp = NULL
    cdef Py_ssize_t p, k
    cdef int i
    if d > MAXD:
        raise ValueError("dimension exceeds compiled kernel limit")
    if par.shape[0] > 0:
        pp = &par[0]
    with nogil:
        for p in range(n):
            for i in range(d):
                x[i] = x0[i]
            for k in range(steps):
                drift_eval(mid, pp, x, d, mu)
                sig_dw(mid, pp, x, &inc[p, k, 0], d, noise)
                for i in range(d):
                    x[i] = (x[i] + mu[i] * dt) + noise[i]
            for i in range(d):
                out[p, i] = x[i]


def gm_terminal(int mid, double[::1] par, double[::1] x0, double dt,
                double[:, :, ::1] inc, double width, double tol, int max_iter,
                double[:, ::1] out):
    """Transformed scheme over a batch; fills ``out`` with terminal states
    in the original coordinates."""
    cdef Py_ssize_t n = inc.shape[0]
    cdef Py_ssize_t steps = inc.shape[1]
    cdef int d = <int> inc.shape[2]
    cdef double x[MAXD]
    cdef double z[MAXD]
    cdef double off[MAXD]
    cdef double mu_t[MAXD]
    cdef double sdw[MAXD]
    cdef double noise[MAXD]
    cdef double jac[MAXD * MAXD]
    cdef double* pp = NULL
    cdef Py_ssize_t p, k
    cdef int i, j, ok, fails
    if d > MAXD:
        raise ValueError("dimension exceeds compiled kernel limit")
    if par.shape[0] > 0:
        pp = &par[0]
    fails = 0
    with nogil:
        for p in range(n):
            for i in range(d):
                x[i] = x0[i]
            offset_eval(mid, pp, x, d, width, off)
            for i in range(d):
                z[i] = x[i] + off[i]
            ok = 1
            for k in range(steps):
                transformed_step_terms(mid, pp, x, d, width, mu_t, jac)
                sig_dw(mid, pp, x, &inc[p, k, 0], d, sdw)
                for i in range(d):
                    noise[i] = 0.0
                    for j in range(d):
                        noise[i] += jac[i * d + j] * sdw[j]
                for i in range(d):
                    z[i] = (z[i] + mu_t[i] * dt) + noise[i]
                ok = invert_point(mid, pp, z, d, width, tol, max_iter, x)
                if not ok:
                    fails += 1
                    break
            for i in range(d):
                out[p, i] = x[i]
    if fails:
        raise TransformInversionError(
            f"{fails} paths failed to invert within {max_iter} iterations"
        )
