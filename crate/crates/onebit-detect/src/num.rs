//! Shared numeric kernels: seed derivation, standard-normal CDF/quantile,
//! adaptive Gauss-Kronrod quadrature, and small Cholesky factorizations.
//!
//! Everything here is deterministic, allocation-free (except the tridiagonal
//! factor vectors), and safe to call concurrently.

use alloc::vec::Vec;

use libm::{erfc, exp, fabs, log, sqrt};

/// 1/sqrt(2), used to map the normal CDF onto `erfc`.
pub(crate) const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// sqrt(2*pi).
pub(crate) const SQRT_2_PI: f64 = 2.506_628_274_631_000_7;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a master seed and a stream index.
///
/// This is the SplitMix64 output function evaluated at state
/// `master + (index+1)*gamma`, i.e. a counter-based splittable scheme: the
/// sub-seed for stream `index` does not depend on how many other streams were
/// derived or in which order. Every stochastic operation in this crate that
/// needs several independent random streams derives them through this
/// function, which is what makes parallel Monte-Carlo runs reproducible
/// trial-by-trial.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Standard normal density.
pub(crate) fn norm_pdf(x: f64) -> f64 {
    exp(-0.5 * x * x) / SQRT_2_PI
}

/// Standard normal CDF, `P(Z <= x)`.
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function, `P(Z > x)`.
///
/// Relative accuracy follows `erfc` (a few ulp), well below 1e-12 for
/// |x| <= 8.
pub(crate) fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal quantile, the inverse of [`norm_cdf`].
///
/// Rational initial estimate refined by two Halley steps against the
/// `erfc`-based CDF; relative error is below 1e-14 across (0,1).
pub(crate) fn norm_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    // Work in the lower tail and mirror, so the refinement always evaluates
    // the CDF on its relatively-accurate side.
    if p > 0.5 {
        return -norm_quantile(1.0 - p);
    }
    let mut x = acklam_quantile(p);
    for _ in 0..2 {
        let err = norm_cdf(x) - p;
        let step = err / norm_pdf(x);
        x -= step / (1.0 + 0.5 * step * x);
    }
    x
}

/// Acklam's rational approximation to the normal quantile (~1.15e-9 relative).
fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = sqrt(-2.0 * log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

// Gauss-Kronrod (G7, K15) nodes and weights on [-1, 1]. The Gauss nodes are
// the odd-indexed Kronrod nodes.
const K15_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One (G7, K15) evaluation on [a, b]: returns the Kronrod estimate and the
/// |K15 - G7| error indicator.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kron = K15_WEIGHTS[7] * f(mid);
    let mut gauss = G7_WEIGHTS[3] * f(mid);
    for i in 0..7 {
        let dx = half * K15_NODES[i];
        let pair = f(mid - dx) + f(mid + dx);
        kron += K15_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * pair;
        }
    }
    (kron * half, fabs(kron - gauss) * fabs(half))
}

/// Adaptive quadrature of `f` over [a, b] to absolute tolerance `tol`,
/// by recursive interval bisection with a Gauss-Kronrod error indicator.
pub(crate) fn adaptive_quad<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    // (lo, hi, tol) work stack; 64 entries is far beyond any realistic
    // subdivision depth for the smooth integrands used here.
    let mut stack: Vec<(f64, f64, f64)> = Vec::with_capacity(64);
    stack.push((a, b, tol));
    let mut total = 0.0;
    let mut depth_guard = 0usize;
    while let Some((lo, hi, t)) = stack.pop() {
        depth_guard += 1;
        let (est, err) = gk15(f, lo, hi);
        if err <= t || hi - lo < 1e-12 || depth_guard > 100_000 {
            total += est;
        } else {
            let mid = 0.5 * (lo + hi);
            let ht = 0.5 * t;
            stack.push((lo, mid, ht));
            stack.push((mid, hi, ht));
        }
    }
    total
}

/// In-place Cholesky factorization of the leading `dim`x`dim` block of a
/// symmetric matrix, returning the lower factor, or `None` if the matrix is
/// not positive definite (pivot below `1e-12` times the largest diagonal).
pub(crate) fn cholesky_small(a: &[[f64; 4]; 4], dim: usize) -> Option<[[f64; 4]; 4]> {
    debug_assert!((1..=4).contains(&dim));
    let scale = (0..dim).map(|i| a[i][i]).fold(0.0f64, f64::max);
    let mut l = [[0.0f64; 4]; 4];
    for j in 0..dim {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 1e-12 * scale) {
            return None;
        }
        let dj = sqrt(d);
        l[j][j] = dj;
        for i in (j + 1)..dim {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / dj;
        }
    }
    Some(l)
}

/// Cholesky factors of a symmetric tridiagonal Toeplitz-free matrix with
/// diagonal `diag` and first off-diagonal `off` (lengths n and n-1): returns
/// the bidiagonal lower factor as (diagonal d, sub-diagonal e), or `None`
/// if the matrix is not positive definite.
pub(crate) fn cholesky_tridiag(diag: &[f64], off: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    debug_assert_eq!(off.len(), n.saturating_sub(1));
    let scale = diag.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut d = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n.saturating_sub(1));
    let mut prev = 0.0f64;
    for k in 0..n {
        let mut v = diag[k];
        if k > 0 {
            let ek = off[k - 1] / prev;
            v -= ek * ek;
            e.push(ek);
        }
        if !(v > 1e-12 * scale) {
            return None;
        }
        prev = sqrt(v);
        d.push(prev);
    }
    Some((d, e))
}
