//! Dense row-major kernels used by the cells and heads.

use super::Scalar;

/// `out += W x` for a `rows x cols` matrix.
#[inline]
pub fn gemv_acc<F: Scalar>(out: &mut [F], w: &[F], cols: usize, x: &[F]) {
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ g` for a `rows x cols` matrix.
#[inline]
pub fn gemv_t_acc<F: Scalar>(out: &mut [F], w: &[F], cols: usize, g: &[F]) {
    for (&gi, row) in g.iter().zip(w.chunks_exact(cols)) {
        if gi != F::zero() {
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += gi * wij;
            }
        }
    }
}

/// `gw += g xᵀ`.
#[inline]
pub fn outer_acc<F: Scalar>(gw: &mut [F], cols: usize, g: &[F], x: &[F]) {
    for (&gi, row) in g.iter().zip(gw.chunks_exact_mut(cols)) {
        if gi != F::zero() {
            for (o, &xj) in row.iter_mut().zip(x) {
                *o += gi * xj;
            }
        }
    }
}

#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn add_acc<F: Scalar>(out: &mut [F], x: &[F]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += v;
    }
}

#[inline]
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp_m())
    } else {
        let e = x.exp_m();
        e / (F::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp_m().ln_1p_m()
    } else {
        x.exp_m().ln_1p_m()
    }
}
