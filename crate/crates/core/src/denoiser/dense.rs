//! Row-major dense-layer helpers over flat parameter slices.

use crate::scalar::Real;

/// `out = W x + b`, `W` is `rows × cols`.
pub(crate) fn affine<T: Real>(w: &[T], b: &[T], x: &[T], out: &mut [T]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = b[r] + row.iter().zip(x).map(|(&a, &c)| a * c).sum::<T>();
    }
}

pub(crate) fn tanh_in_place<T: Real>(xs: &mut [T]) {
    xs.iter_mut().for_each(|x| *x = x.tanh());
}

/// Backward through `y = tanh(W x + b)` given `dy`.
/// Accumulates into `dw`, `db`, and (when given) `dx`.
pub(crate) fn tanh_affine_backward<T: Real>(
    w: &[T],
    x: &[T],
    y: &[T],
    dy: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let pre: Vec<T> = y.iter().zip(dy).map(|(&yi, &g)| g * (T::one() - yi * yi)).collect();
    affine_backward(w, x, &pre, dw, db, dx);
}

/// Backward through `y = W x + b` given `dy`.
pub(crate) fn affine_backward<T: Real>(
    w: &[T],
    x: &[T],
    dy: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let cols = x.len();
    for (r, &g) in dy.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        db[r] = db[r] + g;
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (d, &xi) in row.iter_mut().zip(x) {
            *d = *d + g * xi;
        }
    }
    if let Some(dx) = dx {
        for (r, &g) in dy.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            let row = &w[r * cols..(r + 1) * cols];
            for (d, &wi) in dx.iter_mut().zip(row) {
                *d = *d + g * wi;
            }
        }
    }
}

/// Glorot-uniform fill.
pub(crate) fn glorot<T: Real, R: rand::Rng + ?Sized>(w: &mut [T], fan_in: usize, fan_out: usize, rng: &mut R) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for x in w.iter_mut() {
        *x = T::lit(a) * (T::lit(2.0) * T::unit_uniform(rng) - T::one());
    }
}
