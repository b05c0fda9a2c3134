//! Row-parallel dense kernels.
//!
//! Every kernel writes each output row from a fixed sequential loop, so the
//! `parallel` and sequential builds produce bit-identical results. The
//! `*_seq` / `*_par` pairs are public so benchmarks can compare them inside a
//! single binary; everything else goes through the dispatching entry points.

use crate::tensor::Matrix;

/// Runs `f(row_index, row)` over every `cols`-wide row of `out`.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_row<F>(out: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    if cols == 0 {
        return;
    }
    out.par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row<F>(out: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    for_each_row_seq(out, cols, f);
}

pub(crate) fn for_each_row_seq<F>(out: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    if cols == 0 {
        return;
    }
    out.chunks_mut(cols).enumerate().for_each(|(i, row)| f(i, row));
}

/// Maps `f` over `items`, preserving order. Parallel when the feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[inline]
fn matmul_row(a: &Matrix, b: &Matrix, i: usize, row: &mut [f64]) {
    row.fill(0.0);
    for (k, &aik) in a.row(i).iter().enumerate() {
        if aik == 0.0 {
            continue;
        }
        for (o, &bkj) in row.iter_mut().zip(b.row(k)) {
            *o += aik * bkj;
        }
    }
}

#[inline]
fn matmul_nt_row(a: &Matrix, b: &Matrix, i: usize, row: &mut [f64]) {
    let ai = a.row(i);
    for (j, o) in row.iter_mut().enumerate() {
        *o = ai.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
    }
}

#[inline]
fn matmul_tn_row(a: &Matrix, b: &Matrix, k: usize, row: &mut [f64]) {
    row.fill(0.0);
    for i in 0..a.rows() {
        let aik = a.get(i, k);
        if aik == 0.0 {
            continue;
        }
        for (o, &bij) in row.iter_mut().zip(b.row(i)) {
            *o += aik * bij;
        }
    }
}

/// `A·B`, sequential.
pub fn matmul_seq(a: &Matrix, b: &Matrix) -> Matrix {
    debug_assert_eq!(a.cols(), b.rows());
    let mut out = Matrix::zeros(a.rows(), b.cols());
    let cols = out.cols();
    for_each_row_seq(out.as_mut_slice(), cols, |i, row| matmul_row(a, b, i, row));
    out
}

/// `A·B`, one rayon task per output row.
#[cfg(feature = "parallel")]
pub fn matmul_par(a: &Matrix, b: &Matrix) -> Matrix {
    debug_assert_eq!(a.cols(), b.rows());
    let mut out = Matrix::zeros(a.rows(), b.cols());
    let cols = out.cols();
    for_each_row(out.as_mut_slice(), cols, |i, row| matmul_row(a, b, i, row));
    out
}

/// `A·B`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    #[cfg(feature = "parallel")]
    {
        matmul_par(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        matmul_seq(a, b)
    }
}

/// `A·Bᵀ`.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Matrix {
    debug_assert_eq!(a.cols(), b.cols());
    let mut out = Matrix::zeros(a.rows(), b.rows());
    let cols = out.cols();
    for_each_row(out.as_mut_slice(), cols, |i, row| matmul_nt_row(a, b, i, row));
    out
}

/// `Aᵀ·B`.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Matrix {
    debug_assert_eq!(a.rows(), b.rows());
    let mut out = Matrix::zeros(a.cols(), b.cols());
    let cols = out.cols();
    for_each_row(out.as_mut_slice(), cols, |k, row| matmul_tn_row(a, b, k, row));
    out
}

/// Correctly rounded sum of a sequence of finite floats.
///
/// Keeps a list of non-overlapping partials (Shewchuk's algorithm), so the
/// result is independent of the order in which terms are added. Graph
/// aggregation relies on this for exact permutation equivariance.
#[derive(Debug, Default, Clone)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.partials.clear();
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even correction when the remaining partials push past a tie.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn transposed_variants_agree_with_explicit_transpose() {
        let a = Matrix::from_rows(&[[1.0, -2.0, 0.5], [3.0, 0.0, 4.0]]);
        let b = Matrix::from_rows(&[[2.0, 1.0, -1.0], [0.25, 3.0, 2.0]]);
        assert!(matmul_nt(&a, &b).max_abs_diff(&naive(&a, &b.transpose())) < 1e-14);
        assert!(matmul_tn(&a, &b).max_abs_diff(&naive(&a.transpose(), &b)) < 1e-14);
    }

    #[test]
    fn exact_sum_beats_naive_cancellation() {
        let mut s = ExactSum::new();
        for x in [1e100, 1.0, -1e100, 1e-3] {
            s.add(x);
        }
        assert_eq!(s.value(), 1.0 + 1e-3);
        assert_eq!(ExactSum::new().value(), 0.0);
    }

    proptest! {
        #[test]
        fn seq_and_dispatch_are_bit_identical(
            data in proptest::collection::vec(-10.0f64..10.0, 24),
        ) {
            let a = Matrix::from_vec(4, 6, data[..24].to_vec()).unwrap();
            let b = Matrix::from_vec(6, 4, data.iter().rev().copied().collect()).unwrap();
            prop_assert_eq!(matmul_seq(&a, &b), matmul(&a, &b));
        }

        #[test]
        fn exact_sum_is_order_independent(
            mut xs in proptest::collection::vec(-1e6f64..1e6, 0..20),
        ) {
            let mut fwd = ExactSum::new();
            xs.iter().for_each(|&x| fwd.add(x));
            xs.reverse();
            let mut rev = ExactSum::new();
            xs.iter().for_each(|&x| rev.add(x));
            prop_assert_eq!(fwd.value().to_bits(), rev.value().to_bits());
        }
    }
}
