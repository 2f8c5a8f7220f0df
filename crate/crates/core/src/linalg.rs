//! Small dense linear-algebra helpers shared by the moment, head-fitting
//! and lifting code.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used by every pseudoinverse in the crate.
pub const PINV_RTOL: f64 = 1e-10;

/// Moore–Penrose pseudoinverse with singular values below
/// `rtol * sigma_max` treated as zero.
pub fn pinv(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = &svd.singular_values;
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rtol * smax;
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &sk) in s.iter().enumerate() {
        if sk > cutoff && sk > 0.0 {
            let vk = v_t.row(k).transpose();
            let uk = u.column(k);
            out += (vk * uk.transpose()) / sk;
        }
    }
    out
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    pinv(a, PINV_RTOL) * b
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Upper-triangular factor `R` of a thin QR of `a` (shape `min(r, c) x c`).
pub fn r_factor(a: DMatrix<f64>) -> DMatrix<f64> {
    a.qr().r()
}

/// All exponent vectors over `vars` variables with total degree `<= degree`,
/// ordered by degree then lexicographically (graded order).
pub fn monomial_exponents(vars: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for d in 0..=degree {
        let mut cur = vec![0; vars];
        push_exact(&mut out, &mut cur, 0, d);
    }
    out
}

fn push_exact(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, remaining: usize) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == cur.len() - 1 {
        cur[pos] = remaining;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        push_exact(out, cur, pos + 1, remaining - e);
    }
    cur[pos] = 0;
}

pub fn eval_monomial(x: &[f64], exps: &[usize]) -> f64 {
    x.iter()
        .zip(exps)
        .map(|(v, &e)| v.powi(e as i32))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = pinv(&a, PINV_RTOL);
        let id = &a * &p;
        assert!(max_abs(&(id - DMatrix::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn pinv_truncates_collinear_columns() {
        // two identical columns: min-norm solution splits the weight evenly
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let x = min_norm_solve(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let a = DMatrix::<f64>::zeros(3, 2);
        assert_eq!(pinv(&a, PINV_RTOL), DMatrix::zeros(2, 3));
    }

    #[test]
    fn monomial_counts() {
        // C(k + d, d)
        assert_eq!(monomial_exponents(1, 4).len(), 5);
        assert_eq!(monomial_exponents(2, 4).len(), 15);
        assert_eq!(monomial_exponents(3, 2).len(), 10);
        assert_eq!(monomial_exponents(0, 3).len(), 1);
        assert_eq!(monomial_exponents(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }
}
