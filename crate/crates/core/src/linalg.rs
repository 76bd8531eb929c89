//! Small dense complex kernels used by the per-frequency Wiener solves.

use num_complex::Complex;

use crate::scalar::Real;

/// Row-major `m × m` complex matrix-vector product.
pub fn cmatvec<T: Real>(a: &[Complex<T>], m: usize, x: &[Complex<T>], out: &mut [Complex<T>]) {
    for (r, o) in out.iter_mut().enumerate().take(m) {
        *o = a[r * m..(r + 1) * m]
            .iter()
            .zip(x)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (&p, &q)| acc + p * q);
    }
}

/// `x^H y`.
pub fn cdot_h<T: Real>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    x.iter()
        .zip(y)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (&p, &q)| acc + p.conj() * q)
}

/// Sum of the diagonal's real parts.
pub fn trace_re<T: Real>(a: &[Complex<T>], m: usize) -> T {
    (0..m).fold(T::zero(), |acc, i| acc + a[i * m + i].re)
}

/// Replaces `a` with `(a + a^H) / 2`.
pub fn hermitize<T: Real>(a: &mut [Complex<T>], m: usize) {
    let half = T::lit(0.5);
    for i in 0..m {
        a[i * m + i].im = T::zero();
        for j in (i + 1)..m {
            let avg = (a[i * m + j] + a[j * m + i].conj()) * half;
            a[i * m + j] = avg;
            a[j * m + i] = avg.conj();
        }
    }
}

/// Largest `|a_ij - conj(a_ji)|`.
pub fn hermitian_defect<T: Real>(a: &[Complex<T>], m: usize) -> T {
    let mut worst = T::zero();
    for i in 0..m {
        for j in 0..m {
            worst = worst.max((a[i * m + j] - a[j * m + i].conj()).norm());
        }
    }
    worst
}

/// Solves `a x = b` for Hermitian positive definite `a` via Cholesky.
///
/// Returns `None` when a pivot falls below a relative tolerance of the
/// largest diagonal entry, i.e. the system is singular to working precision.
pub fn cholesky_solve<T: Real>(
    a: &[Complex<T>],
    m: usize,
    b: &[Complex<T>],
) -> Option<Vec<Complex<T>>> {
    let zero = Complex::new(T::zero(), T::zero());
    let max_diag = (0..m).fold(T::zero(), |acc, i| acc.max(a[i * m + i].re));
    if !(max_diag > T::zero()) || !max_diag.is_finite() {
        return None;
    }
    let tol = max_diag * T::epsilon() * T::count(64 * m);

    // lower factor, row-major
    let mut l = vec![zero; m * m];
    for j in 0..m {
        let mut d = a[j * m + j].re;
        for k in 0..j {
            d = d - l[j * m + k].norm_sqr();
        }
        if !(d > tol) {
            return None;
        }
        let djj = d.sqrt();
        l[j * m + j] = Complex::new(djj, T::zero());
        for i in (j + 1)..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s = s - l[i * m + k] * l[j * m + k].conj();
            }
            l[i * m + j] = s / djj;
        }
    }

    // forward: L y = b
    let mut y = vec![zero; m];
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * m + k] * y[k];
        }
        y[i] = s / l[i * m + i].re;
    }
    // backward: L^H x = y
    let mut x = vec![zero; m];
    for i in (0..m).rev() {
        let mut s = y[i];
        for k in (i + 1)..m {
            s = s - l[k * m + i].conj() * x[k];
        }
        x[i] = s / l[i * m + i].re;
    }
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn solves_small_hermitian_system() {
        // [[2, i], [-i, 3]] x = [1, 0]
        let a = [c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)];
        let b = [c(1.0, 0.0), c(0.0, 0.0)];
        let x = cholesky_solve(&a, 2, &b).unwrap();
        let mut back = [c(0.0, 0.0); 2];
        cmatvec(&a, 2, &x, &mut back);
        for (p, q) in back.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = [c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
        assert!(cholesky_solve(&a, 2, &[c(1.0, 0.0), c(0.0, 0.0)]).is_none());
        assert!(cholesky_solve(&[c(0.0, 0.0)], 1, &[c(1.0, 0.0)]).is_none());
    }

    #[test]
    fn hermitize_removes_defect() {
        let mut a = vec![c(1.0, 0.1), c(2.0, 1.0), c(2.0, -0.5), c(4.0, 0.0)];
        assert!(hermitian_defect(&a, 2) > 0.1);
        hermitize(&mut a, 2);
        assert_eq!(hermitian_defect(&a, 2), 0.0);
    }
}
