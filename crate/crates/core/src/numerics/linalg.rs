//! The handful of small dense complex operations the system model needs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{dims, Result};

pub type C64 = Complex64;
/// Dense complex vector (channel vectors, beams).
pub type CVec = Array1<C64>;
/// Dense complex matrix, row-major `rows x cols`.
pub type CMat = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);

/// `sum_i |v_i|^2`
pub fn norm_sq(v: ArrayView1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Squared Frobenius norm.
pub fn frob_norm_sq(m: ArrayView2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Conjugate transpose.
pub fn hermitian(m: ArrayView2<C64>) -> CMat {
    m.t().mapv(|z| z.conj())
}

/// `a^T b` without conjugation.
pub fn dot_t(a: ArrayView1<C64>, b: ArrayView1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `diag(d) * m`: scales row `i` of `m` by `d[i]`.
pub fn diag_scale_rows(d: ArrayView1<C64>, m: ArrayView2<C64>) -> Result<CMat> {
    if d.len() != m.nrows() {
        return Err(dims(format!("{} rows", d.len()), format!("{} rows", m.nrows())));
    }
    let mut out = m.to_owned();
    for (mut row, s) in out.rows_mut().into_iter().zip(d.iter()) {
        row.mapv_inplace(|z| z * s);
    }
    Ok(out)
}

/// `m * v`
pub fn matvec(m: ArrayView2<C64>, v: ArrayView1<C64>) -> Result<CVec> {
    if m.ncols() != v.len() {
        return Err(dims(format!("{} entries", m.ncols()), format!("{} entries", v.len())));
    }
    Ok(m.dot(&v))
}

/// `v^T m` as a vector.
pub fn vecmat_t(v: ArrayView1<C64>, m: ArrayView2<C64>) -> Result<CVec> {
    if m.nrows() != v.len() {
        return Err(dims(format!("{} entries", m.nrows()), format!("{} entries", v.len())));
    }
    Ok(m.t().dot(&v))
}

/// Half-wavelength uniform-linear-array response for direction cosine
/// `cos_angle`: entry `n` is `exp(j * pi * n * cos_angle)`.
pub fn ula_steering(n: usize, cos_angle: f64) -> CVec {
    Array1::from_iter((0..n).map(|i| C64::from_polar(1.0, std::f64::consts::PI * i as f64 * cos_angle)))
}

pub fn all_finite(m: ArrayView2<C64>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hermitian_norms() {
        let m = array![[C64::new(1.0, 2.0), C64::new(0.0, -1.0)], [C64::new(3.0, 0.0), ZERO]];
        let h = hermitian(m.view());
        assert_eq!(h[[0, 1]], C64::new(3.0, 0.0));
        assert_eq!(h[[1, 0]], C64::new(0.0, 1.0));
        assert!((frob_norm_sq(m.view()) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn diag_scaling() {
        let m = array![[C64::new(1.0, 0.0)], [C64::new(2.0, 0.0)]];
        let d = array![C64::new(0.0, 1.0), C64::new(2.0, 0.0)];
        let out = diag_scale_rows(d.view(), m.view()).unwrap();
        assert_eq!(out[[0, 0]], C64::new(0.0, 1.0));
        assert_eq!(out[[1, 0]], C64::new(4.0, 0.0));
        assert!(diag_scale_rows(array![ZERO].view(), m.view()).is_err());
    }

    #[test]
    fn steering_unit_modulus() {
        let a = ula_steering(8, 0.37);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }
}
