//! Small-scale fading generators.

use ndarray::Array2;

use super::linalg::{CMat, C64};
use super::rng::SeededRng;
use crate::error::{dims, invalid, Result};

/// Rayleigh channel: i.i.d. circularly-symmetric complex Gaussian entries with
/// per-entry mean power `gain`.
pub fn rayleigh_channel(rng: &mut SeededRng, rows: usize, cols: usize, gain: f64) -> Result<CMat> {
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("channel dims must be positive, got {rows}x{cols}")));
    }
    if !(gain >= 0.0) || !gain.is_finite() {
        return Err(invalid(format!("channel gain must be non-negative and finite, got {gain}")));
    }
    let scale = (gain / 2.0).sqrt();
    Ok(Array2::from_shape_simple_fn((rows, cols), || {
        C64::new(scale * rng.normal(), scale * rng.normal())
    }))
}

/// Rician channel `sqrt(gain) * (sqrt(K/(K+1)) * LOS + sqrt(1/(K+1)) * NLOS)`
/// with unit-power Rayleigh NLOS part. `k_factor = inf` returns the pure
/// line-of-sight matrix.
pub fn rician_channel(rng: &mut SeededRng, rows: usize, cols: usize, gain: f64, k_factor: f64, los: &CMat) -> Result<CMat> {
    if los.dim() != (rows, cols) {
        return Err(dims(format!("{rows}x{cols}"), format!("{:?}", los.dim())));
    }
    if !(k_factor >= 0.0) {
        return Err(invalid(format!("rician K-factor must be >= 0, got {k_factor}")));
    }
    let nlos = rayleigh_channel(rng, rows, cols, 1.0)?;
    let (w_los, w_nlos) = if k_factor.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k_factor / (k_factor + 1.0)).sqrt(), (1.0 / (k_factor + 1.0)).sqrt())
    };
    let amp = gain.sqrt();
    Ok(ndarray::Zip::from(los)
        .and(&nlos)
        .map_collect(|l, n| (l * w_los + n * w_nlos) * amp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::ula_steering;

    fn mean_power(m: &CMat) -> f64 {
        m.iter().map(|z| z.norm_sqr()).sum::<f64>() / m.len() as f64
    }

    #[test]
    fn zero_gain_is_zero() {
        let mut rng = SeededRng::new(1);
        let h = rayleigh_channel(&mut rng, 3, 4, 0.0).unwrap();
        assert!(h.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn rayleigh_power_monte_carlo() {
        let mut rng = SeededRng::new(11);
        let h = rayleigh_channel(&mut rng, 1000, 100, 1.0).unwrap();
        // standard error of |h|^2 for unit exponential is 1/sqrt(n) = 0.0032
        assert!((mean_power(&h) - 1.0).abs() < 0.02);
    }

    #[test]
    fn rayleigh_deterministic() {
        let a = rayleigh_channel(&mut SeededRng::new(5), 4, 4, 2.0).unwrap();
        let b = rayleigh_channel(&mut SeededRng::new(5), 4, 4, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rician_power_monte_carlo() {
        let mut rng = SeededRng::new(12);
        let los = Array2::from_shape_fn((1000, 100), |(i, j)| C64::from_polar(1.0, 0.1 * i as f64 + 0.7 * j as f64));
        let h = rician_channel(&mut rng, 1000, 100, 1.0, 3.0, &los).unwrap();
        assert!((mean_power(&h) - 1.0).abs() < 0.02);
    }

    #[test]
    fn rician_limits() {
        let a = ula_steering(4, 0.3);
        let los = Array2::from_shape_fn((4, 1), |(i, _)| a[i]);
        let h = rician_channel(&mut SeededRng::new(2), 4, 1, 4.0, f64::INFINITY, &los).unwrap();
        for (x, l) in h.iter().zip(los.iter()) {
            assert!((x - l * 2.0).norm() < 1e-12);
        }
        let h = rician_channel(&mut SeededRng::new(2), 4, 1, 4.0, 1e12, &los).unwrap();
        for (x, l) in h.iter().zip(los.iter()) {
            assert!((x - l * 2.0).norm() < 1e-4);
        }
    }

    #[test]
    fn rician_k0_matches_rayleigh_statistics() {
        let los = Array2::from_elem((500, 100), C64::new(1.0, 0.0));
        let h = rician_channel(&mut SeededRng::new(8), 500, 100, 1.0, 0.0, &los).unwrap();
        let mean: C64 = h.iter().sum::<C64>() / h.len() as f64;
        assert!(mean.norm() < 0.02);
        assert!((mean_power(&h) - 1.0).abs() < 0.03);
    }

    #[test]
    fn rician_dim_mismatch() {
        let los = Array2::from_elem((2, 2), C64::new(1.0, 0.0));
        assert!(rician_channel(&mut SeededRng::new(0), 3, 2, 1.0, 3.0, &los).is_err());
    }
}
