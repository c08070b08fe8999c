use crate::error::{invalid, Result};

/// Large-scale channel power gain (linear) at distance `d`.
///
/// The gain in dB is `-pl0_db - 10 * exponent * log10(d / d0)`, so `pl0_db`
/// is the loss at the reference distance `d0`.
pub fn path_gain(d: f64, exponent: f64, pl0_db: f64, d0: f64) -> Result<f64> {
    if !(d0 > 0.0) || !d.is_finite() || !exponent.is_finite() || !pl0_db.is_finite() {
        return Err(invalid(format!(
            "path_gain: invalid arguments d={d}, exponent={exponent}, pl0_db={pl0_db}, d0={d0}"
        )));
    }
    if d < d0 {
        return Err(invalid(format!("path_gain: distance {d} m is below the reference distance {d0} m")));
    }
    let gain_db = -pl0_db - 10.0 * exponent * (d / d0).log10();
    Ok(10f64.powf(gain_db / 10.0))
}

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_distance() {
        for exp in [2.0, 2.2, 3.75] {
            let g = path_gain(1.0, exp, 30.0, 1.0).unwrap();
            assert!((g - 1e-3).abs() < 1e-18);
        }
    }

    #[test]
    fn hundred_meters() {
        let g = path_gain(100.0, 2.2, 30.0, 1.0).unwrap();
        let expected = 10f64.powf(-7.4);
        assert!((g / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decade_scaling() {
        let near = path_gain(10.0, 3.75, 30.0, 1.0).unwrap();
        let far = path_gain(100.0, 3.75, 30.0, 1.0).unwrap();
        assert!((near / far / 10f64.powf(3.75) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_distance() {
        assert!(path_gain(0.5, 2.0, 30.0, 1.0).is_err());
        assert!(path_gain(1.0, 2.0, 30.0, 0.0).is_err());
    }

    #[test]
    fn dbm() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-24);
    }
}
