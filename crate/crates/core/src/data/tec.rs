use std::f64::consts::TAU;

use super::{DataError, Result};

/// Quadrature encoding of hour of day and day of year:
/// `[sin hour, cos hour, sin day, cos day]` with periods 24 and 365.
pub fn tec_features(hour: f64, day: f64) -> Result<[f64; 4]> {
    if !(0.0..24.0).contains(&hour) {
        return Err(DataError::InvalidInput(format!(
            "hour must lie in [0, 24), got {hour}"
        )));
    }
    if !(1.0..=365.0).contains(&day) {
        return Err(DataError::InvalidInput(format!(
            "day must lie in [1, 365], got {day}"
        )));
    }
    let h = TAU * hour / 24.0;
    let d = TAU * day / 365.0;
    Ok([h.sin(), h.cos(), d.sin(), d.cos()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hour_quadrature() {
        let f = tec_features(0.0, 1.0).unwrap();
        assert_eq!((f[0], f[1]), (0.0, 1.0));
        let f = tec_features(6.0, 1.0).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-12 && f[1].abs() < 1e-12);
    }

    #[test]
    fn year_boundary_is_continuous() {
        let end = tec_features(12.0, 365.0).unwrap();
        let start = tec_features(12.0, 1.0).unwrap();
        // day 365 sits exactly on the cycle start; day 1 is one step away
        assert!((end[3] - 1.0).abs() < 1e-12 && end[2].abs() < 1e-12);
        let step = TAU / 365.0;
        assert!(((end[2] - start[2]).powi(2) + (end[3] - start[3]).powi(2)).sqrt() <= step);
    }

    #[test]
    fn out_of_range() {
        assert!(tec_features(24.0, 10.0).is_err());
        assert!(tec_features(-0.5, 10.0).is_err());
        assert!(tec_features(3.0, 0.0).is_err());
        assert!(tec_features(3.0, 366.0).is_err());
        assert!(tec_features(f64::NAN, 10.0).is_err());
    }
}
