//! The piecewise-linear path family `chi_k` and its rescaling `phi_k`.

use crate::{FkError, Result};

fn chi_even(k: usize, t: f64, i: usize) -> f64 {
    let kf = k as f64;
    let half = k / 2;
    if i == 0 {
        t.min(1.0)
    } else if i < half {
        let a = i as f64;
        if t <= a + 0.5 {
            0.0
        } else if t <= a + 1.0 {
            2.0 * t - 1.0 - 2.0 * a
        } else {
            1.0
        }
    } else if t <= (kf + 1.0) / 2.0 {
        0.0
    } else {
        // past (k + 5) / 2 only reached through the odd extension
        (1.0 - 0.5 * ((kf + 5.0) / 2.0 - t)).min(1.0)
    }
}

/// `chi_k(t, i)` for `k >= 2`, `0 <= t <= (k + 5) / 2`; k-periodic and even in `i`.
pub fn chi_path(k: usize, t: f64, i: i64) -> Result<f64> {
    if k < 2 {
        return Err(FkError::InvalidArgument(format!("chi path needs k >= 2, got {k}")));
    }
    let t_end = (k as f64 + 5.0) / 2.0;
    if !(-1e-12..=t_end + 1e-12).contains(&t) {
        return Err(FkError::InvalidArgument(format!("t = {t} outside [0, {t_end}]")));
    }
    let t = t.clamp(0.0, t_end);
    let r = i.rem_euclid(k as i64) as usize;
    Ok(if k.is_multiple_of(2) {
        let j = if r > k / 2 { k - r } else { r };
        chi_even(k, t, j)
    } else {
        let h = (k - 1) / 2;
        let j = if r > h { k - r } else { r };
        chi_even(k - 1, t, j)
    })
}

/// `phi_k(theta, i) = chi_k(theta (k + 5) / 2, i)` for `theta in [0, 1]`.
pub fn phi_path(k: usize, theta: f64, i: i64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&theta) {
        return Err(FkError::InvalidArgument(format!("theta = {theta} outside [0, 1]")));
    }
    chi_path(k, theta.clamp(0.0, 1.0) * (k as f64 + 5.0) / 2.0, i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(chi_path(4, 0.5, 0).unwrap(), 0.5);
        assert_eq!(chi_path(4, 1.0, 1).unwrap(), 0.0);
        assert_eq!(chi_path(4, 4.5, 2).unwrap(), 1.0);
        assert_eq!(phi_path(4, 2.0 / 9.0, 0).unwrap(), 1.0);
        assert!(chi_path(1, 0.0, 0).is_err());
        assert!(chi_path(4, 5.0, 0).is_err());
    }

    #[test]
    fn endpoints_and_symmetry() {
        for k in 2..12 {
            for i in -15..15 {
                assert_eq!(phi_path(k, 0.0, i).unwrap(), 0.0);
                assert_eq!(phi_path(k, 1.0, i).unwrap(), 1.0);
                for th in [0.1, 0.37, 0.8] {
                    let a = phi_path(k, th, i).unwrap();
                    assert_eq!(a, phi_path(k, th, -i).unwrap());
                    assert_eq!(a, phi_path(k, th, i + k as i64).unwrap());
                }
            }
        }
    }
}
