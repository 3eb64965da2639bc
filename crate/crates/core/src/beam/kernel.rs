//! Closed-form influence functions for a single simply supported span.
//!
//! The rotation at a station `r` caused by a point load `P` at `z` is the
//! mutual-work integral of the unit-couple moment field `m_r(s)` and the load
//! moment `M(s; z)` weighted by the compliance `v(s) = 1/EI(s)`.
//! Rotations follow `θ = dw/dx` with deflection positive in the load direction.
//!
//! Stations may sit on the supports (`r = 0` or `r = L`): these are the
//! one-sided limits of interior stations and give the support rotations.

use crate::error::{Error, Result};

fn check_span(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("span length must be positive, got {l}")))
    }
}

fn check_coord(name: &str, x: f64, l: f64) -> Result<()> {
    if (0.0..=l).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {x} lies outside [0, {l}]")))
    }
}

/// Heaviside step with `H(0) = 1`.
#[inline]
pub(crate) fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Bending moment at `s` due to a unit couple at station `r`:
/// `m_r(s) = -s/L + H(s - r)`.
pub fn moment_influence(span: f64, r: f64, s: f64) -> Result<f64> {
    check_span(span)?;
    check_coord("sensor position", r, span)?;
    check_coord("coordinate", s, span)?;
    Ok(-s / span + heaviside(s - r))
}

/// Bending moment at `s` due to a point load `p` at `z`.
pub fn load_moment(span: f64, z: f64, p: f64, s: f64) -> Result<f64> {
    check_span(span)?;
    check_coord("load position", z, span)?;
    check_coord("coordinate", s, span)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("load magnitude must be positive, got {p}")));
    }
    Ok(load_moment_unchecked(span, z, p, s))
}

#[inline]
pub(crate) fn load_moment_unchecked(span: f64, z: f64, p: f64, s: f64) -> f64 {
    if s < z {
        p * (span - z) / span * s
    } else {
        p * z * (1.0 - s / span)
    }
}

/// Rotation kernel `K(r, z; s) = m_r(s) M(s; z)`.
pub fn kernel(span: f64, r: f64, z: f64, p: f64, s: f64) -> Result<f64> {
    Ok(moment_influence(span, r, s)? * load_moment(span, z, p, s)?)
}

/// Rotation at `r` for a load `p` at `z` on a span with uniform compliance `v`.
///
/// This is the exact integral of [`kernel`] written in closed form; it does
/// not share code with the element integration and serves as its oracle.
pub fn rotation_uniform_ss(span: f64, r: f64, z: f64, p: f64, v: f64) -> Result<f64> {
    check_span(span)?;
    check_coord("sensor position", r, span)?;
    check_coord("load position", z, span)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("load magnitude must be positive, got {p}")));
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("compliance must be positive, got {v}")));
    }
    let l = span;
    let theta = if r <= z {
        let b = l - z;
        p * b * (l * l - b * b - 3.0 * r * r) / (6.0 * l)
    } else {
        let a = l - r;
        -p * z * (l * l - z * z - 3.0 * a * a) / (6.0 * l)
    };
    Ok(theta * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moment_influence_examples() {
        assert!((moment_influence(1.0, 0.25, 0.10).unwrap() + 0.10).abs() < 1e-15);
        assert!((moment_influence(1.0, 0.25, 0.50).unwrap() - 0.50).abs() < 1e-15);
        assert_eq!(moment_influence(1.0, 0.25, 0.0).unwrap(), 0.0);
        assert_eq!(moment_influence(1.0, 0.25, 1.0).unwrap(), 0.0);
        // right-continuous at the station
        assert_eq!(moment_influence(1.0, 0.25, 0.25).unwrap(), 0.75);
    }

    #[test]
    fn moment_influence_domain() {
        assert!(matches!(moment_influence(1.0, 0.25, 1.5), Err(Error::Domain(_))));
        assert!(matches!(moment_influence(1.0, -0.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(moment_influence(0.0, 0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn load_moment_examples() {
        assert!((load_moment(1.0, 0.5, 1.0, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((load_moment(1.0, 0.5, 1.0, 0.25).unwrap() - 0.125).abs() < 1e-15);
        for z in [0.0, 0.3, 1.0] {
            assert_eq!(load_moment(1.0, z, 1.0, 0.0).unwrap(), 0.0);
            assert!(load_moment(1.0, z, 1.0, 1.0).unwrap().abs() < 1e-16);
        }
        assert!(load_moment(1.0, 0.5, 0.0, 0.5).is_err());
    }

    #[test]
    fn kernel_examples() {
        assert!((kernel(1.0, 0.25, 0.5, 1.0, 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(kernel(1.0, 0.25, 0.5, 1.0, 0.0).unwrap(), 0.0);
        assert!(kernel(1.0, 0.25, 0.5, 1.0, 1.0).unwrap().abs() < 1e-16);
        let k = kernel(1.0, 0.4, 0.4, 1.0, 0.4).unwrap();
        assert!(k.is_finite());
    }

    #[test]
    fn support_rotation_is_one_sixteenth() {
        // PL²v/16 for a midspan load
        let t = rotation_uniform_ss(1.0, 0.0, 0.5, 1.0, 1.0).unwrap();
        assert!((t - 1.0 / 16.0).abs() < 1e-15);
        let t = rotation_uniform_ss(12.0, 0.0, 6.0, 3.0, 2.0).unwrap();
        assert!((t - 3.0 * 144.0 * 2.0 / 16.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mirror_antisymmetry(r in 0.0f64..1.0, z in 0.0f64..1.0, l in 0.5f64..30.0) {
            let (r, z) = (r * l, z * l);
            let a = rotation_uniform_ss(l, r, z, 1.0, 1.0).unwrap();
            let b = rotation_uniform_ss(l, l - r, l - z, 1.0, 1.0).unwrap();
            prop_assert!((a + b).abs() <= 1e-12 * l * l);
        }

        #[test]
        fn linear_in_load_and_compliance(r in 0.01f64..0.99, z in 0.0f64..1.0) {
            let base = rotation_uniform_ss(1.0, r, z, 1.0, 1.0).unwrap();
            prop_assert_eq!(rotation_uniform_ss(1.0, r, z, 2.0, 1.0).unwrap(), 2.0 * base);
            prop_assert_eq!(rotation_uniform_ss(1.0, r, z, 1.0, 2.0).unwrap(), 2.0 * base);
        }

        #[test]
        fn kernel_antisymmetry(r in 0.01f64..0.99, z in 0.0f64..1.0, s in 0.0f64..1.0) {
            prop_assume!((s - r).abs() > 1e-9);
            let a = kernel(1.0, r, z, 1.0, s).unwrap();
            let b = kernel(1.0, 1.0 - r, 1.0 - z, 1.0, 1.0 - s).unwrap();
            prop_assert!((a + b).abs() < 1e-14);
        }
    }
}
