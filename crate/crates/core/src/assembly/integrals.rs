use crate::error::{Error, Result};

/// Exact integral of the rotation kernel `m_r(s) M(s; z)` over `[a, b]`.
///
/// The element is split at `s = r` and `s = z` when they fall inside it; on
/// each piece the integrand is a single quadratic, so Simpson's rule is exact.
/// The branch of each piecewise-affine factor is chosen from the piece
/// midpoint, which keeps the jump of `m_r` at the station out of the rule.
pub fn element_integral(span: f64, r: f64, z: f64, p: f64, a: f64, b: f64) -> Result<f64> {
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::domain(format!("span length must be positive, got {span}")));
    }
    for (name, x) in [("sensor position", r), ("load position", z), ("element start", a), ("element end", b)] {
        if !(0.0..=span).contains(&x) {
            return Err(Error::domain(format!("{name} = {x} lies outside [0, {span}]")));
        }
    }
    if b < a {
        return Err(Error::domain(format!("element end {b} precedes start {a}")));
    }
    Ok(element_integral_unchecked(span, r, z, p, a, b))
}

pub(crate) fn element_integral_unchecked(span: f64, r: f64, z: f64, p: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts = [a, b, b, b];
    let mut n = 1;
    for x in [r, z] {
        if x > a && x < b {
            cuts[n] = x;
            n += 1;
        }
    }
    cuts[n] = b;
    cuts[..=n].sort_by(f64::total_cmp);

    let mut total = 0.0;
    for w in cuts[..=n].windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let jump = if mid >= r { 1.0 } else { 0.0 };
        let left_of_load = mid < z;
        let f = |s: f64| {
            let m = -s / span + jump;
            let big_m = if left_of_load {
                p * (span - z) / span * s
            } else {
                p * z * (1.0 - s / span)
            };
            m * big_m
        };
        total += (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_span_support_rotation() {
        let v = element_integral(1.0, 0.0, 0.5, 1.0, 0.0, 1.0).unwrap();
        assert!((v - 1.0 / 16.0).abs() < 1e-16);
    }

    #[test]
    fn zero_width_element() {
        assert_eq!(element_integral(1.0, 0.3, 0.6, 1.0, 0.4, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn splitting_at_existing_boundary_is_idempotent() {
        // r and z on element boundaries: both halves add up to the whole
        let whole = element_integral(2.0, 0.5, 1.5, 1.0, 0.0, 2.0).unwrap();
        let parts: f64 = [(0.0, 0.5), (0.5, 1.5), (1.5, 2.0)]
            .iter()
            .map(|&(a, b)| element_integral(2.0, 0.5, 1.5, 1.0, a, b).unwrap())
            .sum();
        assert!((whole - parts).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_span() {
        assert!(element_integral(1.0, 0.3, 0.6, 1.0, 0.5, 1.2).is_err());
        assert!(element_integral(1.0, 0.3, 0.6, 1.0, 0.6, 0.5).is_err());
    }
}
