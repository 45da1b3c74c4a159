pub const DEFAULT_REL_TOL: f64 = 1e-6;

/// Absolute tolerance that applies when the relative one is tighter.
pub const TOLERANCE_FLOOR: f64 = 1e-12;

/// Per-element check `|c - r| <= max(rel_tol * |r|, TOLERANCE_FLOOR)`.
pub fn validate_output(reference: &[f64], candidate: &[f64], rel_tol: f64) -> bool {
    reference.len() == candidate.len()
        && reference
            .iter()
            .zip(candidate)
            .all(|(r, c)| (c - r).abs() <= (rel_tol * r.abs()).max(TOLERANCE_FLOOR))
}

/// Whitespace-separated finite decimals.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split_whitespace()
        .map(|tok| match tok.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(format!("`{tok}` is not a finite decimal")),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical() {
        let r = [1.0, -2.5, 0.0, 1e9];
        assert!(validate_output(&r, &r, DEFAULT_REL_TOL));
    }

    #[test]
    fn ten_times_tolerance_fails() {
        let r = [1.0, 2.0];
        let c = [1.0, 2.0 + 2.0 * 1e-5];
        assert!(!validate_output(&r, &c, DEFAULT_REL_TOL));
        let c = [1.0, 2.0 + 2.0 * 1e-7];
        assert!(validate_output(&r, &c, DEFAULT_REL_TOL));
    }

    #[test]
    fn zero_reference_uses_floor() {
        assert!(validate_output(&[0.0], &[1e-13], DEFAULT_REL_TOL));
        assert!(!validate_output(&[0.0], &[1e-11], DEFAULT_REL_TOL));
    }

    #[test]
    fn length_mismatch() {
        assert!(!validate_output(&[1.0], &[1.0, 1.0], DEFAULT_REL_TOL));
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_numbers("1\n2.5\n-3e2\n").unwrap(), [1.0, 2.5, -300.0]);
        assert!(parse_numbers("1 nan").is_err());
        assert!(parse_numbers("x").is_err());
    }
}
