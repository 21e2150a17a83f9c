//! Small numeric helpers shared across modules.

/// Three-valued sign with `sgn(0) = 0`.
#[inline]
pub fn sgn(z: f64) -> i8 {
    if z > 0.0 {
        1
    } else if z < 0.0 {
        -1
    } else {
        0
    }
}

/// Pairwise summation; the result does not depend on how the caller
/// partitions work, only on the slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// C¹ smoothstep on [0, 1], clamped outside.
#[inline]
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Root of `f` on the bracket `[a, b]` (with `f(a)`, `f(b)` of opposite
/// sign or zero) by the Illinois variant of regula falsi. Stops once
/// `|f| <= f_tol` or the bracket is within rounding of the root. Returns
/// `None` after `max_iter` evaluations.
pub fn illinois<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    (mut a, mut fa): (f64, f64),
    (mut b, mut fb): (f64, f64),
    f_tol: f64,
    max_iter: usize,
) -> Result<Option<f64>, E> {
    if fa.abs() <= f_tol {
        return Ok(Some(a));
    }
    if fb.abs() <= f_tol {
        return Ok(Some(b));
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c != a && c != b {
            c
        } else {
            0.5 * (a + b)
        };
        if (b - a).abs() <= 4.0 * f64::EPSILON * c.abs().max(f64::MIN_POSITIVE) {
            return Ok(Some(c));
        }
        let fc = f(c)?;
        if fc.abs() <= f_tol {
            return Ok(Some(c));
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sgn(0.0), 0);
        assert_eq!(sgn(-0.0), 0);
        assert_eq!(sgn(1e-300), 1);
        assert_eq!(sgn(-3.0), -1);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    #[test]
    fn illinois_finds_cubic_root() {
        let f = |x: f64| Ok::<_, ()>(x * x * x - 2.0);
        let r = illinois(f, (0.0, -2.0), (2.0, 6.0), 1e-15, 100).unwrap().unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}
