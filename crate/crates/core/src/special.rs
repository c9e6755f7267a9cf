//! Hurwitz zeta function by Euler–Maclaurin summation.

/// `B_{2j} / (2j)!` for `j = 1..=10`.
const BERNOULLI_OVER_FACTORIAL: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
    -174611.0 / 802857662698291200000.0,
];

/// `ζ(s, a) = Σ_{k≥0} (a + k)^{-s}` for `s > 1`, `a > 0`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta needs s > 1 and a > 0");
    // shift far enough that the asymptotic series converges quickly
    let shift_to = 12.0 + s;
    let mut direct = 0.0;
    let mut b = a;
    while b < shift_to {
        direct += b.powf(-s);
        b += 1.0;
    }
    direct + zeta_tail(s, b)
}

/// Euler–Maclaurin expansion of `Σ_{k≥0} (b + k)^{-s}` for large `b`.
fn zeta_tail(s: f64, b: f64) -> f64 {
    let b_pow = b.powf(-s);
    let mut total = b * b_pow / (s - 1.0) + 0.5 * b_pow;
    // rising factorial s (s+1) … (s+2j-2) times b^{-s-2j+1}
    let mut factor = s * b_pow / b;
    let inv_b2 = 1.0 / (b * b);
    for (j, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = coeff * factor;
        total += term;
        if term.abs() < 1e-18 * total.abs() {
            break;
        }
        let j = j as f64 + 1.0;
        factor *= (s + 2.0 * j - 1.0) * (s + 2.0 * j) * inv_b2;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(s: f64, a: f64, terms: usize) -> f64 {
        // direct partial sum plus the integral tail estimate
        let mut sum = 0.0;
        for k in (0..terms).rev() {
            sum += (a + k as f64).powf(-s);
        }
        let b = a + terms as f64;
        sum + b.powf(1.0 - s) / (s - 1.0) + 0.5 * b.powf(-s)
    }

    #[test]
    fn riemann_zeta_two() {
        let z = hurwitz_zeta(2.0, 1.0);
        assert!((z - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-15);
    }

    #[test]
    fn riemann_zeta_four() {
        let z = hurwitz_zeta(4.0, 1.0);
        assert!((z - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-15);
    }

    #[test]
    fn shift_identity() {
        for &(s, a) in &[(1.8, 0.3), (2.2, 5.5), (7.0, 64.25), (20.0, 100.0)] {
            let lhs = hurwitz_zeta(s, a) - hurwitz_zeta(s, a + 1.0);
            let rhs = a.powf(-s);
            assert!((lhs - rhs).abs() <= 1e-14 * rhs.max(1e-300) + 1e-300, "s={s} a={a}");
        }
    }

    #[test]
    fn against_long_partial_sum() {
        for &(s, a) in &[(1.9, 65.5), (2.0, 10.0), (3.3, 1.25)] {
            let z = hurwitz_zeta(s, a);
            let b = brute(s, a, 200_000);
            assert!((z - b).abs() < 1e-12 * z, "s={s} a={a}: {z} vs {b}");
        }
    }
}
