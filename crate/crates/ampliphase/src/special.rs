//! Laguerre polynomials and the polynomial confluent hypergeometric function.

use crate::bignum::SumNum;

/// Laguerre polynomial L_n(x) by the three-term recurrence.
pub fn laguerre(n: usize, x: f64) -> f64 {
    laguerre_generalized(n, 0.0, x)
}

/// Generalized Laguerre polynomial L_n^(α)(x).
///
/// Uses (n+1) L_{n+1}^(α) = (2n+1+α−x) L_n^(α) − (n+α) L_{n−1}^(α).
/// For x ≤ 0 every term of the polynomial is nonnegative, so the forward
/// recurrence tracks the dominant solution and is stable; that is the only
/// regime the photon-statistics sums use.
pub fn laguerre_generalized(n: usize, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Confluent hypergeometric function of the second kind with nonpositive
/// integer first argument: U(−j, b, z), a degree-j polynomial in z.
///
/// Evaluated exactly through U(−j, b, z) = (−1)^j j! L_j^(b−1)(z); no
/// asymptotic series is involved. Overflows f64 for j ≳ 170.
pub fn kummer_u_poly(j: usize, b: f64, z: f64) -> f64 {
    let mut factorial = 1.0f64;
    for k in 2..=j {
        factorial *= k as f64;
    }
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * factorial * laguerre_generalized(j, b - 1.0, z)
}

/// Table of scaled generalized Laguerre values l_j = L_j^(α)(z) / s^j for
/// j = 0..=n_max, in the chosen extended-precision arithmetic.
///
/// The scaling keeps the table bounded for the arguments the photon-number
/// sums produce, where the raw polynomials grow factorially. α must be a
/// half-integer and z, s are exact dyadic inputs, so nothing is lost going
/// into the arithmetic.
pub(crate) fn scaled_laguerre_table<T: SumNum>(
    n_max: usize,
    alpha: f64,
    z: &T,
    s: f64,
    ctx: T::Ctx,
) -> Vec<T> {
    let mut table = Vec::with_capacity(n_max + 1);
    table.push(T::one(ctx));
    if n_max == 0 {
        return table;
    }
    let inv_s = T::recip_f64(s, ctx);
    let inv_s2 = inv_s.mul(&inv_s);
    table.push(T::from_f64(1.0 + alpha, ctx).sub(z).mul(&inv_s));
    for k in 1..n_max {
        let kf = k as f64;
        let a = T::from_f64(2.0 * kf + 1.0 + alpha, ctx)
            .sub(z)
            .mul(&inv_s)
            .mul(&table[k]);
        let b = inv_s2.mul_f64(kf + alpha).mul(&table[k - 1]);
        table.push(a.sub(&b).div_u64(k as u64 + 1));
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Term-by-term series L_n^(α)(x) = Σ_k C(n+α, n−k) (−x)^k / k!.
    fn laguerre_series(n: usize, alpha: f64, x: f64) -> f64 {
        let mut total = 0.0f64;
        for k in 0..=n {
            // C(n+α, n−k) via a product, valid for non-integer α.
            let mut binom = 1.0f64;
            for i in 0..(n - k) {
                binom *= (alpha + (k + 1 + i) as f64) / ((i + 1) as f64);
            }
            let mut term = binom;
            for i in 1..=k {
                term *= -x / (i as f64);
            }
            total += term;
        }
        total
    }

    #[test]
    fn laguerre_base_cases() {
        assert_eq!(laguerre(0, 7.3), 1.0);
        assert_eq!(laguerre(1, 7.3), 1.0 - 7.3);
    }

    #[test]
    fn laguerre_matches_series() {
        assert_relative_eq!(
            laguerre(5, 2.5),
            laguerre_series(5, 0.0, 2.5),
            max_relative = 1e-12
        );
        for &(n, a, x) in &[
            (8, -0.5, -3.0),
            (12, 0.5, -7.5),
            (20, -0.5, -0.3),
            (7, 0.5, 4.0),
        ] {
            assert_relative_eq!(
                laguerre_generalized(n, a, x),
                laguerre_series(n, a, x),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn kummer_u_base_cases() {
        assert_eq!(kummer_u_poly(0, 0.5, -4.2), 1.0);
        assert_eq!(kummer_u_poly(0, 1.5, 9.9), 1.0);
        for &z in &[-3.0, -0.5, 0.0, 1.7] {
            assert_relative_eq!(kummer_u_poly(1, 0.5, z), z - 0.5, max_relative = 1e-14);
            assert_relative_eq!(kummer_u_poly(1, 1.5, z), z - 1.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn kummer_u_derivative_identity() {
        // d/dz U(−j, 1/2, z) = j·U(−j+1, 3/2, z), checked by central
        // differences at a few sample points.
        let h = 1e-5;
        for &(j, z) in &[(3usize, -2.0), (5, -0.7), (4, 1.3)] {
            let fd = (kummer_u_poly(j, 0.5, z + h) - kummer_u_poly(j, 0.5, z - h)) / (2.0 * h);
            let exact = j as f64 * kummer_u_poly(j - 1, 1.5, z);
            assert_relative_eq!(fd, exact, max_relative = 1e-7);
        }
    }

    #[test]
    fn scaled_table_matches_direct_ratio() {
        let z = -5.7;
        let s = 1.8;
        let zd = crate::dd::Dd::from_f64(z);
        let table = scaled_laguerre_table(25, -0.5, &zd, s, ());
        for j in [0usize, 3, 10, 25] {
            let want = laguerre_generalized(j, -0.5, z) / s.powi(j as i32);
            assert_relative_eq!(crate::dd::Dd::to_f64(table[j]), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn scaled_table_agrees_across_backends() {
        use crate::bignum::{BigFixed, SumNum};
        let z = -3.3;
        let s = 2.6;
        let zd = crate::dd::Dd::from_f64(z);
        let dd_table = scaled_laguerre_table(40, 0.5, &zd, s, ());
        let zb = BigFixed::from_f64(z, 512);
        let big_table: Vec<BigFixed> = scaled_laguerre_table(40, 0.5, &zb, s, 512);
        for j in [0usize, 7, 21, 40] {
            let a = crate::dd::Dd::to_f64(dd_table[j]);
            let b = big_table[j].to_f64();
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
    }
}
