//! Exact rational checks of the binomial identities behind the energy
//! formulas, independent of the floating-point code paths.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{param, Result};
use crate::geometry::sigma_coefficients;
use crate::report::{CheckItem, CheckReport, Relation};

pub type Rational = BigRational;

/// `C(n, k)` as an exact integer (zero outside `0 <= k <= n`).
pub fn binomial(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

fn exact_item(name: String, anchor: &str, lhs: &BigInt, rhs: &BigInt) -> CheckItem {
    let pass = lhs == rhs;
    let to_f = |v: &BigInt| v.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let mut item = CheckItem::new(name, anchor, Relation::Equal, to_f(lhs), to_f(rhs), 0.0);
    item.pass = pass;
    item.margin = if pass { 0.0 } else { f64::NEG_INFINITY };
    item.with_note(format!("exact: {lhs} vs {rhs}"))
}

/// `(n-i+1) C(k+1,i) - (k+1) C(k,i) - (n-k) C(k+1,i) = 0`
/// for `0 <= k <= n <= n_max`, `1 <= i <= k+1`.
pub fn verify_zero_identity(n_max: usize) -> Result<CheckReport> {
    if n_max < 1 {
        return param("n_max must be at least 1");
    }
    let mut report = CheckReport::new();
    for n in 1..=n_max as i64 {
        for k in 0..=n {
            for i in 1..=k + 1 {
                let value = BigInt::from(n - i + 1) * binomial(k + 1, i)
                    - BigInt::from(k + 1) * binomial(k, i)
                    - BigInt::from(n - k) * binomial(k + 1, i);
                report.push(exact_item(
                    format!("coefficient cancellation (n={n}, k={k}, i={i})"),
                    "(n-i+1) C(k+1,i) - (k+1) C(k,i) - (n-k) C(k+1,i) = 0",
                    &value,
                    &BigInt::zero(),
                ));
            }
        }
    }
    Ok(report)
}

/// `Σ_{i=j+1}^{k} C(k+1,i+1) C(i-1,j) (-1)^{i+j} = j - k` for `0 <= j < k <= k_max`.
pub fn verify_binomial_identity(k_max: usize) -> Result<CheckReport> {
    if k_max < 1 {
        return param("k_max must be at least 1");
    }
    let mut report = CheckReport::new();
    for k in 1..=k_max as i64 {
        for j in 0..k {
            let mut sum = BigInt::zero();
            for i in j + 1..=k {
                let term = binomial(k + 1, i + 1) * binomial(i - 1, j);
                if (i + j) % 2 == 0 {
                    sum += term;
                } else {
                    sum -= term;
                }
            }
            report.push(exact_item(
                format!("alternating binomial sum (k={k}, j={j})"),
                "Σ_{i=j+1}^k C(k+1,i+1) C(i-1,j) (-1)^{i+j} = j - k",
                &sum,
                &BigInt::from(j - k),
            ));
        }
    }
    Ok(report)
}

/// Polynomial in `(λ_r, λ_s, t)` keyed by exponents.
type Poly = BTreeMap<(u32, u32, u32), Rational>;

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (&(ra, sa, ta), ca) in a {
        for (&(rb, sb, tb), cb) in b {
            let e = out
                .entry((ra + rb, sa + sb, ta + tb))
                .or_insert_with(Rational::zero);
            *e += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn linear_factor(radial: bool) -> Poly {
    let mut p = Poly::new();
    p.insert((0, 0, 0), Rational::one());
    p.insert(if radial { (1, 0, 1) } else { (0, 1, 1) }, Rational::one());
    p
}

/// Expands `(1 + tλ_r)(1 + tλ_s)^{n-1}` and compares every `t^k` coefficient
/// with the two-eigenvalue closed form used for `σ_k`.
pub fn verify_sigma_expansion(n: usize) -> Result<CheckReport> {
    if !(1..=4).contains(&n) {
        return param(format!("n must lie in 1..=4, got {n}"));
    }
    let mut product = linear_factor(true);
    for _ in 1..n {
        product = mul(&product, &linear_factor(false));
    }
    let mut report = CheckReport::new();
    for k in 0..=n as u32 {
        let expanded: Poly = product
            .iter()
            .filter(|(&(_, _, t), _)| t == k)
            .map(|(&(r, s, _), c)| ((r, s, 0), c.clone()))
            .collect();
        let (a, b) = sigma_coefficients(n, k as usize);
        let mut closed = Poly::new();
        if a != 0 {
            closed.insert((0, k, 0), Rational::from_integer(BigInt::from(a)));
        }
        if b != 0 {
            closed.insert((1, k - 1, 0), Rational::from_integer(BigInt::from(b)));
        }
        let mismatch: Rational = expanded
            .keys()
            .chain(closed.keys())
            .map(|key| {
                let lhs = expanded.get(key).cloned().unwrap_or_else(Rational::zero);
                let rhs = closed.get(key).cloned().unwrap_or_else(Rational::zero);
                (lhs - rhs).abs()
            })
            .fold(Rational::zero(), |acc, d| acc + d);
        report.push(exact_item(
            format!("sigma_{k} two-eigenvalue form (n={n})"),
            "(ω + t Ric)^n = (Σ_k σ_k t^k) ω^n",
            mismatch.numer(),
            &BigInt::zero(),
        ));
    }
    Ok(report)
}
