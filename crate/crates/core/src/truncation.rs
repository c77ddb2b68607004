//! Optimal truncation: least-term index, partial sums and the error against
//! a reference solution.

use num_complex::Complex64;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::borel::{averaged_sum, borel_transform, AverageSpec};
use crate::equations::{CoefficientTable, EquationSpec};
use crate::error::{Error, Result};
use crate::numerics::precision::{abs, c64, PrecisionContext};

fn check_length(table: &CoefficientTable, x: &Complex) -> Result<f64> {
    let r = abs(x).to_f64();
    let needed = (r + 10.0).ceil() as usize;
    if table.k_max() < needed {
        return Err(Error::TableTooShort {
            k: table.k_max(),
            needed,
        });
    }
    Ok(r)
}

/// |a_k| |x|^{-k-offset} for every k (zero for vanishing coefficients).
fn term_magnitudes(table: &CoefficientTable, x: &Complex, prec: u32) -> Vec<Float> {
    let inv = Float::with_val(prec, abs(x).recip_ref());
    let mut pw = Float::with_val(prec, 1);
    for _ in 0..table.offset {
        pw *= &inv;
    }
    let mut out = Vec::with_capacity(table.values.len());
    for a in &table.values {
        out.push(Float::with_val(prec, a.clone().abs()) * &pw);
        pw *= &inv;
    }
    out
}

/// Global argmin over the table of |a_k x^{-k-offset}|, skipping zero
/// coefficients; near-ties (relative 2^{-bits/2}) go to the smaller k.
pub fn least_term_index(table: &CoefficientTable, x: &Complex, ctx: &PrecisionContext) -> Result<usize> {
    check_length(table, x)?;
    let p = ctx.working();
    let mags = term_magnitudes(table, x, p);
    let slack = Float::with_val(p, Float::i_exp(1, -(ctx.bits as i32) / 2)) + 1u32;
    let mut best: Option<usize> = None;
    for (k, m) in mags.iter().enumerate() {
        if m.is_zero() {
            continue;
        }
        match best {
            None => best = Some(k),
            Some(b) => {
                if Float::with_val(p, m * &slack) < mags[b] {
                    best = Some(k);
                }
            }
        }
    }
    best.ok_or_else(|| Error::InvalidParameter(format!("{}: every coefficient vanishes", table.spec_name)))
}

/// Σ_{k=0}^{n} a_k x^{-k-offset}.
pub fn truncated_sum(table: &CoefficientTable, x: &Complex, n: usize, ctx: &PrecisionContext) -> Result<Complex> {
    if n > table.k_max() {
        return Err(Error::TableTooShort {
            k: table.k_max(),
            needed: n,
        });
    }
    let p = ctx.working() + 32;
    let inv = Complex::with_val(p, x.recip_ref());
    let mut pw = Complex::with_val(p, 1);
    for _ in 0..table.offset {
        pw *= &inv;
    }
    let mut acc = Complex::new(p);
    for a in &table.values[..=n] {
        if *a != 0 {
            acc += Complex::with_val(p, &pw * a);
        }
        pw *= &inv;
    }
    Ok(Complex::with_val(ctx.working(), acc))
}

/// a_n x^{-n-offset}.
pub fn term(table: &CoefficientTable, x: &Complex, n: usize, ctx: &PrecisionContext) -> Complex {
    let p = ctx.working();
    let e = (n + table.offset as usize) as i32;
    let pw = rug::ops::Pow::pow(Complex::with_val(p, x.recip_ref()), e);
    Complex::with_val(p, pw * &table.values[n])
}

pub fn least_term_magnitude(table: &CoefficientTable, x: &Complex, ctx: &PrecisionContext) -> Result<Float> {
    let n = least_term_index(table, x, ctx)?;
    Ok(abs(&term(table, x, n, ctx)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    ExactOracle,
    BalancedSum,
}

/// A true solution: the chosen base plus C times the first exponential
/// e^{-λ x} x^{-b} (λ, b of the nearest Borel singularity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub kind: ReferenceKind,
    #[serde(default)]
    pub shift: Option<[f64; 2]>,
}

impl Reference {
    pub fn exact() -> Self {
        Reference {
            kind: ReferenceKind::ExactOracle,
            shift: None,
        }
    }
}

/// e^{-λ x} x^{-b} for the nearest singularity (λ, b).
pub fn exponential_mode(spec: &EquationSpec, x: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let s = spec
        .singularities
        .first()
        .ok_or_else(|| Error::ModelUnavailable(format!("{}: no exponential data", spec.name)))?;
    let p = ctx.working();
    let lam = Complex::with_val(p, (s.location.re, s.location.im));
    let b = Float::with_val(p, &s.exponent);
    let lx = Complex::with_val(p, x.ln_ref());
    let arg = Complex::with_val(p, -Complex::with_val(p, &lam * x)) - lx * b;
    Ok(arg.exp())
}

pub fn reference_value(
    spec: &EquationSpec,
    table: &CoefficientTable,
    x: &Complex,
    reference: &Reference,
    ctx: &PrecisionContext,
) -> Result<Complex> {
    let base = match reference.kind {
        ReferenceKind::ExactOracle => spec.balanced_solution(x, ctx).map_err(|e| match e {
            Error::OracleUnavailable(m) => Error::NoReference(m),
            other => other,
        })?,
        ReferenceKind::BalancedSum => {
            let bf = borel_transform(spec, table, ctx)?;
            averaged_sum(&bf, x, &AverageSpec::balanced(), ctx)?
        }
    };
    match reference.shift {
        Some([re, im]) if re != 0.0 || im != 0.0 => {
            let mode = exponential_mode(spec, x, ctx)?;
            Ok(base + mode * ctx.complex(re, im))
        }
        _ => Ok(base),
    }
}

#[derive(Debug, Clone)]
pub struct TruncationReport {
    pub x: Complex,
    pub n: usize,
    pub partial_sum: Complex,
    pub least_term: Complex,
    pub remainder: Option<Complex>,
    pub ratio: Option<f64>,
}

impl TruncationReport {
    pub fn x64(&self) -> Complex64 {
        c64(&self.x)
    }
}

/// Remainder of the optimally truncated series against `reference`.
///
/// The working precision is raised so the exponentially small remainder
/// keeps `ctx.bits` of relative accuracy.
pub fn truncation_error(
    spec: &EquationSpec,
    table: &CoefficientTable,
    x: &Complex,
    reference: &Reference,
    ctx: &PrecisionContext,
) -> Result<TruncationReport> {
    let r = check_length(table, x)?;
    let ctx = ctx.raised_to(ctx.bits + (r * std::f64::consts::LOG2_E).ceil() as u32);
    let n = least_term_index(table, x, &ctx)?;
    let partial_sum = truncated_sum(table, x, n, &ctx)?;
    let least_term = term(table, x, n, &ctx);
    let reference = reference_value(spec, table, x, reference, &ctx)?;
    let remainder = reference - &partial_sum;
    let ratio = Float::with_val(ctx.working(), abs(&remainder) / abs(&least_term)).to_f64();
    Ok(TruncationReport {
        x: x.clone(),
        n,
        partial_sum,
        least_term,
        remainder: Some(remainder),
        ratio: Some(ratio),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::build_catalog_equation;
    use serde_json::Value;

    fn toy_table(k: usize) -> (EquationSpec, CoefficientTable) {
        let s = build_catalog_equation("toy", &Value::Null).unwrap();
        let t = s.generate_coefficients(k).unwrap();
        (s, t)
    }

    #[test]
    fn least_term_matches_brute_force() {
        let ctx = PrecisionContext::default();
        let (_, t) = toy_table(40);
        // terms k!/20^{k+1}: k = 19 and 20 tie exactly, ties go down
        assert_eq!(least_term_index(&t, &ctx.complex(20.0, 0.0), &ctx).unwrap(), 19);
        let (_, t) = toy_table(13);
        let brute = (0..=13usize)
            .min_by(|&a, &b| {
                let f = |k: usize| (1..=k).map(|j| j as f64).product::<f64>() / 3f64.powi(k as i32 + 1);
                f(a).total_cmp(&f(b))
            })
            .unwrap();
        assert_eq!(least_term_index(&t, &ctx.complex(3.0, 0.0), &ctx).unwrap(), brute);
    }

    #[test]
    fn short_table_is_rejected() {
        let ctx = PrecisionContext::default();
        let (_, t) = toy_table(25);
        assert!(matches!(
            least_term_index(&t, &ctx.complex(20.0, 0.0), &ctx),
            Err(Error::TableTooShort { .. })
        ));
    }

    #[test]
    fn first_partial_sums() {
        let ctx = PrecisionContext::default();
        let (_, t) = toy_table(5);
        let x = ctx.complex(2.0, 0.0);
        assert_eq!(c64(&truncated_sum(&t, &x, 0, &ctx).unwrap()), Complex64::new(0.5, 0.0));
        assert_eq!(c64(&truncated_sum(&t, &x, 1, &ctx).unwrap()), Complex64::new(0.75, 0.0));
    }

    #[test]
    fn least_term_follows_stirling() {
        let ctx = PrecisionContext::default();
        let (_, t) = toy_table(120);
        let m = least_term_magnitude(&t, &ctx.complex(20.0, 0.0), &ctx).unwrap().to_f64();
        let model = (2.0 * std::f64::consts::PI).sqrt() * 20f64.powf(-0.5) * (-20f64).exp();
        assert!((0.5..=2.0).contains(&(m / model)), "{}", m / model);
    }

    #[test]
    fn remainder_with_and_without_homogeneous_shift() {
        let ctx = PrecisionContext::default();
        let (s, t) = toy_table(60);
        let x = ctx.complex(10.0, 0.0);
        let rep = truncation_error(&s, &t, &x, &Reference::exact(), &ctx).unwrap();
        assert!(rep.ratio.unwrap() <= 5.0);
        let shifted = Reference {
            kind: ReferenceKind::ExactOracle,
            shift: Some([1.0, 0.0]),
        };
        // the shift contributes e^{-x} against a least term ≈ √(2π/x) e^{-x}
        let x = ctx.complex(300.0, 0.0);
        let (s, t) = toy_table(320);
        let rep = truncation_error(&s, &t, &x, &shifted, &ctx).unwrap();
        assert!(rep.ratio.unwrap() > 5.0);
    }
}
