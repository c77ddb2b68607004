//! Stokes constants from late coefficients, Dingle's rule of signs, and the
//! constant read off along anti-Stokes directions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rug::{Complex, Float, Integer};
use serde::{Deserialize, Serialize};

use crate::equations::{CoefficientTable, EquationSpec, Singularity};
use crate::error::{Error, Result};
use crate::numerics::precision::{abs, c64, two_pi_i, PrecisionContext};
use crate::numerics::{richardson_with_error, Spouge};
use crate::truncation::{exponential_mode, least_term_index, truncated_sum};

#[derive(Debug, Clone)]
pub struct StokesEstimate {
    pub j: usize,
    pub value: Complex,
    pub r_window: (usize, usize),
    pub raw_sequence: Vec<Complex>,
    pub richardson_order: usize,
    pub error_estimate: Float,
}

fn singularity(spec: &EquationSpec, j: usize) -> Result<&Singularity> {
    if j == 0 {
        return Err(Error::InvalidParameter("singularity index j starts at 1".into()));
    }
    spec.singularities
        .get(j - 1)
        .ok_or_else(|| Error::ModelUnavailable(format!("{}: no data for singularity {j}", spec.name)))
}

/// Γ(r − b + 1), exact factorial when b is an integer.
struct LateGamma {
    spouge: Spouge,
    b: rug::Rational,
    prec: u32,
}

impl LateGamma {
    fn new(b: &rug::Rational, ctx: &PrecisionContext) -> Self {
        LateGamma {
            spouge: Spouge::new(ctx),
            b: b.clone(),
            prec: ctx.working(),
        }
    }

    fn at(&self, r: usize) -> Result<Complex> {
        let arg = rug::Rational::from(r as i64 + 1) - &self.b;
        if *arg.denom() == 1 {
            let n = arg.numer().to_u32().ok_or(Error::GammaPole(arg.numer().to_i64().unwrap_or(0)))?;
            if n == 0 {
                return Err(Error::GammaPole(0));
            }
            let f = Integer::from(Integer::factorial(n - 1));
            return Ok(Complex::with_val(self.prec, f));
        }
        self.spouge.gamma(&Complex::with_val(self.prec, Float::with_val(self.prec, &arg)))
    }
}

/// λ^{e} for real e via the principal logarithm.
fn lambda_pow(lambda: Complex64, e: &rug::Rational, prec: u32) -> Complex {
    let l = Complex::with_val(prec, (lambda.re, lambda.im));
    let lg = Complex::with_val(prec, l.ln_ref());
    (lg * Float::with_val(prec, e)).exp()
}

/// S_est(r) = 2πi λ^{r+1−b} a_{r+1−offset} / Γ(r−b+1), the inversion of
/// the late-term law a_{r+1−offset} ~ S Γ(r−b+1) / (2πi λ^{r+1−b}).
pub fn stokes_sequence(
    table: &CoefficientTable,
    sing: &Singularity,
    r0: usize,
    r1: usize,
    ctx: &PrecisionContext,
) -> Result<Vec<Complex>> {
    let p = ctx.working();
    let o = table.offset as usize;
    if r1 + 1 < o || r1 + 1 - o > table.k_max() {
        return Err(Error::TableTooShort {
            k: table.k_max(),
            needed: r1 + 1 - o.min(r1 + 1),
        });
    }
    let g = LateGamma::new(&sing.exponent, ctx);
    let tpi = two_pi_i(p);
    let mut out = Vec::with_capacity(r1 - r0 + 1);
    for r in r0..=r1 {
        let k = r + 1 - o;
        let e = rug::Rational::from(r as i64 + 1) - &sing.exponent;
        let lp = lambda_pow(sing.location, &e, p);
        let a = Float::with_val(p, &table.values[k]);
        let v = Complex::with_val(p, &tpi * &lp) * a / g.at(r)?;
        out.push(v);
    }
    Ok(out)
}

/// Stokes constant of singularity `j` (1-based) from the coefficients
/// a_{r+1−offset}, r in `r_window`, accelerated by Richardson.
///
/// Rejected as oscillating when raising the Richardson order from 1 to
/// `order` does not shrink the error estimate although the raw sequence
/// moves: late terms are then a beat of several equal-modulus
/// contributions, not one Γ-law.
pub fn extract_stokes(
    table: &CoefficientTable,
    spec: &EquationSpec,
    j: usize,
    r_window: (usize, usize),
    order: usize,
    ctx: &PrecisionContext,
) -> Result<StokesEstimate> {
    let sing = singularity(spec, j)?;
    let (r0, r1) = r_window;
    if r1 <= r0 {
        return Err(Error::InvalidParameter(format!("empty window [{r0}, {r1}]")));
    }
    let raw = stokes_sequence(table, sing, r0, r1, ctx)?;
    let p = ctx.working();
    let hi = richardson_with_error(r0 as i64, &raw, order, ctx)?;
    let lo = richardson_with_error(r0 as i64, &raw, 1, ctx)?;
    let last = raw.last().unwrap();
    let scale = abs(last).max(&Float::with_val(p, Float::i_exp(1, -(ctx.bits as i32))));
    let spread = raw
        .iter()
        .map(|v| Float::with_val(p, Complex::with_val(p, v - last).abs_ref()))
        .fold(Float::with_val(p, 0), |a, b| a.max(&b))
        / &scale;
    let tiny = Float::with_val(p, Float::i_exp(1, -(ctx.bits as i32) / 2));
    if order > 1 && hi.error_estimate >= lo.error_estimate && spread > tiny {
        return Err(Error::OscillationDetected(format!(
            "{}: Richardson error {:.3e} at order {order} vs {:.3e} at order 1, raw spread {:.3e}",
            spec.name,
            hi.error_estimate.to_f64(),
            lo.error_estimate.to_f64(),
            spread.to_f64()
        )));
    }
    Ok(StokesEstimate {
        j,
        value: hi.value,
        r_window,
        raw_sequence: raw,
        richardson_order: order,
        error_estimate: hi.error_estimate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DingleReport {
    pub x: Complex64,
    pub center: usize,
    /// Series indices k of the window.
    pub window: (usize, usize),
    /// Unwrapped model phases of a_k x^{-k-offset}.
    pub phases: Vec<f64>,
    pub spread: f64,
    /// Largest phase gap between actual terms and the model.
    pub model_mismatch: f64,
}

fn wrap(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Phase spread of the late terms of the j-th component over a window of
/// `width` terms centred at the least term, using the model
/// a_{r+1−offset} ~ S Γ(r−b+1) / (2πi λ^{r+1−b}) (the constant phase of S
/// drops out of the spread).
pub fn dingle_phase_check(
    table: &CoefficientTable,
    spec: &EquationSpec,
    j: usize,
    x: &Complex,
    width: usize,
    ctx: &PrecisionContext,
) -> Result<DingleReport> {
    if spec.resonant {
        return Err(Error::ModelUnavailable(format!(
            "{}: late terms are an oscillating mixture with no single Γ-law",
            spec.name
        )));
    }
    let sing = singularity(spec, j)?;
    let p = ctx.working();
    let center = least_term_index(table, x, ctx)?;
    let o = table.offset as usize;
    let lo = center.saturating_sub(width / 2).max(1);
    let hi = lo + width - 1;
    if hi > table.k_max() {
        return Err(Error::TableTooShort {
            k: table.k_max(),
            needed: hi,
        });
    }
    let g = LateGamma::new(&sing.exponent, ctx);
    let lx = Complex::with_val(p, x.ln_ref());
    let mut phases = Vec::new();
    let mut mismatch = 0.0f64;
    let mut prev: Option<f64> = None;
    for k in lo..=hi {
        let r = k + o - 1;
        let e = rug::Rational::from(r as i64 + 1) - &sing.exponent;
        // log of Γ(r−b+1) λ^{−(r+1−b)} x^{−(r+1)}
        let gam = g.at(r)?;
        let model = Complex::with_val(p, gam.ln_ref()) - Complex::with_val(p, lambda_pow(sing.location, &e, p).ln_ref())
            - Complex::with_val(p, &lx * (r as u32 + 1));
        let ph = wrap(model.imag().to_f64());
        let unwrapped = match prev {
            None => ph,
            Some(q) => q + wrap(ph - q),
        };
        prev = Some(unwrapped);
        phases.push(unwrapped);
        let a = &table.values[k];
        if *a != 0 {
            let t = Complex::with_val(p, Complex::with_val(p, Complex::with_val(p, -&lx) * (k as u32 + o as u32)).exp() * a);
            let c = c64(&t);
            mismatch = mismatch.max(wrap(c.arg() - ph).abs());
        }
    }
    let mn = phases.iter().cloned().fold(f64::INFINITY, f64::min);
    let mx = phases.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(DingleReport {
        x: c64(x),
        center,
        window: (lo, hi),
        phases,
        spread: mx - mn,
        model_mismatch: mismatch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Serialize)]
pub struct AntiStokesPoint {
    pub r: f64,
    pub x: Complex64,
    /// (y − optimally truncated series) · x^{b} e^{λx}
    pub value: Complex64,
    /// y · x^{b} e^{λx}, series not removed
    pub raw: Complex64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AntiStokesReport {
    pub direction: Direction,
    pub value: Complex64,
    pub spread: f64,
    pub points: Vec<AntiStokesPoint>,
}

/// Point of modulus r on the curve |e^{-λx} x^{-b}| = 1 in the upper
/// (plus) or lower (minus) half-plane relative to arg λ.
pub fn antistokes_point(sing: &Singularity, r: f64, dir: Direction) -> Complex64 {
    let b = sing.exponent.to_f64();
    let lam = sing.location;
    let c = (-b * r.ln() / (lam.norm() * r)).clamp(-1.0, 1.0);
    let th = c.acos();
    let s = match dir {
        Direction::Plus => 1.0,
        Direction::Minus => -1.0,
    };
    Complex64::from_polar(r, -lam.arg() + s * th)
}

/// Read C ± S/2 off the solution y = exact + C·(first exponential) along the
/// anti-Stokes curve in the given direction.
pub fn antistokes_constant(
    spec: &EquationSpec,
    table: &CoefficientTable,
    c_reference: Complex64,
    direction: Direction,
    r_grid: &[f64],
    ctx: &PrecisionContext,
) -> Result<AntiStokesReport> {
    let sing = singularity(spec, 1)?;
    if r_grid.is_empty() {
        return Err(Error::InvalidParameter("empty r grid".into()));
    }
    let p = ctx.working();
    let mut points = Vec::new();
    for &r in r_grid {
        let xz = antistokes_point(sing, r, direction);
        let x = Complex::with_val(p, (xz.re, xz.im));
        let mode = exponential_mode(spec, &x, ctx)?;
        let mut y = spec.exact_solution(&x, ctx)?;
        if c_reference != Complex64::new(0.0, 0.0) {
            y += Complex::with_val(p, &mode * Complex::with_val(p, (c_reference.re, c_reference.im)));
        }
        let n = least_term_index(table, &x, ctx)?;
        let t = truncated_sum(table, &x, n, ctx)?;
        let value = Complex::with_val(p, &y - &t) / &mode;
        let raw = Complex::with_val(p, &y / &mode);
        points.push(AntiStokesPoint {
            r,
            x: xz,
            value: c64(&value),
            raw: c64(&raw),
        });
    }
    let last = points.last().unwrap().value;
    let spread = points
        .iter()
        .map(|q| (q.value - last).norm())
        .fold(0.0, f64::max)
        / last.norm().max(1e-300);
    if spread > 1e-3 {
        return Err(Error::NonConvergence(format!(
            "anti-Stokes values vary by {spread:.2e} relative over the r grid"
        )));
    }
    Ok(AntiStokesReport {
        direction,
        value: last,
        spread,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::build_catalog_equation;
    use serde_json::{json, Value};

    #[test]
    fn toy_inversion_is_exact() {
        let ctx = PrecisionContext::default();
        let s = build_catalog_equation("toy", &Value::Null).unwrap();
        let t = s.generate_coefficients(60).unwrap();
        let e = extract_stokes(&t, &s, 1, (20, 40), 3, &ctx).unwrap();
        for v in &e.raw_sequence {
            assert!((c64(v) - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-60);
        }
        assert!((c64(&e.value) - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-40);
    }

    #[test]
    fn airy_constant_and_richardson_monotonicity() {
        let ctx = PrecisionContext::default();
        let s = build_catalog_equation("airy", &Value::Null).unwrap();
        let t = s.generate_coefficients(210).unwrap();
        let oracle = c64(&s.stokes_oracle(&ctx).unwrap());
        let mut errs = Vec::new();
        for order in 1..=3 {
            let e = extract_stokes(&t, &s, 1, (150, 200), order, &ctx).unwrap();
            errs.push(e.error_estimate.to_f64());
            if order == 3 {
                assert!((c64(&e.value) - oracle).norm() < 1e-6);
            }
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn resonant_late_terms_oscillate() {
        let ctx = PrecisionContext::default();
        let s = build_catalog_equation("resonant", &json!({"m": 1.0})).unwrap();
        let t = s.generate_coefficients(210).unwrap();
        assert!(matches!(
            extract_stokes(&t, &s, 1, (150, 200), 4, &ctx),
            Err(Error::OscillationDetected(_))
        ));
        assert!(matches!(
            dingle_phase_check(&t, &s, 1, &ctx.complex(50.0, 0.0), 20, &ctx),
            Err(Error::ModelUnavailable(_))
        ));
    }

    #[test]
    fn dingle_on_and_off_the_stokes_line() {
        let ctx = PrecisionContext::default();
        let s = build_catalog_equation("toy", &Value::Null).unwrap();
        let t = s.generate_coefficients(120).unwrap();
        let on = dingle_phase_check(&t, &s, 1, &ctx.complex(50.0, 0.0), 20, &ctx).unwrap();
        assert!(on.spread < 1e-12);
        let x = Complex64::from_polar(50.0, 0.3);
        let off = dingle_phase_check(&t, &s, 1, &ctx.complex(x.re, x.im), 20, &ctx).unwrap();
        assert!(off.spread >= 0.3 * 19.0 - 1e-9, "{}", off.spread);
        assert!(off.model_mismatch < 1e-9);
    }

    #[test]
    fn toy_antistokes_halves() {
        let ctx = PrecisionContext::default();
        let s = build_catalog_equation("toy", &Value::Null).unwrap();
        let t = s.generate_coefficients(120).unwrap();
        let grid = [40.0, 60.0, 80.0, 100.0];
        let plus = antistokes_constant(&s, &t, Complex64::new(0.0, 0.0), Direction::Plus, &grid, &ctx).unwrap();
        let minus = antistokes_constant(&s, &t, Complex64::new(0.0, 0.0), Direction::Minus, &grid, &ctx).unwrap();
        assert!((plus.value - Complex64::new(0.0, PI)).norm() < 1e-10, "{:?}", plus.value);
        assert!((minus.value - Complex64::new(0.0, -PI)).norm() < 1e-10);
        let shifted = antistokes_constant(&s, &t, Complex64::new(1.0, 0.0), Direction::Plus, &grid, &ctx).unwrap();
        assert!((shifted.value - Complex64::new(1.0, PI)).norm() < 1e-10);
    }
}
