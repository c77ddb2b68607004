//! Berry-scale experiments: the erf smoothing of the exponentially small
//! constant across a Stokes line, the α-sweep, and the resonant family's
//! two transitions.

use std::f64::consts::{LOG2_E, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use rug::{Complex, Float};
use serde::Serialize;

use crate::borel::{averaged_sum, borel_transform, AverageSpec, BorelFunction};
use crate::equations::{build_catalog_equation, oracle, CoefficientTable, EquationSpec};
use crate::error::{Error, Result};
use crate::numerics::erf_c64;
use crate::numerics::precision::{abs, c64, PrecisionContext};
use crate::truncation::{exponential_mode, least_term_index, term, truncated_sum};

/// A(Ω) ≈ (jump/2)·erf((Ω − center)/width) + offset, the center possibly
/// complex (center + i·center_imag).
#[derive(Debug, Clone, Serialize)]
pub struct ErfFit {
    pub jump: Complex64,
    pub center: f64,
    pub center_imag: f64,
    pub width: f64,
    pub offset: Complex64,
    pub residual_rms: f64,
}

impl ErfFit {
    pub fn model(&self, w: f64) -> Complex64 {
        let z = (Complex64::new(w, 0.0) - Complex64::new(self.center, self.center_imag)) / self.width;
        self.jump * 0.5 * erf_c64(z) + self.offset
    }
}

/// Which parameters of the transition are free in [`fit_erf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ErfShape {
    /// Real center, fixed width.
    FixedWidth(f64),
    /// Real center and width.
    Real,
    /// Complex center and real width.
    ComplexCenter,
}

/// Complex linear least squares for (jump, offset) at fixed shape.
fn solve_linear(grid: &[f64], vals: &[Complex64], c: Complex64, width: f64) -> (Complex64, Complex64, f64) {
    let e: Vec<Complex64> = grid
        .iter()
        .map(|&w| erf_c64((Complex64::new(w, 0.0) - c) / width) * 0.5)
        .collect();
    let n = grid.len() as f64;
    let se: Complex64 = e.iter().sum();
    let see: f64 = e.iter().map(|v| v.norm_sqr()).sum();
    let sy: Complex64 = vals.iter().sum();
    let sey: Complex64 = e.iter().zip(vals).map(|(a, y)| a.conj() * y).sum();
    let det = n * see - se.norm_sqr();
    let jump = (sey * n - se.conj() * sy) / det;
    let offset = (sy * see - se * sey) / det;
    let rss: f64 = e.iter().zip(vals).map(|(a, y)| (y - jump * a - offset).norm_sqr()).sum();
    (jump, offset, (rss / n).sqrt())
}

/// Coarse grid over the nonlinear parameters, then pattern search; jump and
/// offset solve linearly at every trial shape.
pub fn fit_erf(grid: &[f64], vals: &[Complex64], shape: ErfShape) -> Result<ErfFit> {
    if grid.len() < 4 || grid.len() != vals.len() {
        return Err(Error::FitFailed(format!("need ≥ 4 matching points, got {}", grid.len())));
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let eval = |p: [f64; 3]| solve_linear(grid, vals, Complex64::new(p[0], p[1]), p[2]).2;
    let free = match shape {
        ErfShape::FixedWidth(_) => [true, false, false],
        ErfShape::Real => [true, false, true],
        ErfShape::ComplexCenter => [true, true, true],
    };
    let w0 = match shape {
        ErfShape::FixedWidth(w) => w,
        _ => SQRT_2,
    };
    let centers: Vec<f64> = (0..=40).map(|i| lo + span * i as f64 / 40.0).collect();
    let imags: Vec<f64> = if free[1] {
        (-10..=10).map(|i| span * i as f64 / 40.0).collect()
    } else {
        vec![0.0]
    };
    // a free width is scanned coarsely only for real centers; with a complex
    // center the pattern search below takes over from w = √2
    let widths: Vec<f64> = if free[2] && !free[1] {
        (1..=20).map(|j| span * j as f64 / 40.0).collect()
    } else {
        vec![w0]
    };
    let mut best = ([0.5 * (lo + hi), 0.0, w0], f64::INFINITY);
    for &c in &centers {
        for &ci in &imags {
            for &w in &widths {
                let v = eval([c, ci, w]);
                if v < best.1 {
                    best = ([c, ci, w], v);
                }
            }
        }
    }
    let mut step = [span / 40.0, span / 40.0, span / 40.0];
    for _ in 0..200 {
        let mut moved = false;
        for i in 0..3 {
            if !free[i] {
                continue;
            }
            for s in [1.0, -1.0] {
                let mut p = best.0;
                p[i] += s * step[i];
                if p[2] <= 0.0 {
                    continue;
                }
                let v = eval(p);
                if v < best.1 {
                    best = (p, v);
                    moved = true;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            if step[0] < 1e-10 * span {
                break;
            }
        }
    }
    let [center, center_imag, width] = best.0;
    let (jump, offset, residual_rms) = solve_linear(grid, vals, Complex64::new(center, center_imag), width);
    if !jump.norm().is_finite() {
        return Err(Error::FitFailed("degenerate design".into()));
    }
    Ok(ErfFit {
        jump,
        center,
        center_imag,
        width,
        offset,
        residual_rms,
    })
}

/// Values move monotonically along the fitted jump direction, up to `slack`
/// (absolute, in units of the projected coordinate).
pub fn is_monotone(vals: &[Complex64], jump: Complex64, slack: f64) -> bool {
    let u = jump / jump.norm();
    let proj: Vec<f64> = vals.iter().map(|v| (v * u.conj()).re).collect();
    proj.windows(2).all(|p| p[1] >= p[0] - slack)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BerryReference {
    Averaged(AverageSpec),
    Exact,
}

#[derive(Debug, Clone, Serialize)]
pub struct BerryScan {
    pub spec_name: String,
    pub r: f64,
    pub omega_grid: Vec<f64>,
    pub measured_c: Vec<Complex64>,
    pub fit: ErfFit,
}

fn raised(ctx: &PrecisionContext, r: f64) -> PrecisionContext {
    ctx.raised_to(ctx.bits + (r * LOG2_E).ceil() as u32)
}

/// [reference(x) − T_N(x)] / (e^{-λx} x^{-b}) at x = r e^{iΩ/√r}.
pub fn berry_scan(
    spec: &EquationSpec,
    r: f64,
    omega_grid: &[f64],
    reference: BerryReference,
    ctx: &PrecisionContext,
) -> Result<BerryScan> {
    let table = spec.generate_coefficients((r + 40.0).ceil() as usize)?;
    let ctx = raised(ctx, r);
    let bf = match reference {
        BerryReference::Averaged(a) => {
            a.validate()?;
            Some(borel_transform(spec, &table, &ctx)?)
        }
        BerryReference::Exact => None,
    };
    let measured_c = omega_grid
        .par_iter()
        .map(|&om| {
            let x = from_polar(r, om / r.sqrt(), ctx.working());
            scaled_remainder(spec, &table, bf.as_ref(), reference, &x, &ctx)
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_erf(omega_grid, &measured_c, ErfShape::FixedWidth(SQRT_2))?;
    Ok(BerryScan {
        spec_name: spec.name.clone(),
        r,
        omega_grid: omega_grid.to_vec(),
        measured_c,
        fit,
    })
}

fn from_polar(r: f64, th: f64, prec: u32) -> Complex {
    let z = Complex64::from_polar(r, th);
    Complex::with_val(prec, (z.re, z.im))
}

fn scaled_remainder(
    spec: &EquationSpec,
    table: &CoefficientTable,
    bf: Option<&BorelFunction>,
    reference: BerryReference,
    x: &Complex,
    ctx: &PrecisionContext,
) -> Result<Complex64> {
    let y = match (reference, bf) {
        (BerryReference::Averaged(a), Some(bf)) => averaged_sum(bf, x, &a, ctx)?,
        _ => spec.exact_solution(x, ctx)?,
    };
    let n = least_term_index(table, x, ctx)?;
    let t = truncated_sum(table, x, n, ctx)?;
    let mode = exponential_mode(spec, x, ctx)?;
    Ok(c64(&(Complex::with_val(ctx.working(), &y - &t) / mode)))
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub r: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaSweep {
    pub rows: Vec<AlphaRow>,
    /// (α, d ln ratio / d ln r)
    pub slopes: Vec<(f64, f64)>,
}

/// Ratio |averaged_sum(α) − T_N| / |least term| on the Stokes line arg x = 0.
pub fn alpha_sweep(spec: &EquationSpec, r_grid: &[f64], alpha_set: &[f64], ctx: &PrecisionContext) -> Result<AlphaSweep> {
    if r_grid.len() < 2 {
        return Err(Error::InvalidParameter("alpha sweep needs at least two radii".into()));
    }
    let rmax = r_grid.iter().cloned().fold(0.0, f64::max);
    let table = spec.generate_coefficients((rmax + 40.0).ceil() as usize)?;
    let jobs: Vec<(f64, f64)> = alpha_set.iter().flat_map(|&a| r_grid.iter().map(move |&r| (a, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(alpha, r)| {
            let c = raised(ctx, r);
            let bf = borel_transform(spec, &table, &c)?;
            let x = c.complex(r, 0.0);
            let avg = AverageSpec {
                alpha,
                depth: 1,
                ray: Some(0.0),
            };
            let y = averaged_sum(&bf, &x, &avg, &c)?;
            let n = least_term_index(&table, &x, &c)?;
            let rem = y - truncated_sum(&table, &x, n, &c)?;
            let ratio = Float::with_val(c.working(), abs(&rem) / abs(&term(&table, &x, n, &c))).to_f64();
            Ok(AlphaRow { alpha, r, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    let slopes = alpha_set
        .iter()
        .map(|&a| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|row| row.alpha == a)
                .map(|row| (row.r.ln(), row.ratio.ln()))
                .collect();
            (a, ols_slope(&pts))
        })
        .collect();
    Ok(AlphaSweep { rows, slopes })
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonantFit {
    pub m: f64,
    pub k_window: (usize, usize),
    pub a_plus: Complex64,
    pub a_minus: Complex64,
    pub residual_rms: f64,
    pub window_rms: f64,
}

/// b_k k^{-1/4} ≈ A_+ e^{2im√k} + A_- e^{-2im√k} over the window, b_k = a_k/(k−1)!.
pub fn resonant_coefficient_fit(m: f64, k_window: (usize, usize), _ctx: &PrecisionContext) -> Result<ResonantFit> {
    let (k0, k1) = k_window;
    if k0 < 1 || k1 <= k0 {
        return Err(Error::InvalidParameter(format!("bad window [{k0}, {k1}]")));
    }
    // the two phases must separate by at least half a turn over the window
    let sweep = 2.0 * m.abs() * ((k1 as f64).sqrt() - (k0 as f64).sqrt());
    if m == 0.0 || sweep < std::f64::consts::PI {
        return Err(Error::FitFailed(format!(
            "m = {m}: phases e^{{±2im√k}} turn by only {sweep:.3} rad over the window, so the two-mode model is rank deficient (at m = 0, b_k = k grows without bound)"
        )));
    }
    let spec = build_catalog_equation("resonant", &serde_json::json!({ "m": m }))?;
    let b = spec.generate_coefficients(k1)?.scaled();
    let data: Vec<(f64, Complex64, f64)> = (k0..=k1)
        .map(|k| {
            let kf = k as f64;
            let y = b[k - 1].to_f64() * kf.powf(-0.25);
            (y, Complex64::from_polar(1.0, 2.0 * m * kf.sqrt()), kf)
        })
        .collect();
    // normal equations for the basis (e, ē)
    let (mut g11, mut g12, mut r1, mut r2) = (0.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for (y, e, _) in &data {
        g11 += 1.0;
        g12 += e.conj() * e.conj();
        r1 += e.conj() * y;
        r2 += e * y;
    }
    let det = g11 * g11 - g12.norm_sqr();
    if det.abs() < 1e-12 * g11 * g11 {
        return Err(Error::FitFailed("two-mode design is singular".into()));
    }
    let a_plus = (r1 * g11 - g12 * r2) / det;
    let a_minus = (r2 * g11 - g12.conj() * r1) / det;
    let n = data.len() as f64;
    let rss: f64 = data.iter().map(|(y, e, _)| (a_plus * e + a_minus * e.conj() - y).norm_sqr()).sum();
    let window_rms = (data.iter().map(|(y, _, _)| y * y).sum::<f64>() / n).sqrt();
    Ok(ResonantFit {
        m,
        k_window,
        a_plus,
        a_minus,
        residual_rms: (rss / n).sqrt(),
        window_rms,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonantBerry {
    pub m: f64,
    pub plus: BerryScan,
    pub minus: BerryScan,
    /// Largest condition number of the local two-mode fits.
    pub max_condition: f64,
}

const MAX_CONDITION: f64 = 1e8;
/// Half-width in β of the window over which C_± are held constant.
pub const PROJECTION_HALF_WIDTH: f64 = 0.5;
const DENSE_STEP: f64 = 0.05;

/// Scaled remainder R e^{x} x^{-1/4} and the scaled modes e^{±2im√x} on the
/// arc |x| = r at the given β (x = r e^{iβ/√r}).
fn resonant_samples(
    m: f64,
    r: f64,
    betas: &[f64],
    ctx: &PrecisionContext,
) -> Result<Vec<(Complex64, Complex64, Complex64)>> {
    let spec = build_catalog_equation("resonant", &serde_json::json!({ "m": m }))?;
    let table = spec.generate_coefficients((4.0 * r + 20.0).ceil() as usize)?;
    let m2 = spec.m2.clone().unwrap_or_default();
    let angles: Vec<f64> = betas.iter().map(|b| b / r.sqrt()).collect();
    let states = oracle::resonant_arc(&table, &m2, r, 0.0, &angles, ctx)?;
    let c = raised(ctx, r);
    let p = c.working();
    states
        .par_iter()
        .map(|st| {
            let x = Complex::with_val(p, &st.x);
            let n = least_term_index(&table, &x, &c)?;
            let t = truncated_sum(&table, &x, n, &c)?;
            let lx = Complex::with_val(p, x.ln_ref());
            let scale = (Complex::with_val(p, &x - Complex::with_val(p, &lx / 4u32))).exp();
            let rem = Complex::with_val(p, &st.y - &t) * scale;
            let ph = Complex::with_val(p, x.sqrt_ref()) * Complex::with_val(p, (0.0, 2.0 * m));
            let ep = Complex::with_val(p, ph.exp_ref());
            let em = Complex::with_val(p, (-ph).exp_ref());
            Ok((c64(&rem), c64(&ep), c64(&em)))
        })
        .collect()
}

/// Split the remainder of the optimally truncated series between the two
/// homogeneous modes y_± = x^{1/4} e^{-x ± 2im√x}. At each β the pair C_±
/// is the least-squares fit of R = C_+ y_+ + C_- y_- over the samples with
/// |β′ − β| ≤ [`PROJECTION_HALF_WIDTH`]; the modes separate because
/// |y_+/y_-| = e^{-2mβ} changes across the window.
pub fn resonant_berry_scan(m: f64, r: f64, beta_grid: &[f64], ctx: &PrecisionContext) -> Result<ResonantBerry> {
    resonant_berry_scan_with(m, r, beta_grid, PROJECTION_HALF_WIDTH, ctx)
}

pub fn resonant_berry_scan_with(
    m: f64,
    r: f64,
    beta_grid: &[f64],
    half_width: f64,
    ctx: &PrecisionContext,
) -> Result<ResonantBerry> {
    if beta_grid.len() < 4 {
        return Err(Error::InvalidParameter("resonant scan needs at least four β values".into()));
    }
    let lo = beta_grid.iter().cloned().fold(f64::INFINITY, f64::min) - half_width;
    let hi = beta_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + half_width;
    let count = ((hi - lo) / DENSE_STEP).round() as usize;
    let dense: Vec<f64> = (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect();
    let samples = resonant_samples(m, r, &dense, ctx)?;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut max_condition = 0.0f64;
    for &b in beta_grid {
        let win: Vec<&(Complex64, Complex64, Complex64)> = dense
            .iter()
            .zip(&samples)
            .filter(|(d, _)| (*d - b).abs() <= half_width + 1e-12)
            .map(|(_, s)| s)
            .collect();
        // normal equations G c = h for the columns (e_+, e_-)
        let (mut g11, mut g22, mut g12) = (0.0, 0.0, Complex64::new(0.0, 0.0));
        let (mut h1, mut h2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (rem, ep, em) in &win {
            g11 += ep.norm_sqr();
            g22 += em.norm_sqr();
            g12 += ep.conj() * em;
            h1 += ep.conj() * rem;
            h2 += em.conj() * rem;
        }
        let det = g11 * g22 - g12.norm_sqr();
        // condition of the column-normalised Gram matrix
        let rho = g12.norm() / (g11 * g22).sqrt();
        let cond = (1.0 + rho) / (1.0 - rho).max(f64::MIN_POSITIVE);
        max_condition = max_condition.max(cond);
        plus.push((h1 * g22 - g12 * h2) / det);
        minus.push((h2 * g11 - g12.conj() * h1) / det);
    }
    if max_condition.is_nan() || max_condition >= MAX_CONDITION {
        return Err(Error::ModeSeparation(format!("projection condition {max_condition:.3e}")));
    }
    let name = format!("resonant(m={m})");
    let scan = |vals: Vec<Complex64>, label: &str| -> Result<BerryScan> {
        let fit = fit_erf(beta_grid, &vals, ErfShape::ComplexCenter)?;
        Ok(BerryScan {
            spec_name: format!("{name}{label}"),
            r,
            omega_grid: beta_grid.to_vec(),
            measured_c: vals,
            fit,
        })
    };
    Ok(ResonantBerry {
        m,
        plus: scan(plus, "+")?,
        minus: scan(minus, "-")?,
        max_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::erf_f64;
    use serde_json::Value;

    #[test]
    fn erf_fit_recovers_synthetic_parameters() {
        let grid: Vec<f64> = (0..25).map(|i| -3.5 + 7.0 * i as f64 / 24.0).collect();
        let jump = Complex64::new(0.3, 2.0);
        let vals: Vec<Complex64> = grid
            .iter()
            .map(|w| jump * 0.5 * erf_f64((w - 0.4) / 1.3) + Complex64::new(1.0, -0.5))
            .collect();
        let f = fit_erf(&grid, &vals, ErfShape::Real).unwrap();
        assert!((f.jump - jump).norm() < 1e-6, "{f:?}");
        assert!((f.center - 0.4).abs() < 1e-6 && (f.width - 1.3).abs() < 1e-6);
        assert!(f.residual_rms < 1e-6);
        assert!(is_monotone(&vals, f.jump, 0.0));
        let c = Complex64::new(0.8, -0.6);
        let vals: Vec<Complex64> = grid
            .iter()
            .map(|&w| jump * 0.5 * erf_c64((Complex64::new(w, 0.0) - c) / 1.4))
            .collect();
        let f = fit_erf(&grid, &vals, ErfShape::ComplexCenter).unwrap();
        assert!((f.center - 0.8).abs() < 1e-6 && (f.center_imag + 0.6).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn toy_scan_center_and_offset() {
        let ctx = PrecisionContext::default();
        let s = build_catalog_equation("toy", &Value::Null).unwrap();
        let grid = [-3.0, -1.0, 0.0, 1.0, 3.0];
        let scan = berry_scan(&s, 100.0, &grid, BerryReference::Exact, &ctx).unwrap();
        // erf(0) = 0: the PV solution carries no exponential on the line
        assert!(scan.measured_c[2].norm() < 0.05 * 2.0 * std::f64::consts::PI);
        for (w, c) in grid.iter().zip(&scan.measured_c) {
            let model = Complex64::new(0.0, std::f64::consts::PI * erf_f64(w / SQRT_2));
            assert!((c - model).norm() < 0.05 * 2.0 * std::f64::consts::PI, "{w}: {c}");
        }
        // conjugation symmetry of the real-axis problem: Im C is odd in Ω
        assert!((scan.measured_c[3].im + scan.measured_c[1].im).abs() < 1e-12);
    }

    #[test]
    fn resonant_fit_rejects_zero_mass() {
        let ctx = PrecisionContext::default();
        assert!(matches!(
            resonant_coefficient_fit(0.0, (500, 2000), &ctx),
            Err(Error::FitFailed(_))
        ));
    }

    #[test]
    fn ols_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0].iter().map(|r| (r.ln(), 0.5 * r.ln() + 1.0)).collect();
        assert!((ols_slope(&pts) - 0.5).abs() < 1e-12);
    }
}
