//! Borel transform, continuation in the Borel plane, lateral and averaged
//! Laplace sums, and the jump at the first singularity.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rug::{Complex, Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::equations::{EquationKind, EquationSpec};
use crate::error::{Error, Result};
use crate::numerics::pade::{pade_reduced, PadeApproximant};
use crate::numerics::precision::{abs, c64, two_pi_i, PrecisionContext};
use crate::numerics::quad::{Contour, LaplaceQuadrature};
use crate::numerics::gamma_complex;

use crate::equations::CoefficientTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Above => 1.0,
            Side::Below => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Continuation {
    /// residue / (p − location), single-valued.
    Pole { location: Complex64, residue: Complex },
    /// Taylor series with infinite radius.
    Entire,
    /// Diagonal Padé approximant, checked against its lower neighbour.
    Pade {
        main: PadeApproximant<Complex>,
        check: PadeApproximant<Complex>,
        trust_radius: f64,
        /// Boundary values on the cut from a lone singularity.
        conformal: Option<Box<ConformalPade>>,
    },
}

/// Padé approximants of Y(p(w)) with p = 4λw/(1+w)², which maps the unit
/// disk onto the plane cut along [λ, ∞); the two banks of the cut become
/// the upper and lower unit semicircles.
#[derive(Debug, Clone)]
pub struct ConformalPade {
    pub lambda: Complex64,
    main: PadeApproximant<Complex>,
    check: PadeApproximant<Complex>,
}

impl ConformalPade {
    fn new(b: &[Rational], lambda: Complex64, prec: u32) -> Result<Self> {
        let m = b.len() - 1;
        let lam = Complex::with_val(prec, (lambda.re, lambda.im));
        // p(w) = 4λ Σ_{n≥1} (−1)^{n+1} n w^n
        let pw: Vec<Complex> = (0..=m)
            .map(|n| {
                let c = Complex::with_val(prec, &lam * (4 * n as u32));
                if n % 2 == 0 {
                    -c
                } else {
                    c
                }
            })
            .collect();
        let mut acc: Vec<Complex> = vec![Complex::new(prec); m + 1];
        for bj in b.iter().rev() {
            // acc ← acc·p(w) + b_j, truncated at w^m
            let mut next: Vec<Complex> = vec![Complex::new(prec); m + 1];
            for (i, a) in acc.iter().enumerate() {
                if a.real().is_zero() && a.imag().is_zero() {
                    continue;
                }
                for k in 1..=m - i {
                    next[i + k] += Complex::with_val(prec, a * &pw[k]);
                }
            }
            next[0] += bj;
            acc = next;
        }
        let n = m / 2;
        Ok(ConformalPade {
            lambda,
            main: pade_reduced(&acc[..=2 * n], n, n)?,
            check: pade_reduced(&acc[..2 * n], n - 1, n)?,
        })
    }

    /// Y^± at p past λ on its ray.
    fn boundary_value(&self, p: Complex64, side: Side, prec: u32) -> Result<Complex> {
        let s = ((p / self.lambda).re - 1.0).max(0.0).sqrt();
        let th = 2.0 * s.atan() * side.sign();
        let w = Complex::with_val(prec, (th.cos(), th.sin()));
        let a = self.main.eval(&w);
        let b = self.check.eval(&w);
        let d = Complex::with_val(prec, &a - &b);
        if abs(&d).to_f64() > SIDE_AGREEMENT * abs(&a).to_f64().max(1.0) {
            return Err(Error::OutsideTrustRegion {
                p: format!("{p} (conformal approximants disagree by {:.1e})", abs(&d).to_f64()),
                radius: f64::NAN,
            });
        }
        Ok(a)
    }
}

/// Y(p) = Σ b_j p^j with b_j = a_{j+1−offset}/j!, so that the Laplace
/// transform ∫ e^{-xp} Y dp reproduces Σ a_k x^{-k-offset} (plus `constant`
/// when offset is 0).
#[derive(Debug, Clone)]
pub struct BorelFunction {
    pub spec_name: String,
    pub taylor: Vec<Complex>,
    pub constant: Complex,
    pub continuation: Continuation,
    pub singularities: Vec<Complex64>,
    /// min |singularity| (∞ when entire).
    pub radius: f64,
    prec: u32,
}

fn wrap(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Exact Borel coefficients b_j = a_{j+1−offset}/j!.
pub fn borel_coefficients(table: &CoefficientTable) -> Vec<Rational> {
    let o = table.offset as usize;
    let len = table.values.len() + o - 1;
    let mut fact = Integer::from(1);
    let mut out = Vec::with_capacity(len);
    for j in 0..len {
        if j > 0 {
            fact *= j as u64;
        }
        let k = j + 1;
        out.push(if k < o {
            Rational::new()
        } else {
            Rational::from(&table.values[k - o] / &fact)
        });
    }
    out
}

const PADE_MAX: usize = 60;

pub fn borel_transform(spec: &EquationSpec, table: &CoefficientTable, ctx: &PrecisionContext) -> Result<BorelFunction> {
    let exact = borel_coefficients(table);
    let singularities: Vec<Complex64> = spec.singularities.iter().map(|s| s.location).collect();
    let radius = singularities.iter().map(|s| s.norm()).fold(f64::INFINITY, f64::min);
    let constant = if table.offset == 0 {
        Complex::with_val(ctx.working(), &table.values[0])
    } else {
        Complex::new(ctx.working())
    };
    let (continuation, prec) = if spec.kind == EquationKind::Toy {
        (
            Continuation::Pole {
                location: Complex64::new(1.0, 0.0),
                residue: Complex::with_val(ctx.working(), -1),
            },
            ctx.working(),
        )
    } else if singularities.is_empty() {
        (Continuation::Entire, ctx.working())
    } else {
        let n = ((exact.len() - 1) / 2).min(PADE_MAX);
        if n < 2 {
            return Err(Error::InsufficientData {
                needed: 5,
                got: exact.len(),
            });
        }
        // Hankel systems lose roughly a few bits per degree
        let prec = ctx.working() + 8 * n as u32;
        let c: Vec<Complex> = exact[..=2 * n].iter().map(|b| Complex::with_val(prec, b)).collect();
        let main = pade_reduced(&c, n, n)?;
        let check = pade_reduced(&c[..2 * n], n - 1, n)?;
        let second = singularities
            .iter()
            .map(|s| s.norm())
            .filter(|&d| d > radius * (1.0 + 1e-12))
            .fold(f64::INFINITY, f64::min);
        let lone = singularities.len() == 1;
        let second = if second.is_finite() { second } else { 2.0 * radius };
        let conformal = if lone {
            let m = (exact.len() - 1).min(2 * PADE_MAX);
            Some(Box::new(ConformalPade::new(&exact[..=m], singularities[0], prec + 4 * m as u32)?))
        } else {
            None
        };
        (
            Continuation::Pade {
                main,
                check,
                trust_radius: 1.5 * second,
                conformal,
            },
            prec,
        )
    };
    Ok(BorelFunction {
        spec_name: spec.name.clone(),
        taylor: exact.iter().map(|b| Complex::with_val(prec, b)).collect(),
        constant,
        continuation,
        singularities,
        radius,
        prec,
    })
}

impl BorelFunction {
    fn singular_rays(&self) -> Vec<f64> {
        self.singularities.iter().map(|s| s.arg()).collect()
    }

    fn on_singular_ray(&self, angle: f64) -> bool {
        self.singular_rays().iter().any(|a| wrap(angle - a).abs() < 1e-12)
    }

    fn taylor_sum(&self, p: &Complex) -> Result<Complex> {
        let prec = self.prec;
        let p = Complex::with_val(prec, p);
        let r = abs(&p).to_f64();
        let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32)));
        let mut acc = Complex::new(prec);
        let mut pw = Complex::with_val(prec, 1);
        let mut peak = Float::with_val(prec, 0);
        let mut quiet = 0;
        for (j, b) in self.taylor.iter().enumerate() {
            let t = Complex::with_val(prec, &pw * b);
            let m = abs(&t);
            if m > peak {
                peak = m.clone();
            }
            acc += t;
            if j as f64 > r && m <= Float::with_val(prec, &peak * &eps) {
                quiet += 1;
                if quiet >= 3 {
                    return Ok(acc);
                }
            } else {
                quiet = 0;
            }
            pw *= &p;
        }
        Err(Error::OutsideTrustRegion {
            p: format!("{}", c64(&p)),
            radius: r,
        })
    }

    /// Y on the principal sheet, p off every cut.
    fn eval_plain(&self, p: &Complex) -> Result<Complex> {
        self.eval_checked(p, PADE_AGREEMENT)
    }

    fn eval_checked(&self, p: &Complex, agreement: f64) -> Result<Complex> {
        match &self.continuation {
            Continuation::Pole { location, residue } => {
                let d = Complex::with_val(self.prec, p - Complex::with_val(self.prec, (location.re, location.im)));
                Ok(Complex::with_val(self.prec, residue / d))
            }
            Continuation::Entire => self.taylor_sum(p),
            Continuation::Pade {
                main,
                check,
                trust_radius,
                ..
            } => {
                let pp = Complex::with_val(self.prec, p);
                let r = abs(&pp).to_f64();
                if r > *trust_radius {
                    return Err(Error::OutsideTrustRegion {
                        p: format!("{}", c64(p)),
                        radius: *trust_radius,
                    });
                }
                let a = main.eval(&pp);
                let b = check.eval(&pp);
                let d = Float::with_val(self.prec, Complex::with_val(self.prec, &a - &b).abs_ref());
                let scale = abs(&a).max(&Float::with_val(self.prec, 1));
                if d.to_f64() > agreement * scale.to_f64() {
                    return Err(Error::OutsideTrustRegion {
                        p: format!("{} (approximants disagree by {:.1e})", c64(p), d.to_f64()),
                        radius: *trust_radius,
                    });
                }
                Ok(a)
            }
        }
    }
}

/// Relative agreement required between [n/n] and [n−1/n].
const PADE_AGREEMENT: f64 = 1e-6;
/// The same, next to a cut, where Padé poles accumulate.
const SIDE_AGREEMENT: f64 = 1e-3;
/// Off-axis displacement for boundary values of the continuation.
const SIDE_DELTA: f64 = 0.05;

/// Value of Y at p on the branch reached by passing on `side` of the
/// singular ray through p (same on both sides away from any cut).
pub fn continue_borel(bf: &BorelFunction, p: &Complex, side: Side) -> Result<Complex> {
    let pz = c64(p);
    for s in &bf.singularities {
        if (pz - s).norm() < 1e-12 * s.norm().max(1.0) {
            return Err(Error::AtSingularity(format!("{pz}")));
        }
    }
    let past_cut = bf
        .singularities
        .iter()
        .any(|s| wrap(pz.arg() - s.arg()).abs() < 1e-12 && pz.norm() > s.norm());
    match &bf.continuation {
        Continuation::Pade {
            conformal: Some(c), ..
        } if past_cut && wrap(pz.arg() - c.lambda.arg()).abs() < 1e-12 => {
            let v = c.boundary_value(pz, side, bf.prec + 8 * PADE_MAX as u32)?;
            Ok(Complex::with_val(bf.prec, v))
        }
        Continuation::Pade { .. } if past_cut => {
            // Y(p ± iδ e^{iφ}) at δ, δ/2, δ/4, δ/8 and polynomial extrapolation to δ = 0
            let prec = bf.prec;
            let dir = Complex64::from_polar(1.0, pz.arg() + FRAC_PI_2 * side.sign());
            let mut pts: Vec<(f64, Complex)> = Vec::new();
            for k in 0..4 {
                let d = SIDE_DELTA / f64::powi(2.0, k);
                let q = Complex::with_val(prec, p) + Complex::with_val(prec, (dir.re * d, dir.im * d));
                pts.push((d, bf.eval_checked(&q, SIDE_AGREEMENT)?));
            }
            Ok(neville_at_zero(&pts, prec))
        }
        _ => bf.eval_plain(p),
    }
}

fn neville_at_zero(pts: &[(f64, Complex)], prec: u32) -> Complex {
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let mut t: Vec<Complex> = pts.iter().map(|p| p.1.clone()).collect();
    let n = t.len();
    for m in 1..n {
        for i in 0..n - m {
            // T_i = (x_{i+m} T_i − x_i T_{i+1}) / (x_{i+m} − x_i), evaluated at 0
            let (xi, xm) = (xs[i], xs[i + m]);
            let a = Complex::with_val(prec, &t[i] * xm);
            let b = Complex::with_val(prec, &t[i + 1] * xi);
            t[i] = Complex::with_val(prec, (a - b) / (xm - xi));
        }
    }
    t[0].clone()
}

/// ∫ e^{-xp} Y(p) dp along arg p = `ray`, indented to `side` when the ray
/// carries a singularity (the contour is rotated off the ray by a small
/// angle, which leaves the integral unchanged).
pub fn lateral_laplace_on_ray(
    bf: &BorelFunction,
    x: &Complex,
    ray: f64,
    side: Side,
    ctx: &PrecisionContext,
) -> Result<Complex> {
    let xz = c64(x);
    let angle = if bf.on_singular_ray(ray) {
        let room = FRAC_PI_2 - wrap(ray + xz.arg()).abs();
        ray + side.sign() * (0.25f64).min(0.5 * room)
    } else {
        ray
    };
    let decay = (xz * Complex64::from_polar(1.0, angle)).re;
    if decay <= 0.0 {
        return Err(Error::NonDecayingRay {
            angle,
            x: format!("{xz}"),
        });
    }
    let quad = LaplaceQuadrature::new(ctx);
    let tol = ctx.tolerance();
    let f = |p: &Complex| bf.eval_plain(p);
    let rays = bf.singular_rays();
    let integral = match &bf.continuation {
        Continuation::Pade { trust_radius, .. } => {
            let end = Complex64::from_polar(*trust_radius * (1.0 - 1e-9), angle);
            let tail = bf.eval_plain(&Complex::with_val(bf.prec, (end.re, end.im)))?;
            let bound = abs(&tail).to_f64().ln() - decay * end.norm() - decay.ln();
            if bound > tol.to_f64().ln() {
                return Err(Error::OutsideTrustRegion {
                    p: format!("{end} (Laplace tail e^{bound:.1})"),
                    radius: *trust_radius,
                });
            }
            let c = Contour::new(vec![Complex64::new(0.0, 0.0), end], None, &rays)?;
            quad.integrate(&f, &c, x, &tol)?
        }
        _ => {
            let c = Contour::ray_from_origin(angle, &rays)?;
            quad.integrate(&f, &c, x, &tol)?
        }
    };
    Ok(Complex::with_val(ctx.working(), integral + &bf.constant))
}

/// Lateral sum along the summation ray arg p = −arg x.
pub fn lateral_laplace(bf: &BorelFunction, x: &Complex, side: Side, ctx: &PrecisionContext) -> Result<Complex> {
    let ray = -c64(x).arg();
    lateral_laplace_on_ray(bf, x, ray, side, ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageSpec {
    /// Weight of the lower continuation; 1/2 is balanced.
    pub alpha: f64,
    #[serde(default = "one")]
    pub depth: usize,
    /// Summation ray; defaults to −arg x.
    #[serde(default)]
    pub ray: Option<f64>,
}

fn one() -> usize {
    1
}

impl AverageSpec {
    pub fn balanced() -> Self {
        AverageSpec {
            alpha: 0.5,
            depth: 1,
            ray: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if self.depth == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// (1−α) L^{above} + α L^{below}; for depth d > 1 (closed-form continuation
/// only) the contour crossing the singular ray between (j−1)λ and jλ gets
/// weight α(1−α)^{j−1}, and the one passing above all of them (1−α)^d.
pub fn averaged_sum(bf: &BorelFunction, x: &Complex, avg: &AverageSpec, ctx: &PrecisionContext) -> Result<Complex> {
    avg.validate()?;
    let ray = avg.ray.unwrap_or(-c64(x).arg());
    let p = ctx.working();
    if !bf.on_singular_ray(ray) {
        return lateral_laplace_on_ray(bf, x, ray, Side::Above, ctx);
    }
    let alpha = Float::with_val(p, avg.alpha);
    let beta = Float::with_val(p, 1 - &alpha);
    if avg.depth == 1 {
        let mut out = Complex::new(p);
        if avg.alpha != 1.0 {
            out += lateral_laplace_on_ray(bf, x, ray, Side::Above, ctx)? * &beta;
        }
        if avg.alpha != 0.0 {
            out += lateral_laplace_on_ray(bf, x, ray, Side::Below, ctx)? * &alpha;
        }
        return Ok(out);
    }
    let lambda = match &bf.continuation {
        Continuation::Pole { .. } => bf.singularities[0],
        _ => return Err(Error::UnsupportedDepth(avg.depth)),
    };
    let quad = LaplaceQuadrature::new(ctx);
    let tol = ctx.tolerance();
    let f = |q: &Complex| bf.eval_plain(q);
    let rays = bf.singular_rays();
    let phi = lambda.arg();
    let mut out = lateral_laplace_on_ray(bf, x, ray, Side::Below, ctx)? * &alpha;
    let mut w = Float::with_val(p, &alpha * &beta);
    for j in 2..=avg.depth {
        let th = (0.25f64).min(0.2 / j as f64);
        let r0 = (j as f64 - 0.5) * lambda.norm();
        let a = Complex64::from_polar(r0, phi + th);
        let b = Complex64::from_polar(r0 / (2.0 * th).cos() * (1.0 + 1e-3), phi - th);
        let c = Contour::new(vec![Complex64::new(0.0, 0.0), a, b], Some(phi - th), &rays)?;
        let v = quad.integrate(&f, &c, x, &tol)? + &bf.constant;
        out += v * &w;
        w *= &beta;
    }
    let mut rest = Float::with_val(p, 1);
    for _ in 0..avg.depth {
        rest *= &beta;
    }
    out += lateral_laplace_on_ray(bf, x, ray, Side::Above, ctx)? * rest;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    /// Simple pole: the jump is carried by the residue.
    Residue,
    /// Branch point: Y^+ − Y^- on a grid past the singularity.
    Branch,
    /// No singularity: the continuation is single-valued.
    Entire,
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpPoint {
    pub z: f64,
    pub measured: Complex64,
    pub model: Complex64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpReport {
    pub kind: JumpKind,
    pub points: Vec<JumpPoint>,
    /// Leading coefficient fitted from the measured jump.
    pub fitted: Complex64,
    pub expected: Complex64,
    pub relative_deviation: f64,
}

fn residue_on_circle(bf: &BorelFunction, centre: Complex64, radius: f64, prec: u32) -> Result<Complex> {
    let n = 64;
    let mut acc = Complex::new(prec);
    for k in 0..n {
        let th = 2.0 * PI * k as f64 / n as f64;
        let e = Complex64::from_polar(radius, th);
        let q = Complex::with_val(prec, (centre.re + e.re, centre.im + e.im));
        // (1/2πi) ∮ Y dp with dp = i e dθ: mean of Y·e
        acc += bf.eval_plain(&q)? * Complex::with_val(prec, (e.re, e.im));
    }
    Ok(acc / n as u32)
}

/// Compare Y^+ − Y^- just past the first singularity λ with the local
/// resurgence model. `stokes` is the Stokes constant S of λ.
pub fn borel_jump_check(
    bf: &BorelFunction,
    spec: &EquationSpec,
    stokes: &Complex,
    z_grid: &[f64],
    ctx: &PrecisionContext,
) -> Result<JumpReport> {
    let prec = ctx.working();
    let s64 = c64(stokes);
    match &bf.continuation {
        Continuation::Pole { location, .. } => {
            let res = residue_on_circle(bf, *location, 0.1, bf.prec)?;
            let expected = -Complex::with_val(prec, stokes / two_pi_i(prec));
            let dev = Float::with_val(prec, Complex::with_val(prec, &res - &expected).abs_ref()) / abs(&expected);
            Ok(JumpReport {
                kind: JumpKind::Residue,
                points: vec![],
                fitted: c64(&res),
                expected: c64(&expected),
                relative_deviation: dev.to_f64(),
            })
        }
        Continuation::Entire => {
            let mut points = Vec::new();
            let mut worst = 0.0f64;
            for &z in z_grid {
                let q = Complex::with_val(prec, (1.0 + z, 0.0));
                let j = continue_borel(bf, &q, Side::Above)? - continue_borel(bf, &q, Side::Below)?;
                worst = worst.max(abs(&j).to_f64());
                points.push(JumpPoint {
                    z,
                    measured: c64(&j),
                    model: Complex64::new(0.0, 0.0),
                });
            }
            Ok(JumpReport {
                kind: JumpKind::Entire,
                points,
                fitted: Complex64::new(worst, 0.0),
                expected: Complex64::new(0.0, 0.0),
                relative_deviation: worst,
            })
        }
        Continuation::Pade { .. } => {
            let sing = spec
                .singularities
                .first()
                .ok_or_else(|| Error::ModelUnavailable(format!("{}: no singularity data", spec.name)))?;
            let lam = sing.location;
            let b = Float::with_val(prec, &sing.exponent);
            let integer_exponent = sing.exponent.denom() == &1 && sing.exponent <= 0;
            let level_one = if integer_exponent {
                let l1 = spec.level_one.as_ref().ok_or_else(|| {
                    Error::ModelUnavailable(format!("{}: integer exponent needs the level-one series", spec.name))
                })?;
                Some(l1.generate(80)?)
            } else {
                None
            };
            let gamma_b = if integer_exponent {
                None
            } else {
                Some(gamma_complex(&Complex::with_val(prec, &b), ctx)?)
            };
            let mut points = Vec::new();
            let mut ratios = Vec::new();
            let mut worst = 0.0f64;
            for &z in z_grid {
                let pz = lam + Complex64::from_polar(z, lam.arg());
                let q = Complex::with_val(bf.prec, (pz.re, pz.im));
                let up = continue_borel(bf, &q, Side::Above)?;
                let dn = continue_borel(bf, &q, Side::Below)?;
                let j = Complex::with_val(prec, up - dn);
                let zz = Complex::with_val(prec, Complex64::from_polar(z, lam.arg()).re)
                    + Complex::with_val(prec, (0, Complex64::from_polar(z, lam.arg()).im));
                // shape without the constant: Σ_{k≥1} c_k z^{k−1}/(k−1)!  or  z^{b−1}/Γ(b)
                let shape = match (&level_one, &gamma_b) {
                    (Some(c), _) => {
                        let mut acc = Complex::new(prec);
                        let mut pw = Complex::with_val(prec, 1);
                        for (k, ck) in c.iter().enumerate().skip(1) {
                            acc += Complex::with_val(prec, &pw * ck);
                            pw *= &zz;
                            pw /= k as u32;
                        }
                        acc
                    }
                    (None, Some(g)) => {
                        let e = Complex::with_val(prec, Float::with_val(prec, &b - 1u32));
                        (Complex::with_val(prec, zz.ln_ref()) * &e).exp() / g
                    }
                    _ => unreachable!(),
                };
                let model = Complex::with_val(prec, &shape * stokes);
                let dev = Float::with_val(prec, Complex::with_val(prec, &j - &model).abs_ref()) / abs(&model);
                worst = worst.max(dev.to_f64());
                ratios.push(c64(&Complex::with_val(prec, &j / &shape)));
                points.push(JumpPoint {
                    z,
                    measured: c64(&j),
                    model: c64(&model),
                });
            }
            // the jump divided by the model shape estimates S (exact shape for
            // the integer case, leading order otherwise: extrapolate z → 0)
            let fitted = if integer_exponent || ratios.len() < 2 {
                ratios.iter().sum::<Complex64>() / ratios.len().max(1) as f64
            } else {
                let n = ratios.len() as f64;
                let mz = z_grid.iter().sum::<f64>() / n;
                let mr = ratios.iter().sum::<Complex64>() / n;
                let sxx: f64 = z_grid.iter().map(|z| (z - mz).powi(2)).sum();
                let sxy: Complex64 = z_grid.iter().zip(&ratios).map(|(z, r)| (r - mr) * (z - mz)).sum();
                mr - sxy / sxx * mz
            };
            Ok(JumpReport {
                kind: JumpKind::Branch,
                points,
                fitted,
                expected: s64,
                relative_deviation: if integer_exponent {
                    worst
                } else {
                    (fitted - s64).norm() / s64.norm()
                },
            })
        }
    }
}
