use num_complex::Complex64;
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::numerics::ode::{LinearOde2, OdeState, TaylorIntegrator};
use crate::numerics::precision::{abs, c64, PrecisionContext};

use super::series::CoefficientTable;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Which solution of f' + f = 1/x.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyBranch {
    /// Borel sum along arg p = −arg x (the balanced one on the real axis).
    Directional,
    /// e^{-x} Ei(x) analytically continued off the positive axis.
    StokesLine,
}

/// e^{-x}(γ + L + Ein(x)) with Ein(x) = Σ_{k≥1} x^k/(k·k!).
pub fn toy_solution(x: &Complex, branch: ToyBranch, ctx: &PrecisionContext) -> Result<Complex> {
    let r = abs(x).to_f64();
    if r == 0.0 {
        return Err(Error::InvalidParameter("toy solution is singular at x = 0".into()));
    }
    let p = ctx.working() + (2.0 * r * LOG2_E).ceil() as u32 + 32;
    let x = Complex::with_val(p, x);
    let mut term = Complex::with_val(p, 1); // x^k/k!
    let mut ein = Complex::new(p);
    let eps = Float::with_val(p, Float::i_exp(1, -(p as i32)));
    let mut peak = Float::with_val(p, 0);
    let mut k = 0u32;
    loop {
        k += 1;
        term *= &x;
        term /= k;
        let t = Complex::with_val(p, &term / k);
        let ta = abs(&t);
        if ta > peak {
            peak = ta.clone();
        }
        ein += t;
        if k as f64 > r && ta <= Float::with_val(p, &peak * &eps) {
            break;
        }
    }
    let on_positive_axis = x.imag().is_zero() && *x.real() > 0;
    let log = match branch {
        ToyBranch::StokesLine => Complex::with_val(p, x.ln_ref()),
        ToyBranch::Directional if on_positive_axis => Complex::with_val(p, x.ln_ref()),
        ToyBranch::Directional => Complex::with_val(p, Complex::with_val(p, -&x).ln_ref()),
    };
    let gamma = Float::with_val(p, Constant::Euler);
    let bracket = ein + log + gamma;
    let e = Complex::with_val(p, -&x).exp();
    Ok(Complex::with_val(ctx.working(), e * bracket))
}

/// Ai(0) and −Ai'(0).
fn airy_constants(p: u32) -> Result<(Float, Float)> {
    let ctx = PrecisionContext::new(p, 64)?;
    let w = ctx.working();
    let third = Float::with_val(w, 3).recip();
    let two_thirds = Float::with_val(w, 1 - &third);
    let g13 = Float::with_val(w, third.gamma_ref());
    let g23 = Float::with_val(w, two_thirds.gamma_ref());
    let three = Float::with_val(w, 3);
    let c1 = three.clone().pow(Float::with_val(w, -&two_thirds)) / g23;
    let c2 = three.pow(Float::with_val(w, -&third)) / g13;
    Ok((c1, c2))
}


/// (f, g) with Ai = c1 f − c2 g and Bi = √3 (c1 f + c2 g).
fn airy_fg(z: &Complex, p: u32) -> (Complex, Complex) {
    let z = Complex::with_val(p, z);
    let z3 = Complex::with_val(p, z.square_ref()) * &z;
    let eps = Float::with_val(p, Float::i_exp(1, -(p as i32)));
    let mut tf = Complex::with_val(p, 1);
    let mut tg = z.clone();
    let mut f = tf.clone();
    let mut g = tg.clone();
    let mut peak = abs(&f).max(&abs(&g));
    let mut k = 0u32;
    loop {
        tf *= &z3;
        tf /= (3 * k + 2) * (3 * k + 3);
        tg *= &z3;
        tg /= (3 * k + 3) * (3 * k + 4);
        f += &tf;
        g += &tg;
        let m = abs(&tf).max(&abs(&tg));
        if m > peak {
            peak = m.clone();
        }
        k += 1;
        if k > 3 && m <= Float::with_val(p, &peak * &eps) {
            break;
        }
    }
    (f, g)
}

fn airy_guard(z: &Complex) -> u32 {
    let r = abs(z).to_f64();
    (2.0 * (2.0 / 3.0) * r.powf(1.5) * LOG2_E).ceil() as u32 + 32
}

pub fn airy_ai(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let p = ctx.working() + airy_guard(z);
    let (c1, c2) = airy_constants(p)?;
    let (f, g) = airy_fg(z, p);
    Ok(Complex::with_val(ctx.working(), f * c1 - g * c2))
}

pub fn airy_bi(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let p = ctx.working() + airy_guard(z);
    let (c1, c2) = airy_constants(p)?;
    let (f, g) = airy_fg(z, p);
    let s3 = Float::with_val(p, 3).sqrt();
    Ok(Complex::with_val(ctx.working(), (f * c1 + g * c2) * s3))
}

fn omega(p: u32, sign: i32) -> Complex {
    let th = Float::with_val(p, Constant::Pi) * 2u32 / 3u32 * sign;
    Complex::with_val(p, (th.clone().cos(), th.sin()))
}

fn phase(p: u32, num: i32, den: u32) -> Complex {
    let th = Float::with_val(p, Constant::Pi) * num / den;
    Complex::with_val(p, (th.clone().cos(), th.sin()))
}

/// Stokes constant of the Airy dominant series from the sector identity
/// S = [e^{iπ/6} Ai(ωz) − e^{−iπ/6} Ai(ω̄z)] / Ai(z), evaluated at a
/// moderate real z.
pub fn airy_connection_stokes(ctx: &PrecisionContext) -> Result<Complex> {
    let p = ctx.working();
    let z = Complex::with_val(p, (13, 0)) / 10u32;
    let wz = Complex::with_val(p, &z * omega(p, 1));
    let wbz = Complex::with_val(p, &z * omega(p, -1));
    let a = airy_ai(&wz, ctx)? * phase(p, 1, 6);
    let b = airy_ai(&wbz, ctx)? * phase(p, -1, 6);
    let d = airy_ai(&z, ctx)?;
    Ok((a - b) / d)
}

/// The series Σ u_k t^{-k} of the Airy e^{t} t^{-1/6} solutions, summed along
/// arg p = −arg t (balanced on arg t = 0).
pub fn airy_directional(t: &Complex, balanced_on_axis: bool, ctx: &PrecisionContext) -> Result<Complex> {
    let tr = abs(t).to_f64();
    if tr == 0.0 {
        return Err(Error::InvalidParameter("Airy oracle is singular at t = 0".into()));
    }
    let p = ctx.working() + (2.0 * tr * LOG2_E).ceil() as u32 + 32;
    let inner = PrecisionContext::new(p, ctx.guard_bits)?;
    let t = Complex::with_val(p, t);
    // z = (3t/2)^{2/3}
    let z = Complex::with_val(p, &t * 3u32) / 2u32;
    let z = Complex::with_val(p, z.ln_ref()) * 2u32 / 3u32;
    let z = z.exp();
    // K = (2/3)^{1/6} / (2√π)
    let k = Float::with_val(p, Float::with_val(p, 2) / 3u32).pow(Float::with_val(p, 6).recip())
        / (Float::with_val(p, Constant::Pi).sqrt() * 2u32);
    let im = t.imag().clone();
    let value = if im.is_zero() && balanced_on_axis {
        airy_bi(&z, &inner)? / (k * 2u32)
    } else if im < 0 || (im.is_zero() && !balanced_on_axis) {
        let wz = Complex::with_val(p, &z * omega(p, 1));
        airy_ai(&wz, &inner)? * phase(p, 1, 6) / k
    } else {
        let wz = Complex::with_val(p, &z * omega(p, -1));
        airy_ai(&wz, &inner)? * phase(p, -1, 6) / k
    };
    // divide by e^{t} t^{-1/6}
    let lt = Complex::with_val(p, t.ln_ref());
    let front = (Complex::with_val(p, &lt / 6u32) - &t).exp();
    Ok(Complex::with_val(ctx.working(), value * front))
}

/// y'' + 2y' + (1 + m²/x) y = 1/x, multiplied through by x.
pub fn resonant_ode(m2: &rug::Rational, prec: u32) -> LinearOde2 {
    let c = |v: f64| Complex::with_val(prec, v);
    LinearOde2 {
        p2: vec![c(0.0), c(1.0)],
        p1: vec![c(0.0), c(2.0)],
        p0: vec![Complex::with_val(prec, Float::with_val(prec, m2)), c(1.0)],
        q: vec![c(1.0)],
        singular_points: vec![Complex64::new(0.0, 0.0)],
    }
}

/// Truncated series Σ_{k≤n} a_k x^{-k} and its derivative (offset 0).
fn series_state(table: &CoefficientTable, x: &Complex, n: usize, prec: u32) -> OdeState {
    let off = table.offset as i64;
    let inv = Complex::with_val(prec, x.recip_ref());
    let mut pw = Complex::with_val(prec, 1);
    for _ in 0..off {
        pw *= &inv;
    }
    let mut y = Complex::new(prec);
    let mut dy = Complex::new(prec);
    for k in 0..=n {
        let a = table.float(k, prec);
        let t = Complex::with_val(prec, &pw * &a);
        let e = k as i64 + off;
        dy -= Complex::with_val(prec, &t * &inv) * e;
        y += t;
        pw *= &inv;
    }
    OdeState {
        x: Complex::with_val(prec, x),
        y,
        dy,
    }
}

/// Resonant-family solution fixed by its optimally truncated series at the
/// anchor 4r·e^{iθ_a}, integrated radially in to |x| = r and then along the
/// circle to each requested angle.
///
/// Returns (x, y, y') at every requested angle, in input order.
pub fn resonant_arc(
    table: &CoefficientTable,
    m2: &rug::Rational,
    r: f64,
    anchor_angle: f64,
    angles: &[f64],
    ctx: &PrecisionContext,
) -> Result<Vec<OdeState>> {
    let anchor = 4.0 * r;
    if (table.k_max() as f64) < anchor + 10.0 {
        return Err(Error::TableTooShort {
            k: table.k_max(),
            needed: (anchor + 10.0).ceil() as usize,
        });
    }
    // a homogeneous error at the anchor is amplified by e^{anchor − r}
    let radial = ctx.raised_to(ctx.bits + ((anchor) * LOG2_E).ceil() as u32);
    let p = radial.working();
    let (ca, sa) = (anchor_angle.cos(), anchor_angle.sin());
    let xa = Complex::with_val(p, (anchor * ca, anchor * sa));
    let n = crate::truncation::least_term_index(table, &xa, &radial)?;
    let start = series_state(table, &xa, n, p);
    let integ = TaylorIntegrator::default();
    let ode = resonant_ode(m2, p);
    let mid = integ.integrate_path(&ode, start, &[Complex::with_val(p, (r * ca, r * sa))], &radial)?;
    let arc_ctx = ctx.raised_to(ctx.bits + (r * LOG2_E).ceil() as u32);
    let q = arc_ctx.working();
    let base = &mid[0];
    let base = OdeState {
        x: Complex::with_val(q, &base.x),
        y: Complex::with_val(q, &base.y),
        dy: Complex::with_val(q, &base.dy),
    };
    let ode = resonant_ode(m2, q);
    let arc_integ = TaylorIntegrator {
        max_step: r / 16.0,
        ..Default::default()
    };
    let mut out: Vec<Option<OdeState>> = vec![None; angles.len()];
    for sign in [1.0, -1.0] {
        let rel = |i: usize| (angles[i] - anchor_angle) * sign;
        let mut idx: Vec<usize> = (0..angles.len()).filter(|&i| rel(i) > 0.0).collect();
        idx.sort_by(|&a, &b| rel(a).total_cmp(&rel(b)));
        if idx.is_empty() {
            continue;
        }
        let mut path = Vec::new();
        let mut last = anchor_angle;
        for &i in &idx {
            // intermediate arc points keep chords short
            let th = angles[i];
            let steps = (((th - last).abs() * r) / (r / 32.0)).ceil().max(1.0) as usize;
            for s in 1..=steps {
                let a = last + (th - last) * s as f64 / steps as f64;
                path.push((a, s == steps));
            }
            last = th;
        }
        let pts: Vec<Complex> = path
            .iter()
            .map(|(a, _)| Complex::with_val(q, (r * a.cos(), r * a.sin())))
            .collect();
        let states = arc_integ.integrate_path(&ode, base.clone(), &pts, &arc_ctx)?;
        let mut it = idx.iter();
        for (st, (_, is_target)) in states.into_iter().zip(&path) {
            if *is_target {
                out[*it.next().unwrap()] = Some(st);
            }
        }
    }
    for (i, a) in angles.iter().enumerate() {
        if *a == anchor_angle {
            out[i] = Some(base.clone());
        }
    }
    Ok(out.into_iter().map(|s| s.unwrap()).collect())
}

pub fn log_state(s: &OdeState) -> String {
    format!("x={} y={}", c64(&s.x), c64(&s.y))
}
