use num_complex::Complex64;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use super::precision::{c64, PrecisionContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideTag {
    Above,
    Below,
    On,
}

/// Polyline from the vertices, optionally followed by a terminal ray.
#[derive(Debug, Clone)]
pub struct Contour {
    pub vertices: Vec<Complex64>,
    pub ray: Option<f64>,
    /// One tag per segment (the terminal ray counts as the last segment).
    pub side_tags: Vec<SideTag>,
    pub singular_rays: Vec<f64>,
}

fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let mut r = a.rem_euclid(t);
    if r > std::f64::consts::PI {
        r -= t;
    }
    r
}

impl Contour {
    pub fn new(vertices: Vec<Complex64>, ray: Option<f64>, singular_rays: &[f64]) -> Result<Contour> {
        if vertices.is_empty() {
            return Err(Error::InvalidContour("no vertices".into()));
        }
        if vertices.len() == 1 && ray.is_none() {
            return Err(Error::InvalidContour("a single point is not a contour".into()));
        }
        let mut c = Contour {
            vertices,
            ray,
            side_tags: vec![],
            singular_rays: singular_rays.to_vec(),
        };
        for (a, b) in c.polyline() {
            if a == b {
                return Err(Error::InvalidContour("repeated vertex".into()));
            }
            // |p|² is convex along a segment, so it increases iff it does at the start
            let slope = (a.conj() * (b - a)).re;
            if slope < 0.0 || (a != Complex64::new(0.0, 0.0) && slope == 0.0) {
                return Err(Error::InvalidContour(format!("|p| not increasing on {a} -> {b}")));
            }
        }
        if let Some(th) = ray {
            let v = *c.vertices.last().unwrap();
            let slope = (v.conj() * Complex64::from_polar(1.0, th)).re;
            if slope < 0.0 || (v.norm() > 0.0 && slope == 0.0) {
                return Err(Error::InvalidContour("|p| not increasing on the terminal ray".into()));
            }
        }
        for &phi in singular_rays {
            let n = c.crossings(phi);
            if n > 1 {
                return Err(Error::InvalidContour(format!(
                    "crosses the singular ray at angle {phi} {n} times"
                )));
            }
        }
        c.side_tags = c.compute_tags();
        Ok(c)
    }

    pub fn ray_from_origin(angle: f64, singular_rays: &[f64]) -> Result<Contour> {
        Contour::new(vec![Complex64::new(0.0, 0.0)], Some(angle), singular_rays)
    }

    fn polyline(&self) -> Vec<(Complex64, Complex64)> {
        self.vertices.windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn crossings(&self, phi: f64) -> usize {
        let rot = Complex64::from_polar(1.0, -phi);
        let side = |z: Complex64| {
            let im = (z * rot).im;
            if im.abs() < 1e-300 {
                0
            } else {
                im.signum() as i32
            }
        };
        let mut count = 0;
        for (a, b) in self.polyline() {
            let (sa, sb) = (side(a), side(b));
            if sa * sb < 0 {
                let (ra, rb) = (a * rot, b * rot);
                let t = ra.im / (ra.im - rb.im);
                if ra.re + t * (rb.re - ra.re) > 0.0 {
                    count += 1;
                }
            }
        }
        if let Some(th) = self.ray {
            let v = *self.vertices.last().unwrap() * rot;
            let d = Complex64::from_polar(1.0, th - phi);
            if v.im * d.im < 0.0 {
                let s = -v.im / d.im;
                if v.re + s * d.re > 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    fn compute_tags(&self) -> Vec<SideTag> {
        let mut mids: Vec<Complex64> = self.polyline().iter().map(|(a, b)| (a + b) / 2.0).collect();
        if let Some(th) = self.ray {
            mids.push(*self.vertices.last().unwrap() + Complex64::from_polar(1.0, th));
        }
        mids.iter()
            .map(|m| {
                let arg = m.arg();
                let reference = self
                    .singular_rays
                    .iter()
                    .copied()
                    .min_by(|a, b| wrap(arg - a).abs().total_cmp(&wrap(arg - b).abs()))
                    .unwrap_or(0.0);
                let d = wrap(arg - reference);
                if d.abs() < 1e-12 {
                    SideTag::On
                } else if d > 0.0 {
                    SideTag::Above
                } else {
                    SideTag::Below
                }
            })
            .collect()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<Float>,
    pub weights: Vec<Float>,
}

impl GaussLegendre {
    pub fn new(n: usize, prec: u32) -> Self {
        let p = prec + 16;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let legendre = |x: &Float| -> (Float, Float) {
            let mut p0 = Float::with_val(p, 1);
            let mut p1 = x.clone();
            for k in 1..n {
                let kf = k as u32;
                let t = Float::with_val(p, x * &p1) * (2 * kf + 1);
                let p2 = (t - Float::with_val(p, &p0 * kf)) / (kf + 1);
                p0 = p1;
                p1 = p2;
            }
            // P_n'(x) = n (x P_n − P_{n−1}) / (x² − 1)
            let num = (Float::with_val(p, x * &p1) - &p0) * n as u32;
            let den = Float::with_val(p, x.square_ref()) - 1u32;
            (p1, num / den)
        };
        let eps = Float::with_val(p, Float::i_exp(1, -(prec as i32) - 4));
        for i in 0..n.div_ceil(2) {
            let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut x = Float::with_val(p, guess);
            for _ in 0..100 {
                let (pn, dpn) = legendre(&x);
                let dx = pn / &dpn;
                x -= &dx;
                if dx.abs() < eps {
                    break;
                }
            }
            let (_, dpn) = legendre(&x);
            let one_minus = 1u32 - Float::with_val(p, x.square_ref());
            let w = Float::with_val(p, 2u32) / (one_minus * dpn.square());
            nodes.push(Float::with_val(prec, &x));
            weights.push(Float::with_val(prec, &w));
            if n % 2 == 1 && i == n / 2 {
                break;
            }
            nodes.push(Float::with_val(prec, -x));
            weights.push(Float::with_val(prec, w));
        }
        GaussLegendre { nodes, weights }
    }
}

const MAX_DEPTH: u32 = 48;

/// Reusable Laplace quadrature at one precision.
#[derive(Debug, Clone)]
pub struct LaplaceQuadrature {
    rule: GaussLegendre,
    prec: u32,
}

impl LaplaceQuadrature {
    pub fn new(ctx: &PrecisionContext) -> Self {
        let prec = ctx.working();
        let n = ((prec / 6) as usize).clamp(20, 200);
        LaplaceQuadrature {
            rule: GaussLegendre::new(n, prec),
            prec,
        }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    fn panel<G>(&self, g: &G, t0: &Float, t1: &Float) -> Result<Complex>
    where
        G: Fn(&Float) -> Result<Complex>,
    {
        let p = self.prec;
        let mid = Float::with_val(p, t0 + t1) / 2u32;
        let half = Float::with_val(p, t1 - t0) / 2u32;
        let mut acc = Complex::new(p);
        for (x, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let t = Float::with_val(p, &half * x) + &mid;
            acc += g(&t)? * w;
        }
        Ok(acc * half)
    }

    fn adaptive<G>(&self, g: &G, t0: Float, t1: Float, tol: Float) -> Result<Complex>
    where
        G: Fn(&Float) -> Result<Complex>,
    {
        let p = self.prec;
        let whole = self.panel(g, &t0, &t1)?;
        let mut stack = vec![(t0, t1, whole, tol, 0u32)];
        let mut total = Complex::new(p);
        while let Some((a, b, whole, tol, depth)) = stack.pop() {
            let m = Float::with_val(p, &a + &b) / 2u32;
            let left = self.panel(g, &a, &m)?;
            let right = self.panel(g, &m, &b)?;
            let both = Complex::with_val(p, &left + &right);
            let diff = Float::with_val(p, Complex::with_val(p, &both - &whole).abs_ref());
            if diff <= tol {
                total += both;
            } else if depth >= MAX_DEPTH {
                return Err(Error::QuadratureNonconvergence(format!(
                    "panel [{}, {}] still off by {:.3e} at depth {depth}",
                    a.to_f64(),
                    b.to_f64(),
                    diff.to_f64()
                )));
            } else {
                let half_tol = tol / 2u32;
                stack.push((a, m.clone(), left, half_tol.clone(), depth + 1));
                stack.push((m, b, right, half_tol, depth + 1));
            }
        }
        Ok(total)
    }

    /// ∫_c e^{-xp} f(p) dp to absolute tolerance `tol`.
    pub fn integrate<F>(&self, f: &F, c: &Contour, x: &Complex, tol: &Float) -> Result<Complex>
    where
        F: Fn(&Complex) -> Result<Complex>,
    {
        let p = self.prec;
        let x = Complex::with_val(p, x);
        let integrand = |pt: &Complex| -> Result<Complex> {
            let e = Complex::with_val(p, -Complex::with_val(p, &x * pt)).exp();
            Ok(e * f(pt)?)
        };
        let segs: Vec<(Complex64, Complex64)> = c.polyline();
        let n_parts = segs.len() + usize::from(c.ray.is_some());
        let share = Float::with_val(p, tol / n_parts as u32);
        let mut total = Complex::new(p);
        for (a, b) in segs {
            let a = Complex::with_val(p, (a.re, a.im));
            let b = Complex::with_val(p, (b.re, b.im));
            let d = Complex::with_val(p, &b - &a);
            let g = |t: &Float| -> Result<Complex> {
                let pt = Complex::with_val(p, &d * t) + &a;
                Ok(integrand(&pt)? * &d)
            };
            total += self.adaptive(&g, Float::with_val(p, 0), Float::with_val(p, 1), share.clone())?;
        }
        if let Some(th) = c.ray {
            total += self.ray_integral(&integrand, *c.vertices.last().unwrap(), th, &x, &share)?;
        }
        Ok(total)
    }

    fn ray_integral<G>(&self, integrand: &G, v: Complex64, th: f64, x: &Complex, tol: &Float) -> Result<Complex>
    where
        G: Fn(&Complex) -> Result<Complex>,
    {
        let p = self.prec;
        let dir = Complex::with_val(p, (Float::with_val(p, th).cos(), Float::with_val(p, th).sin()));
        let decay = Complex::with_val(p, x * &dir).real().to_f64();
        if decay <= 0.0 {
            return Err(Error::NonDecayingRay {
                angle: th,
                x: format!("{}", c64(x)),
            });
        }
        let v = Complex::with_val(p, (v.re, v.im));
        let g = |s: &Float| -> Result<Complex> {
            let pt = Complex::with_val(p, &dir * s) + &v;
            Ok(integrand(&pt)? * &dir)
        };
        // dyadic panels [0, s0], [s0, 2s0], … until the integrand bound falls below tol/100
        let s0 = (1.0 / decay).min(1.0);
        let target = Float::with_val(p, tol / 100u32) * decay;
        let mut ends = vec![Float::with_val(p, s0)];
        let mut quiet = 0;
        loop {
            let s = ends.last().unwrap().clone();
            let mag = Float::with_val(p, g(&s)?.abs_ref());
            if mag < target {
                quiet += 1;
                if quiet >= 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
            if ends.len() > 400 {
                return Err(Error::QuadratureNonconvergence("terminal ray never decays below tolerance".into()));
            }
            ends.push(s * 2u32);
        }
        let share = Float::with_val(p, tol / ends.len() as u32);
        let mut total = Complex::new(p);
        let mut start = Float::with_val(p, 0);
        for e in ends {
            total += self.adaptive(&g, start, e.clone(), share.clone())?;
            start = e;
        }
        Ok(total)
    }
}

pub fn quad_laplace<F>(f: F, c: &Contour, x: &Complex, tol: &Float, ctx: &PrecisionContext) -> Result<Complex>
where
    F: Fn(&Complex) -> Result<Complex>,
{
    LaplaceQuadrature::new(ctx).integrate(&f, c, x, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(128, 64).unwrap()
    }

    fn err(a: &Complex, b: &Complex) -> f64 {
        Complex::with_val(a.prec().0, a - b).abs().real().to_f64()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = GaussLegendre::new(12, 200);
        let mut s = Float::with_val(200, 0);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            s += Float::with_val(200, rug::ops::Pow::pow(x.clone(), 22u32)) * w;
        }
        assert!((s.to_f64() - 2.0 / 23.0).abs() < 1e-30);
        let wsum: f64 = gl.weights.iter().map(|w| w.to_f64()).sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_and_linear_on_real_ray() {
        let c = ctx();
        let ray = Contour::ray_from_origin(0.0, &[]).unwrap();
        let tol = c.tolerance();
        let v = quad_laplace(|p| Ok(Complex::with_val(p.prec(), 1)), &ray, &c.complex(2.0, 0.0), &tol, &c).unwrap();
        assert!(err(&v, &c.complex(0.5, 0.0)) < 1e-30);
        let v = quad_laplace(|p| Ok(p.clone()), &ray, &c.complex(3.0, 0.0), &tol, &c).unwrap();
        let ninth = Complex::with_val(c.working(), Float::with_val(c.working(), 9).recip());
        assert!(err(&v, &ninth) < 1e-30);
    }

    #[test]
    fn non_decaying_ray_is_an_error() {
        let c = ctx();
        let ray = Contour::ray_from_origin(std::f64::consts::PI, &[]).unwrap();
        let r = quad_laplace(|p| Ok(p.clone()), &ray, &c.complex(1.0, 0.0), &c.tolerance(), &c);
        assert!(matches!(r, Err(Error::NonDecayingRay { .. })));
    }

    #[test]
    fn contour_validation() {
        let z = |re, im| Complex64::new(re, im);
        assert!(Contour::new(vec![z(0.0, 0.0), z(1.0, 0.0), z(0.5, 0.0)], None, &[]).is_err());
        // crosses the real axis twice
        let zig = vec![z(0.0, 0.0), z(1.0, 0.5), z(2.0, -0.5), z(3.0, 0.5)];
        assert!(Contour::new(zig.clone(), None, &[0.0]).is_err());
        assert!(Contour::new(zig, None, &[]).is_ok());
        let c = Contour::new(vec![z(0.0, 0.0), z(1.0, 0.3)], Some(0.2), &[0.0]).unwrap();
        assert_eq!(c.side_tags, vec![SideTag::Above, SideTag::Above]);
        let on = Contour::ray_from_origin(0.0, &[0.0]).unwrap();
        assert_eq!(on.side_tags, vec![SideTag::On]);
    }

    #[test]
    fn pole_above_matches_principal_value_plus_residue() {
        // Collapsing a contour that passes above p = 1 onto the axis leaves a
        // clockwise half-circle: −iπ·Res = −iπ·(−e^{-x}). So the value is
        // PV + iπ e^{-x}, with PV computed independently below by folding
        // the integrand symmetrically about the pole.
        let c = PrecisionContext::new(160, 32).unwrap();
        let p = c.working();
        let x = c.complex(10.0, 0.0);
        let f = |q: &Complex| Ok(Complex::with_val(q.prec(), 1 - q.clone()).recip());
        let above = Contour::new(
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.5)],
            Some(0.0),
            &[0.0],
        )
        .unwrap();
        let lq = LaplaceQuadrature::new(&c);
        let tol = c.tolerance();
        let v = lq.integrate(&f, &above, &x, &tol).unwrap();
        // PV via u ∈ (0, 1]: ∫_0^1 [e^{-x(1-u)} - e^{-x(1+u)}]/u du + ∫_2^∞ e^{-xp}/(1-p) dp
        let sym = |t: &Float| -> Result<Complex> {
            let u = Float::with_val(p, t);
            let a = Float::with_val(p, -Float::with_val(p, 1 - u.clone()) * 10u32).exp();
            let b = Float::with_val(p, -Float::with_val(p, 1 + u.clone()) * 10u32).exp();
            Ok(Complex::with_val(p, (a - b) / u))
        };
        let one = lq.adaptive(&sym, Float::with_val(p, 0), Float::with_val(p, 1), tol.clone()).unwrap();
        let tail = Contour::new(vec![Complex64::new(2.0, 0.0)], Some(0.0), &[]).unwrap();
        let rest = lq.integrate(&f, &tail, &x, &tol).unwrap();
        let pv = Complex::with_val(p, &one + &rest);
        let e10 = Float::with_val(p, -10).exp();
        let expected = Complex::with_val(p, (pv.real(), Float::with_val(p, c.pi() * e10)));
        assert!(err(&v, &expected) < 1e-25, "{} vs {}", c64(&v), c64(&expected));
    }

    #[test]
    fn deformation_invariance() {
        let c = ctx();
        let x = c.complex(5.0, 1.0);
        let g = |q: &Complex| Ok(Complex::with_val(q.prec(), 2u32 + q.clone()).recip());
        let tol = c.tolerance();
        let a = quad_laplace(g, &Contour::ray_from_origin(0.0, &[]).unwrap(), &x, &tol, &c).unwrap();
        let bent = Contour::new(
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, -0.4), Complex64::new(2.0, -0.3)],
            Some(-0.1),
            &[],
        )
        .unwrap();
        let b = quad_laplace(g, &bent, &x, &tol, &c).unwrap();
        assert!(err(&a, &b) < 10.0 * tol.to_f64());
    }
}
