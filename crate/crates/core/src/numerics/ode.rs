use num_complex::Complex64;
use rug::{Complex, Float};

use super::precision::{c64, PrecisionContext};
use crate::error::{Error, Result};

/// P2(x) y'' + P1(x) y' + P0(x) y = Q(x) with polynomial coefficients
/// (ascending powers of x).
#[derive(Debug, Clone)]
pub struct LinearOde2 {
    pub p2: Vec<Complex>,
    pub p1: Vec<Complex>,
    pub p0: Vec<Complex>,
    pub q: Vec<Complex>,
    /// Zeros of P2; steps stay a fixed fraction away from them.
    pub singular_points: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct OdeState {
    pub x: Complex,
    pub y: Complex,
    pub dy: Complex,
}

/// Coefficients of P(x0 + s) in powers of s.
fn taylor_shift(poly: &[Complex], x0: &Complex, prec: u32) -> Vec<Complex> {
    let mut c: Vec<Complex> = poly.iter().map(|a| Complex::with_val(prec, a)).collect();
    let n = c.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            let t = Complex::with_val(prec, &c[j + 1] * x0);
            c[j] += t;
        }
    }
    c
}

/// (k+1)(k+2)…(k+i)
fn rising(k: usize, i: usize) -> u64 {
    (1..=i).map(|j| (k + j) as u64).product()
}

#[derive(Debug, Clone)]
pub struct TaylorIntegrator {
    /// Step is at most this fraction of the distance to the nearest singular point.
    pub radius_fraction: f64,
    pub max_step: f64,
    pub max_order: usize,
}

impl Default for TaylorIntegrator {
    fn default() -> Self {
        TaylorIntegrator {
            radius_fraction: 0.125,
            max_step: f64::INFINITY,
            max_order: 60_000,
        }
    }
}

impl TaylorIntegrator {
    /// One Taylor step of length h (complex). None when the series did not
    /// settle within `max_order` terms.
    fn step(&self, ode: &LinearOde2, s: &OdeState, h: &Complex, prec: u32) -> Result<Option<OdeState>> {
        let sh: Vec<Vec<Complex>> = [&ode.p0, &ode.p1, &ode.p2]
            .iter()
            .map(|p| taylor_shift(p, &s.x, prec))
            .collect();
        let q = taylor_shift(&ode.q, &s.x, prec);
        let lead = &sh[2][0];
        if lead.clone().abs().real().is_zero() {
            return Err(Error::IntegrationNonconvergence(format!(
                "singular point at {}",
                c64(&s.x)
            )));
        }
        let mut c: Vec<Complex> = vec![Complex::with_val(prec, &s.y), Complex::with_val(prec, &s.dy)];
        let mut hp = Complex::with_val(prec, h); // h^n
        let mut y = Complex::with_val(prec, &s.y);
        y += Complex::with_val(prec, &s.dy * h);
        let mut dy = Complex::with_val(prec, &s.dy);
        let mut hprev = Complex::with_val(prec, 1); // h^{n-1}
        let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32)));
        let mut quiet = 0;
        let mut scale = Float::with_val(prec, y.abs_ref());
        scale = scale.max(&Float::with_val(prec, s.y.abs_ref()));
        for n in 0..self.max_order {
            // coefficient of s^n gives c_{n+2}
            let mut acc = q.get(n).map(|v| Complex::with_val(prec, v)).unwrap_or_else(|| Complex::new(prec));
            for (i, coeffs) in sh.iter().enumerate() {
                for (l, p) in coeffs.iter().enumerate() {
                    if (i, l) == (2, 0) || l > n {
                        continue;
                    }
                    let k = n - l;
                    let t = Complex::with_val(prec, p * &c[k + i]) * rising(k, i);
                    acc -= t;
                }
            }
            let den = Complex::with_val(prec, lead * rising(n, 2));
            let next = acc / den;
            // c_{n+2} h^{n+2} and its derivative contribution (n+2) c_{n+2} h^{n+1}
            hprev *= h; // h^{n+1}
            hp *= h; // h^{n+2}
            let d_term = Complex::with_val(prec, &next * &hprev) * (n as u32 + 2);
            let term = Complex::with_val(prec, &next * &hp);
            y += &term;
            dy += &d_term;
            let tmag = Float::with_val(prec, term.abs_ref());
            if tmag > scale {
                scale = tmag.clone();
            }
            c.push(next);
            if tmag <= Float::with_val(prec, &scale * &eps) && n > 4 {
                quiet += 1;
                if quiet >= 3 {
                    let x = Complex::with_val(prec, &s.x + h);
                    return Ok(Some(OdeState { x, y, dy }));
                }
            } else {
                quiet = 0;
            }
        }
        Ok(None)
    }

    /// Integrate along the polyline through `path` (the start point is `start.x`);
    /// returns the state at every path vertex.
    pub fn integrate_path(
        &self,
        ode: &LinearOde2,
        start: OdeState,
        path: &[Complex],
        ctx: &PrecisionContext,
    ) -> Result<Vec<OdeState>> {
        let prec = ctx.working();
        let mut s = OdeState {
            x: Complex::with_val(prec, &start.x),
            y: Complex::with_val(prec, &start.y),
            dy: Complex::with_val(prec, &start.dy),
        };
        let mut out = Vec::with_capacity(path.len());
        for target in path {
            let target = Complex::with_val(prec, target);
            loop {
                let rem = Complex::with_val(prec, &target - &s.x);
                let dist = rem.clone().abs().real().to_f64();
                if dist == 0.0 {
                    break;
                }
                let here = c64(&s.x);
                let sing = ode
                    .singular_points
                    .iter()
                    .map(|z| (z - here).norm())
                    .fold(f64::INFINITY, f64::min);
                let mut len = dist.min(self.max_step).min(self.radius_fraction * sing);
                let mut done = false;
                for _ in 0..40 {
                    let h = if len >= dist {
                        rem.clone()
                    } else {
                        Complex::with_val(prec, &rem * (len / dist))
                    };
                    if let Some(next) = self.step(ode, &s, &h, prec)? {
                        s = next;
                        if len >= dist {
                            s.x = target.clone();
                        }
                        done = true;
                        break;
                    }
                    len /= 2.0;
                }
                if !done {
                    return Err(Error::IntegrationNonconvergence(format!(
                        "Taylor series did not settle near {}",
                        here
                    )));
                }
            }
            out.push(s.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cplx(prec: u32, v: f64) -> Complex {
        Complex::with_val(prec, v)
    }

    #[test]
    fn shift_of_quadratic() {
        let p = 128;
        // 1 + 2x + 3x² at x0 = 2: 17 + 14 s + 3 s²
        let poly = vec![cplx(p, 1.0), cplx(p, 2.0), cplx(p, 3.0)];
        let sh = taylor_shift(&poly, &cplx(p, 2.0), p);
        let v: Vec<f64> = sh.iter().map(|z| z.real().to_f64()).collect();
        assert_eq!(v, vec![17.0, 14.0, 3.0]);
    }

    #[test]
    fn harmonic_oscillator_on_a_loop() {
        // y'' + y = 0, y(0)=0, y'(0)=1 → sin; around a closed path back to 3
        let ctx = PrecisionContext::new(200, 64).unwrap();
        let p = ctx.working();
        let ode = LinearOde2 {
            p2: vec![cplx(p, 1.0)],
            p1: vec![],
            p0: vec![cplx(p, 1.0)],
            q: vec![],
            singular_points: vec![],
        };
        let integ = TaylorIntegrator {
            max_step: 1.0,
            ..Default::default()
        };
        let start = OdeState {
            x: cplx(p, 0.0),
            y: cplx(p, 0.0),
            dy: cplx(p, 1.0),
        };
        let path = [ctx.complex(3.0, 0.0), ctx.complex(3.0, 2.0), ctx.complex(1.0, 1.0), ctx.complex(3.0, 0.0)];
        let states = integ.integrate_path(&ode, start, &path, &ctx).unwrap();
        let exact = Float::with_val(p, 3).sin();
        for i in [0, 3] {
            let d = Complex::with_val(p, &states[i].y - &exact).abs().real().to_f64();
            assert!(d < 1e-55, "{d}");
        }
        let z = ctx.complex(3.0, 2.0);
        let exact = Complex::with_val(p, z.cos_ref());
        let d = Complex::with_val(p, &states[1].dy - &exact).abs().real().to_f64();
        assert!(d < 1e-55);
    }

    #[test]
    fn inhomogeneous_regular_singular_equation() {
        // x y' ... written as second order: x y'' + y' = 0 has y = ln x;
        // add Q: x y'' + y' = 1 has particular y = x. Check y = x + ln x.
        let ctx = PrecisionContext::new(160, 64).unwrap();
        let p = ctx.working();
        let ode = LinearOde2 {
            p2: vec![cplx(p, 0.0), cplx(p, 1.0)],
            p1: vec![cplx(p, 1.0)],
            p0: vec![],
            q: vec![cplx(p, 1.0)],
            singular_points: vec![Complex64::new(0.0, 0.0)],
        };
        let start = OdeState {
            x: cplx(p, 1.0),
            y: cplx(p, 1.0),
            dy: cplx(p, 2.0),
        };
        let integ = TaylorIntegrator {
            radius_fraction: 0.5,
            ..Default::default()
        };
        let states = integ
            .integrate_path(&ode, start, &[ctx.complex(0.0, 2.0)], &ctx)
            .unwrap();
        let z = ctx.complex(0.0, 2.0);
        let exact = Complex::with_val(p, z.ln_ref()) + &z;
        let d = Complex::with_val(p, &states[0].y - &exact).abs().real().to_f64();
        assert!(d < 1e-45, "{d}");
    }
}
