use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float};

use super::precision::PrecisionContext;
use crate::error::{Error, Result};

/// Spouge's approximation with coefficients precomputed for one precision.
///
/// Γ(z+1) = (z+a)^{z+1/2} e^{-(z+a)} [c_0 + Σ_{k=1}^{a-1} c_k/(z+k)],
/// relative error below a^{-1/2}(2π)^{-(a+1/2)} for Re(z+a) > 0.
#[derive(Debug, Clone)]
pub struct Spouge {
    a: u32,
    prec: u32,
    out_prec: u32,
    coeffs: Vec<Float>,
}

impl Spouge {
    pub fn new(ctx: &PrecisionContext) -> Self {
        let target = ctx.working() + 8;
        // (2π)^{-a} < 2^{-target}  =>  a > target / log2(2π)
        let a = (target as f64 / (2.0 * std::f64::consts::PI).log2()).ceil() as u32 + 2;
        // the alternating sum loses roughly a·log2(e) bits
        let prec = target + (a as f64 * 1.5) as u32 + 32;
        let af = Float::with_val(prec, a);
        let mut coeffs = Vec::with_capacity(a as usize);
        let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
        coeffs.push(two_pi.sqrt());
        let mut fact = Float::with_val(prec, 1); // (k-1)!
        for k in 1..a {
            if k > 1 {
                fact *= k - 1;
            }
            let base = Float::with_val(prec, &af - k);
            let pw = base.clone().pow(Float::with_val(prec, k) - 0.5f64);
            let ex = base.exp();
            let mut c = pw * ex / &fact;
            if k % 2 == 0 {
                c = -c;
            }
            coeffs.push(c);
        }
        Spouge {
            a,
            prec,
            out_prec: ctx.working(),
            coeffs,
        }
    }

    /// Γ(z+1) for Re z > -1/2.
    fn gamma_shifted(&self, z: &Complex) -> Complex {
        let p = self.prec;
        let z = Complex::with_val(p, z);
        let mut sum = Complex::with_val(p, &self.coeffs[0]);
        for k in 1..self.a {
            let d = Complex::with_val(p, &z + k);
            sum += Complex::with_val(p, &self.coeffs[k as usize] / d);
        }
        let za = Complex::with_val(p, &z + self.a);
        let expo = Complex::with_val(p, &z + 0.5f64);
        let lg = Complex::with_val(p, za.ln_ref());
        let log_front = expo * lg - &za;
        let front = log_front.exp();
        front * sum
    }

    pub fn gamma(&self, z: &Complex) -> Result<Complex> {
        let p = self.prec;
        if z.imag().is_zero() {
            let re = z.real();
            if re.is_integer() && *re <= 0 {
                return Err(Error::GammaPole(re.to_f64() as i64));
            }
        }
        let z = Complex::with_val(p, z);
        let out = if *z.real() < 0.5f64 {
            // Γ(z) = π / (sin(πz) Γ(1-z))
            let pi = Float::with_val(p, Constant::Pi);
            let one_minus = Complex::with_val(p, 1 - &z);
            let g = self.gamma_shifted(&Complex::with_val(p, &one_minus - 1u32));
            let s = Complex::with_val(p, &z * &pi).sin();
            Complex::with_val(p, pi / (s * g))
        } else {
            self.gamma_shifted(&Complex::with_val(p, &z - 1u32))
        };
        Ok(Complex::with_val(self.out_prec, out))
    }
}

pub fn gamma_complex(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    Spouge::new(ctx).gamma(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(128, 32).unwrap()
    }

    fn rel(a: &Complex, b: &Complex) -> f64 {
        let d = Complex::with_val(a.prec().0, a - b);
        (d.abs().real().to_f64()) / b.clone().abs().real().to_f64()
    }

    #[test]
    fn small_integers_and_half() {
        let c = ctx();
        let sp = Spouge::new(&c);
        let one = sp.gamma(&c.complex(1.0, 0.0)).unwrap();
        assert!(rel(&one, &c.complex(1.0, 0.0)) < 1e-36);
        let five = sp.gamma(&c.complex(5.0, 0.0)).unwrap();
        assert!(rel(&five, &c.complex(24.0, 0.0)) < 1e-36);
        let half = sp.gamma(&c.complex(0.5, 0.0)).unwrap();
        let sqrt_pi = Complex::with_val(c.working(), c.pi().sqrt());
        assert!(rel(&half, &sqrt_pi) < 1e-36);
    }

    #[test]
    fn poles_are_errors() {
        let c = ctx();
        assert_eq!(
            gamma_complex(&c.complex(0.0, 0.0), &c),
            Err(Error::GammaPole(0))
        );
        assert_eq!(
            gamma_complex(&c.complex(-3.0, 0.0), &c),
            Err(Error::GammaPole(-3))
        );
    }

    #[test]
    fn large_argument_matches_factorial() {
        let c = PrecisionContext::new(256, 64).unwrap();
        let g = gamma_complex(&c.complex(301.0, 0.0), &c).unwrap();
        let f = Float::with_val(c.working(), rug::Integer::from(rug::Integer::factorial(300)));
        let exact = Complex::with_val(c.working(), f);
        let d = Complex::with_val(c.working(), &g - &exact);
        let r = Float::with_val(c.working(), d.abs().real() / exact.abs().real());
        assert!(r < Float::with_val(64, 2).pow(-250), "rel err {}", r.to_f64());
    }

    #[test]
    fn matches_mpfr_on_real_axis() {
        let c = PrecisionContext::new(512, 64).unwrap();
        for &v in &[0.1, 1.7, 3.25, 17.5, -2.5, -0.3] {
            let g = gamma_complex(&c.complex(v, 0.0), &c).unwrap();
            let m = Float::with_val(c.working(), v).gamma();
            let d = Float::with_val(c.working(), g.real() - &m).abs() / m.clone().abs();
            assert!(d < Float::with_val(64, 2).pow(-500), "x={v}");
            assert!(g.imag().clone().abs() < Float::with_val(64, 2).pow(-500) * m.abs());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn recurrence_holds(re in -20.0f64..40.0, im in -30.0f64..30.0) {
            prop_assume!(im.abs() > 1e-3 || (re - re.round()).abs() > 1e-3);
            let c = ctx();
            let sp = Spouge::new(&c);
            let z = c.complex(re, im);
            let g = sp.gamma(&z).unwrap();
            let g1 = sp.gamma(&Complex::with_val(c.working(), &z + 1u32)).unwrap();
            let zg = Complex::with_val(c.working(), &z * &g);
            prop_assert!(rel(&g1, &zg) < 2f64.powi(-64));
        }
    }
}
