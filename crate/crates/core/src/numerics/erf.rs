use rug::float::Constant;
use rug::{Complex, Float};

use super::precision::PrecisionContext;

const SWITCH_RADIUS: f64 = 4.0;

/// erf(z) = 2π^{-1/2} ∫_0^z e^{-t²} dt.
pub fn erf_complex(z: &Complex, ctx: &PrecisionContext) -> Complex {
    let out = ctx.working();
    let zr = z.real().to_f64();
    let za = z.clone().abs().real().to_f64();
    if za <= SWITCH_RADIUS || zr.abs() < 2.0 {
        return Complex::with_val(out, maclaurin(z, ctx));
    }
    if zr < 0.0 {
        let neg = Complex::with_val(out, -z);
        return -erf_complex(&neg, ctx);
    }
    let c = erfc_cf(z, ctx);
    Complex::with_val(out, 1 - c)
}

pub fn erf_f64(x: f64) -> f64 {
    let ctx = PrecisionContext::new(64, 32).unwrap();
    erf_complex(&ctx.complex(x, 0.0), &ctx).real().to_f64()
}

pub fn erf_c64(z: num_complex::Complex64) -> num_complex::Complex64 {
    let ctx = PrecisionContext::new(64, 32).unwrap();
    super::precision::c64(&erf_complex(&ctx.complex(z.re, z.im), &ctx))
}

fn maclaurin(z: &Complex, ctx: &PrecisionContext) -> Complex {
    let za = z.clone().abs().real().to_f64();
    // terms reach |z|^{2n}/n! ~ e^{|z|²} before decaying
    let extra = (za * za * std::f64::consts::LOG2_E).ceil() as u32 + 16;
    let p = ctx.working() + extra;
    let z = Complex::with_val(p, z);
    let z2 = Complex::with_val(p, z.square_ref());
    let mut pow = z.clone(); // (-1)^n z^{2n+1}/n!
    let mut sum = z.clone();
    let eps = Float::with_val(p, Float::i_exp(1, -(p as i32)));
    let mut n = 0u64;
    loop {
        n += 1;
        pow *= &z2;
        pow /= n;
        pow = -pow;
        let term = Complex::with_val(p, &pow / (2 * n + 1));
        sum += &term;
        if n as f64 > za * za {
            let ta = Float::with_val(p, term.abs_ref());
            let sa = Float::with_val(p, sum.abs_ref());
            if ta <= Float::with_val(p, &sa * &eps) {
                break;
            }
        }
    }
    let two_over_sqrt_pi = Float::with_val(p, Constant::Pi).sqrt().recip() * 2u32;
    sum * two_over_sqrt_pi
}

/// erfc via the Laplace continued fraction, valid for Re z > 0:
/// erfc(z) = e^{-z²}/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + …)))).
fn erfc_cf(z: &Complex, ctx: &PrecisionContext) -> Complex {
    let p = ctx.working() + 16;
    let z = Complex::with_val(p, z);
    let eval = |depth: u32| {
        let mut t = z.clone();
        for n in (1..=depth).rev() {
            let a = Float::with_val(p, n) / 2u32;
            t = Complex::with_val(p, &z + Complex::with_val(p, a / &t));
        }
        t.recip()
    };
    let eps = Float::with_val(p, Float::i_exp(1, -(ctx.working() as i32)));
    let mut depth = 64;
    let mut prev = eval(depth);
    loop {
        depth *= 2;
        let cur = eval(depth);
        let d = Float::with_val(p, Complex::with_val(p, &cur - &prev).abs_ref());
        let ca = Float::with_val(p, cur.abs_ref());
        prev = cur;
        if d <= ca * &eps || depth > 1 << 20 {
            break;
        }
    }
    let z2 = Complex::with_val(p, z.square_ref());
    let pre = Complex::with_val(p, -z2).exp() / Float::with_val(p, Constant::Pi).sqrt();
    pre * prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Complex, b: &Complex, tol: f64) -> bool {
        let d = Complex::with_val(a.prec().0, a - b).abs().real().to_f64();
        d <= tol * (1.0 + b.clone().abs().real().to_f64())
    }

    #[test]
    fn zero_and_large_real() {
        let ctx = PrecisionContext::default();
        assert!(erf_complex(&ctx.complex(0.0, 0.0), &ctx).is_zero());
        let e = erf_complex(&ctx.complex(6.0, 0.0), &ctx);
        assert!(close(&e, &ctx.complex(1.0, 0.0), 1e-15));
    }

    #[test]
    fn one_over_sqrt2_matches_positive_series_with_tail_bound() {
        // erf(x) = 2x e^{-x²}/√π Σ (2x²)^n / (1·3·…·(2n+1)); every term positive,
        // and the tail after term n is below term_n · q/(1-q) with q = 2x²/(2n+3).
        let ctx = PrecisionContext::new(200, 64).unwrap();
        let p = 400;
        let x = Float::with_val(p, 0.5f64).sqrt();
        let two_x2 = Float::with_val(p, &x * &x) * 2u32;
        let mut term = Float::with_val(p, 1);
        let mut sum = Float::with_val(p, 1);
        let mut n = 0u32;
        loop {
            n += 1;
            term *= &two_x2;
            term /= 2 * n + 1;
            sum += &term;
            let q = Float::with_val(p, &two_x2 / (2 * n + 3));
            let tail = Float::with_val(p, &term * &q) / (1 - q);
            if tail < Float::with_val(p, Float::i_exp(1, -300)) {
                break;
            }
        }
        let pre = Float::with_val(p, &x * 2u32) * Float::with_val(p, -Float::with_val(p, &x * &x)).exp()
            / Float::with_val(p, Constant::Pi).sqrt();
        let oracle = Complex::with_val(p, sum * pre);
        let z = Complex::with_val(ctx.working(), (Float::with_val(ctx.working(), 0.5f64).sqrt(), 0));
        let e = erf_complex(&z, &ctx);
        assert!(close(&e, &oracle, 2f64.powi(-190)));
    }

    #[test]
    fn branches_agree_near_switch() {
        let ctx = PrecisionContext::new(128, 32).unwrap();
        for &(re, im) in &[(4.5, 0.3), (3.0, 3.5), (5.0, -1.0)] {
            let z = ctx.complex(re, im);
            let a = erf_complex(&z, &ctx);
            let b = Complex::with_val(ctx.working(), maclaurin(&z, &ctx));
            assert!(close(&a, &b, 1e-35), "{re} {im}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn odd_symmetry(re in -6.0f64..6.0, im in -3.0f64..3.0) {
            let ctx = PrecisionContext::new(96, 32).unwrap();
            let z = ctx.complex(re, im);
            let a = erf_complex(&z, &ctx);
            let b = erf_complex(&Complex::with_val(ctx.working(), -&z), &ctx);
            prop_assert!(close(&a, &Complex::with_val(ctx.working(), -b), 1e-26));
        }
    }
}
