use rug::ops::Pow;
use rug::{Complex, Float};

use super::precision::PrecisionContext;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Extrapolated {
    pub value: Complex,
    /// |R_n(last window) − R_n(window shifted back by one)|
    pub error_estimate: Float,
}

/// n-th Richardson extrapolant on the window of `n+1` entries ending at `end`.
///
/// R = Σ_{j=0}^{n} (−1)^{n+j} (r+j)^n s_{r+j} / (j!(n−j)!), exact on
/// s_r = c_0 + c_1/r + … + c_n/r^n.
fn extrapolant(first: i64, seq: &[Complex], end: usize, n: usize, prec: u32) -> Complex {
    let start = end - n;
    let mut acc = Complex::with_val(prec, 0);
    let mut binom = Float::with_val(prec, 1); // 1/(j!(n-j)!) built incrementally
    for k in 1..=n {
        binom /= k as u32;
    }
    for j in 0..=n {
        let r = first + (start + j) as i64;
        let rn = Float::with_val(prec, r).pow(n as u32);
        let mut t = Complex::with_val(prec, &seq[start + j] * rn);
        t *= &binom;
        if (n + j) % 2 == 1 {
            acc -= t;
        } else {
            acc += t;
        }
        // 1/((j+1)!(n-j-1)!) = 1/(j!(n-j)!) · (n-j)/(j+1)
        if j < n {
            binom *= (n - j) as u32;
            binom /= (j + 1) as u32;
        }
    }
    acc
}

/// `seq[i]` is s_{first+i}; consecutive indices.
pub fn richardson_with_error(
    first: i64,
    seq: &[Complex],
    order: usize,
    ctx: &PrecisionContext,
) -> Result<Extrapolated> {
    if seq.len() < order + 2 {
        return Err(Error::InsufficientData {
            needed: order + 2,
            got: seq.len(),
        });
    }
    let p = ctx.working();
    let last = seq.len() - 1;
    let value = extrapolant(first, seq, last, order, p);
    let prev = extrapolant(first, seq, last - 1, order, p);
    let error_estimate = Float::with_val(p, Complex::with_val(p, &value - &prev).abs_ref());
    Ok(Extrapolated {
        value,
        error_estimate,
    })
}

pub fn richardson(first: i64, seq: &[Complex], order: usize, ctx: &PrecisionContext) -> Result<Complex> {
    richardson_with_error(first, seq, order, ctx).map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ctx: &PrecisionContext, range: std::ops::Range<i64>, f: impl Fn(&Float) -> Float) -> Vec<Complex> {
        range
            .map(|r| {
                let rf = Float::with_val(ctx.working(), r);
                Complex::with_val(ctx.working(), f(&rf))
            })
            .collect()
    }

    #[test]
    fn constant_is_fixed_point() {
        let ctx = PrecisionContext::default();
        let s = seq(&ctx, 10..20, |_| Float::with_val(320, 7));
        for order in 0..5 {
            let v = richardson(10, &s, order, &ctx).unwrap();
            assert_eq!(v.real().to_f64(), 7.0);
        }
    }

    #[test]
    fn one_over_r_removed_exactly() {
        let ctx = PrecisionContext::default();
        let s = seq(&ctx, 5..9, |r| Float::with_val(320, 1 + r.clone().recip()));
        let v = richardson(5, &s, 1, &ctx).unwrap();
        let d = Complex::with_val(320, &v - 1u32).abs().real().to_f64();
        assert!(d < 1e-90);
    }

    #[test]
    fn second_order_tail() {
        let ctx = PrecisionContext::default();
        let s = seq(&ctx, 20..30, |r| {
            let inv = r.clone().recip();
            let inv2 = Float::with_val(320, inv.square_ref());
            Float::with_val(320, 1 + inv) + inv2
        });
        let e = richardson_with_error(20, &s, 2, &ctx).unwrap();
        let d = Complex::with_val(320, &e.value - 1u32).abs().real().to_f64();
        assert!(d < 1e-90);
        assert!(e.error_estimate.to_f64() < 1e-90);
    }

    #[test]
    fn needs_order_plus_two() {
        let ctx = PrecisionContext::default();
        let s = seq(&ctx, 1..4, |_| Float::with_val(320, 1));
        assert!(matches!(
            richardson(1, &s, 2, &ctx),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
    }
}
