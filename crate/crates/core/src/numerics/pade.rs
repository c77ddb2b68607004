use rug::{Complex, Float, Rational};

use crate::error::{Error, Result};

/// Field operations the Padé solver needs; implemented for exact rationals
/// and for MPC complex floats.
pub trait PadeScalar: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    /// log2 of the magnitude, -inf for zero; used for pivoting.
    fn log2_mag(&self) -> f64;
    /// Pivot threshold relative to the largest entry (log2).
    fn singular_gap(&self) -> f64;
}

impl PadeScalar for Rational {
    fn zero_like(&self) -> Self {
        Rational::new()
    }
    fn one_like(&self) -> Self {
        Rational::from(1)
    }
    fn add(&self, o: &Self) -> Self {
        Rational::from(self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Rational::from(self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Rational::from(self * o)
    }
    fn div(&self, o: &Self) -> Self {
        Rational::from(self / o)
    }
    fn log2_mag(&self) -> f64 {
        if *self == 0 {
            return f64::NEG_INFINITY;
        }
        let f = Float::with_val(64, self);
        let (m, e) = f.to_f64_exp();
        m.abs().log2() + e as f64
    }
    fn singular_gap(&self) -> f64 {
        f64::INFINITY
    }
}

impl PadeScalar for Complex {
    fn zero_like(&self) -> Self {
        Complex::new(self.prec())
    }
    fn one_like(&self) -> Self {
        Complex::with_val(self.prec(), 1)
    }
    fn add(&self, o: &Self) -> Self {
        Complex::with_val(self.prec(), self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Complex::with_val(self.prec(), self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Complex::with_val(self.prec(), self * o)
    }
    fn div(&self, o: &Self) -> Self {
        Complex::with_val(self.prec(), self / o)
    }
    fn log2_mag(&self) -> f64 {
        super::precision::log2_abs(self)
    }
    fn singular_gap(&self) -> f64 {
        self.prec().0 as f64 / 2.0
    }
}

/// P(p)/Q(p) with Q(0) = 1.
#[derive(Debug, Clone)]
pub struct PadeApproximant<T> {
    pub m: usize,
    pub n: usize,
    pub numerator: Vec<T>,
    pub denominator: Vec<T>,
    /// Requested degrees when the table was degenerate and degrees were lowered.
    pub reduced_from: Option<(usize, usize)>,
}

impl PadeApproximant<Complex> {
    pub fn eval(&self, p: &Complex) -> Complex {
        let prec = p.prec();
        let horner = |c: &[Complex]| {
            let mut acc = Complex::new(prec);
            for a in c.iter().rev() {
                acc *= p;
                acc += a;
            }
            acc
        };
        let num = horner(&self.numerator);
        let den = horner(&self.denominator);
        num / den
    }
}

impl<T: PadeScalar> PadeApproximant<T> {
    /// Taylor coefficients of P/Q up to index `len-1`.
    pub fn taylor(&self, len: usize) -> Vec<T> {
        let zero = self.denominator[0].zero_like();
        let mut out: Vec<T> = Vec::with_capacity(len);
        for k in 0..len {
            let mut c = self.numerator.get(k).cloned().unwrap_or_else(|| zero.clone());
            for j in 1..=self.n.min(k) {
                c = c.sub(&self.denominator[j].mul(&out[k - j]));
            }
            out.push(c);
        }
        out
    }
}

/// [m/n] Padé approximant of Σ coeffs[k] p^k. Errors on a singular system.
pub fn pade<T: PadeScalar>(coeffs: &[T], m: usize, n: usize) -> Result<PadeApproximant<T>> {
    if coeffs.len() < m + n + 1 {
        return Err(Error::InsufficientData {
            needed: m + n + 1,
            got: coeffs.len(),
        });
    }
    let zero = coeffs[0].zero_like();
    let c = |i: isize| -> T {
        if i < 0 {
            zero.clone()
        } else {
            coeffs[i as usize].clone()
        }
    };
    // Σ_{j=1}^{n} q_j c_{k-j} = -c_k for k = m+1 … m+n
    let mut a: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut b: Vec<T> = Vec::with_capacity(n);
    for row in 0..n {
        let k = (m + 1 + row) as isize;
        a.push((1..=n).map(|j| c(k - j as isize)).collect());
        b.push(zero.sub(&c(k)));
    }
    let q = solve(a, b).ok_or(Error::SingularSystem { m, n })?;
    let mut denominator = vec![coeffs[0].one_like()];
    denominator.extend(q);
    let numerator = (0..=m)
        .map(|i| {
            let mut s = zero.clone();
            for j in 0..=n.min(i) {
                s = s.add(&denominator[j].mul(&c((i - j) as isize)));
            }
            s
        })
        .collect();
    Ok(PadeApproximant {
        m,
        n,
        numerator,
        denominator,
        reduced_from: None,
    })
}

/// Like [`pade`], lowering (m, n) → (m−1, n−1) while the table is degenerate.
pub fn pade_reduced<T: PadeScalar>(coeffs: &[T], m: usize, n: usize) -> Result<PadeApproximant<T>> {
    let (mut mm, mut nn) = (m, n);
    loop {
        match pade(coeffs, mm, nn) {
            Ok(mut p) => {
                if (mm, nn) != (m, n) {
                    log::warn!("degenerate Padé table: [{m}/{n}] reduced to [{mm}/{nn}]");
                    p.reduced_from = Some((m, n));
                }
                return Ok(p);
            }
            Err(Error::SingularSystem { .. }) if nn > 0 => {
                nn -= 1;
                mm = mm.saturating_sub(1);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve<T: PadeScalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    if n == 0 {
        return Some(vec![]);
    }
    let scale = a
        .iter()
        .flatten()
        .map(|v| v.log2_mag())
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = a[0][0].singular_gap();
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, a[r][col].log2_mag()))
            .fold((col, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag == f64::NEG_INFINITY || mag < scale - gap {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col].div(&a[col][col]);
            if f.log2_mag() == f64::NEG_INFINITY {
                continue;
            }
            for k in col..n {
                let t = f.mul(&a[col][k]);
                a[r][k] = a[r][k].sub(&t);
            }
            let t = f.mul(&b[col]);
            b[r] = b[r].sub(&t);
        }
    }
    let mut x = vec![b[0].zero_like(); n];
    for r in (0..n).rev() {
        let mut s = b[r].clone();
        for k in r + 1..n {
            s = s.sub(&a[r][k].mul(&x[k]));
        }
        x[r] = s.div(&a[r][r]);
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(v: i64) -> Rational {
        Rational::from(v)
    }

    #[test]
    fn geometric_one_one() {
        let c: Vec<Rational> = (0..3).map(|_| rat(1)).collect();
        let p = pade(&c, 1, 1).unwrap();
        assert_eq!(p.numerator, vec![rat(1), rat(0)]);
        assert_eq!(p.denominator, vec![rat(1), rat(-1)]);
    }

    #[test]
    fn exponential_zero_zero() {
        let c = vec![rat(1)];
        let p = pade(&c, 0, 0).unwrap();
        assert_eq!(p.numerator, vec![rat(1)]);
        assert_eq!(p.denominator, vec![rat(1)]);
    }

    #[test]
    fn degenerate_two_two_reduces_to_geometric() {
        // Σ_{j=1}^{2} q_j c_{k-j} = -c_k for k = 3, 4 has matrix [[1,1],[1,1]]:
        // singular. [1/1] solves q_1 = -1, p = (1, 0).
        let c: Vec<Rational> = (0..5).map(|_| rat(1)).collect();
        assert!(matches!(pade(&c, 2, 2), Err(Error::SingularSystem { .. })));
        let p = pade_reduced(&c, 2, 2).unwrap();
        assert_eq!((p.m, p.n), (1, 1));
        assert_eq!(p.reduced_from, Some((2, 2)));
        assert_eq!(p.denominator, vec![rat(1), rat(-1)]);
        assert_eq!(p.taylor(5), c);
    }

    #[test]
    fn exact_reexpansion_of_exponential() {
        let mut c = vec![rat(1)];
        for k in 1..9u32 {
            let prev = c[k as usize - 1].clone();
            c.push(prev / rat(k as i64));
        }
        let p = pade(&c, 4, 4).unwrap();
        assert_eq!(p.taylor(9), c);
    }

    #[test]
    fn float_mode_reexpansion_and_eval() {
        let prec = 200;
        let mut c = vec![Complex::with_val(prec, 1)];
        for k in 1..21u32 {
            let prev = c[k as usize - 1].clone();
            c.push(prev / k);
        }
        let p = pade(&c, 10, 10).unwrap();
        for (a, b) in p.taylor(21).iter().zip(&c) {
            let d = Complex::with_val(prec, a - b);
            assert!(d.abs().real().to_f64() < 2f64.powi(-100));
        }
        let v = p.eval(&Complex::with_val(prec, (1, 0)));
        let e = Float::with_val(prec, 1).exp();
        assert!((v.real().to_f64() - e.to_f64()).abs() < 1e-15);
    }
}
