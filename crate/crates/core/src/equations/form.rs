use std::collections::BTreeMap;

use rug::Rational;

/// Finite Laurent polynomial Σ c_e x^e.
pub type Laurent = BTreeMap<i64, Rational>;

pub fn laurent(terms: &[(i64, Rational)]) -> Laurent {
    let mut l = Laurent::new();
    for (e, c) in terms {
        add_term(&mut l, *e, c.clone());
    }
    l
}

fn add_term(l: &mut Laurent, e: i64, c: Rational) {
    if c == 0 {
        return;
    }
    let entry = l.entry(e).or_default();
    *entry += c;
    if *entry == 0 {
        l.remove(&e);
    }
}

fn mul(a: &Laurent, b: &Laurent) -> Laurent {
    let mut out = Laurent::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            add_term(&mut out, ea + eb, Rational::from(ca * cb));
        }
    }
    out
}

fn derivative(a: &Laurent) -> Laurent {
    let mut out = Laurent::new();
    for (e, c) in a {
        add_term(&mut out, e - 1, Rational::from(c * *e));
    }
    out
}

/// c_2(x) y'' + c_1(x) y' + c_0(x) y + q(x) y² = rhs(x).
#[derive(Debug, Clone, PartialEq)]
pub struct OdeForm {
    pub linear: [Laurent; 3],
    pub quadratic: Laurent,
    pub rhs: Laurent,
}

impl OdeForm {
    /// L[y] − rhs for y = Σ a_k x^{-k-offset}.
    pub fn residual(&self, a: &[Rational], offset: u32) -> Laurent {
        let mut y = Laurent::new();
        for (k, c) in a.iter().enumerate() {
            add_term(&mut y, -(k as i64) - offset as i64, c.clone());
        }
        let dy = derivative(&y);
        let d2y = derivative(&dy);
        let mut out = Laurent::new();
        for (coef, f) in self.linear.iter().zip([&y, &dy, &d2y]) {
            for (e, c) in mul(coef, f) {
                add_term(&mut out, e, c);
            }
        }
        if !self.quadratic.is_empty() {
            for (e, c) in mul(&self.quadratic, &mul(&y, &y)) {
                add_term(&mut out, e, c);
            }
        }
        for (e, c) in &self.rhs {
            add_term(&mut out, *e, Rational::from(-c));
        }
        out
    }

    /// Highest power of x at which a_k enters the residual.
    fn entry_power(&self, k: usize, offset: u32) -> i64 {
        self.linear
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.keys().next_back().map(|e| e - i as i64))
            .max()
            .unwrap_or(0)
            - k as i64
            - offset as i64
    }

    /// Determine a_0 … a_{count−1} by matching powers of x one at a time.
    ///
    /// When the order that fixes a_k does not involve it (a free constant of
    /// normalization) the value from `free` is used. A nonlinear order is
    /// solved by its secant through a_k = 0 and 1, which picks the root 0 of
    /// t + c t². Returns None if an order cannot be satisfied.
    pub fn power_match(&self, count: usize, offset: u32, free: &[Rational]) -> Option<Vec<Rational>> {
        let mut a: Vec<Rational> = Vec::with_capacity(count);
        for k in 0..count {
            let e = self.entry_power(k, offset);
            let at = |t: Rational, a: &Vec<Rational>| {
                let mut trial = a.clone();
                trial.push(t);
                self.residual(&trial, offset).get(&e).cloned().unwrap_or_default()
            };
            let r0 = at(Rational::new(), &a);
            let r1 = at(Rational::from(1), &a);
            let slope = Rational::from(&r1 - &r0);
            if slope != 0 {
                a.push(-Rational::from(&r0 / &slope));
            } else if r0 == 0 {
                a.push(free.get(k).cloned().unwrap_or_default());
            } else {
                return None;
            }
        }
        Some(a)
    }
}

/// Leading (highest) power present in a Laurent polynomial.
pub fn leading_power(l: &Laurent) -> Option<i64> {
    l.keys().next_back().copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn toy_residual_and_matching() {
        // y' + y = 1/x
        let form = OdeForm {
            linear: [laurent(&[(0, q(1, 1))]), laurent(&[(0, q(1, 1))]), Laurent::new()],
            quadratic: Laurent::new(),
            rhs: laurent(&[(-1, q(1, 1))]),
        };
        let a = form.power_match(6, 1, &[]).unwrap();
        let f: Vec<Rational> = [1, 1, 2, 6, 24, 120].iter().map(|&v| Rational::from(v)).collect();
        assert_eq!(a, f);
        let r = form.residual(&a, 1);
        assert_eq!(leading_power(&r), Some(-7));
    }
}
