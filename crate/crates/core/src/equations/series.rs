use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// a_{k+1} = Σ_j P_j(k) a_{k−j} / D(k) for k ≥ seeds.len() − 1, with
/// a_i = 0 for i < 0. Polynomials are ascending coefficient lists in k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRecurrence {
    #[serde(with = "rational_vec")]
    pub seeds: Vec<Rational>,
    #[serde(with = "rational_vec_vec")]
    pub terms: Vec<Vec<Rational>>,
    #[serde(with = "rational_vec", default = "one_poly")]
    pub denominator: Vec<Rational>,
}

fn one_poly() -> Vec<Rational> {
    vec![Rational::from(1)]
}

fn poly_at(p: &[Rational], k: u64) -> Rational {
    let mut acc = Rational::new();
    for c in p.iter().rev() {
        acc *= k;
        acc += c;
    }
    acc
}

impl LinearRecurrence {
    pub fn generate(&self, k_max: usize) -> Result<Vec<Rational>> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("recurrence needs at least one seed".into()));
        }
        let mut a: Vec<Rational> = self.seeds.iter().take(k_max + 1).cloned().collect();
        while a.len() <= k_max {
            let k = a.len() - 1;
            let mut next = Rational::new();
            for (j, p) in self.terms.iter().enumerate() {
                if j > k {
                    break;
                }
                let c = poly_at(p, k as u64);
                if c != 0 {
                    next += c * &a[k - j];
                }
            }
            let d = poly_at(&self.denominator, k as u64);
            if d == 0 {
                return Err(Error::InvalidParameter(format!("recurrence denominator vanishes at k = {k}")));
            }
            next /= d;
            a.push(next);
        }
        Ok(a)
    }
}

/// Coefficient generator of a catalog series.
#[derive(Debug, Clone, PartialEq)]
pub enum Recurrence {
    Linear(LinearRecurrence),
    /// h_n = (n−2)² h_{n−2} − (3/2) Σ_{i+j=n} h_i h_j − (392/1875) δ_{n4}, h_0 = h_1 = 0.
    PainleveI,
}

impl Recurrence {
    pub fn generate(&self, k_max: usize) -> Result<Vec<Rational>> {
        match self {
            Recurrence::Linear(l) => l.generate(k_max),
            Recurrence::PainleveI => Ok(painleve1(k_max)),
        }
    }
}

fn painleve1(k_max: usize) -> Vec<Rational> {
    let mut h: Vec<Rational> = Vec::with_capacity(k_max + 1);
    let forcing = Rational::from((392, 1875));
    for n in 0..=k_max {
        let mut v = Rational::new();
        if n >= 2 {
            let s = (n - 2) as u64;
            v += Rational::from(&h[n - 2] * (s * s));
        }
        let mut conv = Rational::new();
        for i in 1..n {
            if h[i] != 0 && h[n - i] != 0 {
                conv += Rational::from(&h[i] * &h[n - i]);
            }
        }
        v -= conv * Rational::from((3, 2));
        if n == 4 {
            v -= &forcing;
        }
        h.push(v);
    }
    h
}

/// a_0 … a_K of one formal series, exact.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub spec_name: String,
    /// a_k multiplies x^{-k-offset}
    pub offset: u32,
    pub values: Vec<Rational>,
}

impl CoefficientTable {
    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn float(&self, k: usize, prec: u32) -> Float {
        Float::with_val(prec, &self.values[k])
    }

    /// b_k = a_k/(k−1)! for k = 1 … K (index 0 of the result is b_1).
    pub fn scaled(&self) -> Vec<Rational> {
        let mut out = Vec::with_capacity(self.values.len().saturating_sub(1));
        let mut fact = rug::Integer::from(1);
        for k in 1..self.values.len() {
            if k > 1 {
                fact *= (k - 1) as u64;
            }
            out.push(Rational::from(&self.values[k] / &fact));
        }
        out
    }
}

pub(crate) mod rational_vec {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Num {
        Int(i64),
        Float(f64),
        Text(String),
    }

    pub fn parse(n: &serde_json::Value) -> Result<Rational, String> {
        let num: Num = serde_json::from_value(n.clone()).map_err(|e| e.to_string())?;
        to_rational(num)
    }

    fn to_rational(n: Num) -> Result<Rational, String> {
        match n {
            Num::Int(i) => Ok(Rational::from(i)),
            Num::Float(f) => Rational::from_f64(f).ok_or_else(|| format!("non-finite number {f}")),
            Num::Text(s) => {
                Rational::parse(s.trim()).map(Rational::from).map_err(|e| format!("bad rational `{s}`: {e}"))
            }
        }
    }

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(|r| r.to_string()).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw: Vec<Num> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|n| to_rational(n).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub(crate) mod rational_vec_vec {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<Vec<String>> = v.iter().map(|p| p.iter().map(|r| r.to_string()).collect()).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        let raw: Vec<Vec<serde_json::Value>> = Vec::deserialize(d)?;
        raw.iter()
            .map(|p| {
                p.iter()
                    .map(|n| super::rational_vec::parse(n).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_recurrence() {
        let r = LinearRecurrence {
            seeds: vec![Rational::from(1)],
            terms: vec![vec![Rational::from(1), Rational::from(1)]],
            denominator: one_poly(),
        };
        let a = r.generate(5).unwrap();
        let expect: Vec<Rational> = [1, 1, 2, 6, 24, 120].iter().map(|&v| Rational::from(v)).collect();
        assert_eq!(a, expect);
    }

    #[test]
    fn painleve_first_terms() {
        let h = painleve1(8);
        let h4 = Rational::from((-392, 1875));
        assert_eq!(h[0], 0);
        assert_eq!(h[2], 0);
        assert_eq!(h[4], h4);
        assert_eq!(h[5], 0);
        // h_6 = 16 h_4; h_8 = 36 h_6 − (3/2) h_4²
        assert_eq!(h[6], Rational::from(&h4 * 16));
        let h8 = Rational::from(&h[6] * 36) - Rational::from(&h4 * &h4) * Rational::from((3, 2));
        assert_eq!(h[8], h8);
    }

    #[test]
    fn json_round_trip_accepts_strings_ints_and_floats() {
        let j = r#"{"seeds": [0, "1"], "terms": [["-1/4", 2], [0, 1, -1.0]]}"#;
        let r: LinearRecurrence = serde_json::from_str(j).unwrap();
        assert_eq!(r.terms[0][0], Rational::from((-1, 4)));
        assert_eq!(r.denominator, one_poly());
        let back = serde_json::to_string(&r).unwrap();
        let again: LinearRecurrence = serde_json::from_str(&back).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn scaled_coefficients_of_factorials() {
        let t = CoefficientTable {
            spec_name: "t".into(),
            offset: 1,
            values: (0..8u32).map(|k| Rational::from(rug::Integer::from(rug::Integer::factorial(k)))).collect(),
        };
        let b = t.scaled();
        for (i, v) in b.iter().enumerate() {
            assert_eq!(*v, Rational::from(i as i64 + 1));
        }
    }
}
