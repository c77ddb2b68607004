//! Catalog of prepared equations: formal-series data, coefficient
//! generation, exact-solution oracles and hypothesis checkers.

pub mod checks;
pub mod form;
pub mod oracle;
pub mod series;

use num_complex::Complex64;
use rug::{Complex, Rational};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::numerics::precision::{c64, two_pi_i, PrecisionContext};

pub use checks::{check_nonresonance, check_prepared, NonresonanceReport, PreparedReport};
pub use form::{laurent, leading_power, Laurent, OdeForm};
pub use series::{CoefficientTable, LinearRecurrence, Recurrence};

/// A Borel-plane singularity of the level-zero series: Y(p) behaves like
/// (p − location)^{exponent − 1} (a pole for exponent 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Singularity {
    pub location: Complex64,
    pub exponent: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationKind {
    Toy,
    Airy,
    Painleve1,
    Resonant,
    Custom,
}

#[derive(Debug, Clone)]
pub struct EquationSpec {
    pub name: String,
    pub kind: EquationKind,
    pub lambdas: Vec<Complex64>,
    pub betas: Vec<Complex64>,
    pub ms: Vec<i64>,
    pub beta_primes: Vec<Complex64>,
    pub recurrence: Recurrence,
    pub series_offset: u32,
    /// Nearest singularities first.
    pub singularities: Vec<Singularity>,
    /// Defining equation, for the power-matching and residual checks.
    pub form: Option<OdeForm>,
    /// Series multiplying the first exponential, for the Borel jump model.
    pub level_one: Option<LinearRecurrence>,
    /// Declared Stokes constant of a custom series.
    pub declared_stokes: Option<Complex64>,
    /// m² for the resonant family.
    pub m2: Option<Rational>,
    /// Late coefficients are an oscillating mixture; plain inversion is invalid.
    pub resonant: bool,
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// m = 1 − ⌊Re β⌋ and β' = β + m.
fn m_and_beta_prime(betas: &[Complex64]) -> (Vec<i64>, Vec<Complex64>) {
    let ms: Vec<i64> = betas.iter().map(|b| 1 - b.re.floor() as i64).collect();
    let bp = betas.iter().zip(&ms).map(|(b, &m)| b + m as f64).collect();
    (ms, bp)
}

fn poly(c: &[i64]) -> Vec<Rational> {
    c.iter().map(|&v| Rational::from(v)).collect()
}

impl EquationSpec {
    fn assemble(
        name: &str,
        kind: EquationKind,
        lambdas: Vec<Complex64>,
        betas: Vec<Complex64>,
        recurrence: Recurrence,
        series_offset: u32,
        singularities: Vec<Singularity>,
        form: Option<OdeForm>,
    ) -> Self {
        let (ms, beta_primes) = m_and_beta_prime(&betas);
        EquationSpec {
            name: name.to_string(),
            kind,
            lambdas,
            betas,
            ms,
            beta_primes,
            recurrence,
            series_offset,
            singularities,
            form,
            level_one: None,
            declared_stokes: None,
            m2: None,
            resonant: false,
        }
    }

    pub fn generate_coefficients(&self, k_max: usize) -> Result<CoefficientTable> {
        if k_max < 2 {
            return Err(Error::InvalidParameter(format!("need K ≥ 2, got {k_max}")));
        }
        Ok(CoefficientTable {
            spec_name: self.name.clone(),
            offset: self.series_offset,
            values: self.recurrence.generate(k_max)?,
        })
    }

    pub fn has_oracle(&self) -> bool {
        matches!(self.kind, EquationKind::Toy | EquationKind::Airy | EquationKind::Resonant)
    }

    /// Independently known Stokes constant of the first singularity.
    pub fn stokes_oracle(&self, ctx: &PrecisionContext) -> Result<Complex> {
        match self.kind {
            EquationKind::Toy => Ok(two_pi_i(ctx.working())),
            EquationKind::Airy => oracle::airy_connection_stokes(ctx),
            _ => match self.declared_stokes {
                Some(s) => Ok(ctx.complex(s.re, s.im)),
                None => Err(Error::OracleUnavailable(format!("{}: no independent Stokes constant", self.name))),
            },
        }
    }

    /// The distinguished true solution: principal-value Ei for the toy, the
    /// Bi-based balanced solution for Airy, the anchored ODE integration for
    /// the resonant family.
    pub fn exact_solution(&self, x: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
        match self.kind {
            EquationKind::Toy => oracle::toy_solution(x, oracle::ToyBranch::StokesLine, ctx),
            EquationKind::Airy => oracle::airy_directional(x, true, ctx),
            EquationKind::Resonant => {
                let z = c64(x);
                let r = z.norm();
                let table = self.generate_coefficients((4.0 * r + 20.0).ceil() as usize)?;
                let m2 = self.m2.clone().unwrap_or_default();
                let st = oracle::resonant_arc(&table, &m2, r, 0.0, &[z.arg()], ctx)?;
                Ok(Complex::with_val(ctx.working(), &st[0].y))
            }
            _ => Err(Error::OracleUnavailable(format!("{}: no oracle: series-only experiments", self.name))),
        }
    }

    /// The solution whose exponential constants vanish along arg x: the
    /// directional Borel sum off the Stokes line, the balanced one on it.
    /// This is the reference under which the least term bounds the error.
    pub fn balanced_solution(&self, x: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
        match self.kind {
            EquationKind::Toy => oracle::toy_solution(x, oracle::ToyBranch::Directional, ctx),
            EquationKind::Resonant => {
                let z = c64(x);
                let r = z.norm();
                let table = self.generate_coefficients((4.0 * r + 20.0).ceil() as usize)?;
                let m2 = self.m2.clone().unwrap_or_default();
                let st = oracle::resonant_arc(&table, &m2, r, z.arg(), &[z.arg()], ctx)?;
                Ok(Complex::with_val(ctx.working(), &st[0].y))
            }
            _ => self.exact_solution(x, ctx),
        }
    }
}

fn toy() -> EquationSpec {
    let form = OdeForm {
        linear: [laurent(&[(0, q(1, 1))]), laurent(&[(0, q(1, 1))]), Laurent::new()],
        quadratic: Laurent::new(),
        rhs: laurent(&[(-1, q(1, 1))]),
    };
    EquationSpec::assemble(
        "toy",
        EquationKind::Toy,
        vec![re(1.0)],
        vec![re(-1.0)],
        Recurrence::Linear(LinearRecurrence {
            seeds: poly(&[1]),
            terms: vec![poly(&[1, 1])],
            denominator: poly(&[1]),
        }),
        1,
        vec![Singularity {
            location: re(1.0),
            exponent: Rational::new(),
        }],
        Some(form),
    )
}

/// Airy in the normalized variable t = (2/3) z^{3/2}. The tabulated series is
/// w(t) = Σ u_k t^{-k} of the growing solution e^{t} t^{-1/6} w; its Borel
/// singularity sits at λ_1 − λ_2 = 2.
fn airy() -> EquationSpec {
    // w'' + 2w' + (5/36) t^{-2} w = 0
    let form = OdeForm {
        linear: [laurent(&[(-2, q(5, 36))]), laurent(&[(0, q(2, 1))]), laurent(&[(0, q(1, 1))])],
        quadratic: Laurent::new(),
        rhs: Laurent::new(),
    };
    let mut spec = EquationSpec::assemble(
        "airy",
        EquationKind::Airy,
        vec![re(1.0), re(-1.0)],
        vec![re(-5.0 / 6.0), re(-5.0 / 6.0)],
        Recurrence::Linear(LinearRecurrence {
            seeds: poly(&[1]),
            // u_{k+1} = (k² + k + 5/36) u_k / (2(k+1))
            terms: vec![vec![q(5, 36), q(1, 1), q(1, 1)]],
            denominator: poly(&[2, 2]),
        }),
        0,
        vec![Singularity {
            location: re(2.0),
            exponent: Rational::new(),
        }],
        Some(form),
    );
    // the recessive series, c_k = (−1)^k u_k
    spec.level_one = Some(LinearRecurrence {
        seeds: poly(&[1]),
        terms: vec![vec![q(-5, 36), q(-1, 1), q(-1, 1)]],
        denominator: poly(&[2, 2]),
    });
    spec
}

fn painleve1() -> EquationSpec {
    // h'' + h'/t − h − (3/2) h² = (392/1875) t^{-4}
    let form = OdeForm {
        linear: [laurent(&[(0, q(-1, 1))]), laurent(&[(-1, q(1, 1))]), laurent(&[(0, q(1, 1))])],
        quadratic: laurent(&[(0, q(-3, 2))]),
        rhs: laurent(&[(-4, q(392, 1875))]),
    };
    EquationSpec::assemble(
        "painleve1",
        EquationKind::Painleve1,
        vec![re(1.0), re(-1.0)],
        vec![re(-0.5), re(-0.5)],
        Recurrence::PainleveI,
        0,
        vec![
            Singularity {
                location: re(1.0),
                exponent: q(1, 2),
            },
            Singularity {
                location: re(-1.0),
                exponent: q(1, 2),
            },
        ],
        Some(form),
    )
}

fn resonant(m: f64) -> Result<EquationSpec> {
    if !m.is_finite() {
        return Err(Error::InvalidParameter(format!("resonant: m must be a finite real, got {m}")));
    }
    let m2 = Rational::from_f64(m).unwrap().square();
    // y'' + 2y' + (1 + m²/x) y = 1/x
    let form = OdeForm {
        linear: [
            laurent(&[(0, q(1, 1)), (-1, m2.clone())]),
            laurent(&[(0, q(2, 1))]),
            laurent(&[(0, q(1, 1))]),
        ],
        quadratic: Laurent::new(),
        rhs: laurent(&[(-1, q(1, 1))]),
    };
    let mut spec = EquationSpec::assemble(
        "resonant",
        EquationKind::Resonant,
        vec![re(1.0)],
        vec![re(-0.25)],
        Recurrence::Linear(LinearRecurrence {
            seeds: poly(&[0, 1]),
            // a_{k+1} = (2k − m²) a_k − k(k−1) a_{k−1}
            terms: vec![vec![Rational::from(-&m2), q(2, 1)], poly(&[0, 1, -1])],
            denominator: poly(&[1]),
        }),
        0,
        vec![Singularity {
            location: re(1.0),
            exponent: q(-1, 4),
        }],
        Some(form),
    );
    spec.m2 = Some(m2);
    spec.resonant = true;
    Ok(spec)
}

/// A user-described series: a linear recurrence plus optional singularity data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomEquation {
    #[serde(default = "custom_name")]
    pub name: String,
    pub recurrence: LinearRecurrence,
    #[serde(default)]
    pub offset: u32,
    #[serde(default)]
    pub lambdas: Vec<[f64; 2]>,
    #[serde(default)]
    pub betas: Vec<[f64; 2]>,
    #[serde(default)]
    pub singularities: Vec<CustomSingularity>,
}

fn custom_name() -> String {
    "custom".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSingularity {
    pub location: [f64; 2],
    #[serde(default)]
    pub exponent: Option<Value>,
    #[serde(default)]
    pub stokes: Option<[f64; 2]>,
}

impl CustomEquation {
    pub fn into_spec(self) -> Result<EquationSpec> {
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        let mut sings = Vec::new();
        let mut declared = None;
        for s in &self.singularities {
            let exponent = match &s.exponent {
                None => Rational::new(),
                Some(v) => series::rational_vec::parse(v).map_err(Error::Schema)?,
            };
            if declared.is_none() {
                declared = s.stokes.map(c);
            }
            sings.push(Singularity {
                location: c(s.location),
                exponent,
            });
        }
        sings.sort_by(|a, b| a.location.norm().total_cmp(&b.location.norm()));
        let lambdas = if self.lambdas.is_empty() {
            sings.iter().map(|s| s.location).collect()
        } else {
            self.lambdas.into_iter().map(c).collect()
        };
        let betas = self.betas.into_iter().map(c).collect();
        let mut spec = EquationSpec::assemble(
            &self.name,
            EquationKind::Custom,
            lambdas,
            betas,
            Recurrence::Linear(self.recurrence),
            self.offset,
            sings,
            None,
        );
        spec.declared_stokes = declared;
        Ok(spec)
    }
}

/// Look up a catalog entry. `params` is a JSON object (`{"m": 1.0}` for the
/// resonant family); `custom` takes a full [`CustomEquation`] description.
pub fn build_catalog_equation(name: &str, params: &Value) -> Result<EquationSpec> {
    match name {
        "toy" => Ok(toy()),
        "airy" => Ok(airy()),
        "painleve1" => Ok(painleve1()),
        "resonant" => {
            let m = params
                .get("m")
                .ok_or_else(|| Error::InvalidParameter("resonant requires parameter m".into()))?;
            let m = m
                .as_f64()
                .ok_or_else(|| Error::InvalidParameter(format!("resonant: m must be a real number, got {m}")))?;
            resonant(m)
        }
        "custom" => {
            let c: CustomEquation =
                serde_json::from_value(params.clone()).map_err(|e| Error::Schema(format!("custom equation: {e}")))?;
            c.into_spec()
        }
        other => Err(Error::UnknownEquation(other.to_string())),
    }
}

/// One line per catalog entry, in a fixed order.
pub fn list_catalog() -> Vec<String> {
    let fmt_l = |s: &EquationSpec| {
        s.lambdas
            .iter()
            .map(|l| format!("{}", l.re))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let fmt_b = |s: &EquationSpec| {
        s.betas
            .iter()
            .map(|b| format!("{:.4}", b.re))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut out = Vec::new();
    let rows: [(EquationSpec, &str, &str); 4] = [
        (toy(), "", "exact oracle (principal-value Ei), Stokes constant 2πi"),
        (airy(), "", "Ai/Bi oracle, Stokes constant from the connection formula"),
        (painleve1(), "", "no oracle: series-only experiments"),
        (resonant(1.0).expect("m = 1 is valid"), "m (real, required)", "ODE-integration oracle; late terms oscillate"),
    ];
    for (s, params, oracles) in rows {
        out.push(format!(
            "{:<10} λ = ({}) β = ({}) offset {}  params: {:<19} {}",
            s.name,
            fmt_l(&s),
            fmt_b(&s),
            s.series_offset,
            if params.is_empty() { "-" } else { params },
            oracles
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ints(v: &[i64]) -> Vec<Rational> {
        poly(v)
    }

    #[test]
    fn toy_coefficients() {
        let t = toy().generate_coefficients(5).unwrap();
        assert_eq!(t.values, ints(&[1, 1, 2, 6, 24, 120]));
    }

    #[test]
    fn resonant_examples() {
        let r0 = build_catalog_equation("resonant", &json!({"m": 0.0})).unwrap();
        assert_eq!(r0.generate_coefficients(5).unwrap().values[5], 120);
        let r1 = build_catalog_equation("resonant", &json!({"m": 1})).unwrap();
        assert_eq!(r1.generate_coefficients(2).unwrap().values[2], 1);
    }

    #[test]
    fn resonant_scaled_identity() {
        let r1 = build_catalog_equation("resonant", &json!({"m": 1})).unwrap();
        let b = r1.generate_coefficients(101).unwrap().scaled();
        // b[i] = b_{i+1};  b_{k+1} = (2 − 1/k) b_k − b_{k−1}
        for k in 2..=100usize {
            let lhs = &b[k];
            let rhs = &b[k - 1] * (Rational::from(2) - Rational::from((1, k as i64))) - &b[k - 2];
            assert_eq!(*lhs, rhs, "k={k}");
        }
    }

    #[test]
    fn ms_and_beta_primes_consistent() {
        for name in ["toy", "airy", "painleve1"] {
            let s = build_catalog_equation(name, &Value::Null).unwrap();
            for ((b, m), bp) in s.betas.iter().zip(&s.ms).zip(&s.beta_primes) {
                assert_eq!(*m, 1 - b.re.floor() as i64);
                assert!((b + *m as f64 - bp).norm() < 1e-15);
            }
            assert_eq!(s.lambdas[0], re(1.0));
        }
    }

    #[test]
    fn series_satisfy_their_equations() {
        let specs = [
            toy(),
            airy(),
            painleve1(),
            resonant(1.0).unwrap(),
            resonant(0.5).unwrap(),
        ];
        for s in specs {
            let form = s.form.as_ref().unwrap();
            let t = s.generate_coefficients(12).unwrap();
            let head = &t.values[..8];
            let r = form.residual(head, s.series_offset);
            let lead = leading_power(&r).unwrap_or(i64::MIN);
            assert!(lead <= -(8 + s.series_offset as i64), "{}: residual leads at x^{lead}", s.name);
            // seeds reproduce direct power matching
            let matched = form.power_match(5, s.series_offset, &t.values[..5]).unwrap();
            assert_eq!(matched, t.values[..5].to_vec(), "{}", s.name);
        }
    }

    #[test]
    fn unknown_name_and_missing_m() {
        assert!(matches!(
            build_catalog_equation("bessel", &Value::Null),
            Err(Error::UnknownEquation(_))
        ));
        assert!(matches!(
            build_catalog_equation("resonant", &json!({})),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn custom_geometric_series() {
        let s = build_catalog_equation(
            "custom",
            &json!({"name": "ones", "recurrence": {"seeds": [1], "terms": [[1]]}, "offset": 1}),
        )
        .unwrap();
        let t = s.generate_coefficients(10).unwrap();
        assert!(t.values.iter().all(|v| *v == 1));
        assert!(s.singularities.is_empty());
    }

    #[test]
    fn catalog_listing() {
        let l = list_catalog();
        assert_eq!(l.len(), 4);
        assert!(l[0].starts_with("toy"));
        assert!(l[2].contains("no oracle: series-only experiments"));
        assert!(l[3].contains("m (real, required)"));
    }

    #[test]
    fn toy_oracle_tends_to_leading_term() {
        let ctx = PrecisionContext::default();
        let s = toy();
        let y = s.exact_solution(&ctx.complex(200.0, 0.0), &ctx).unwrap();
        assert!((c64(&y).re * 200.0 - 1.0).abs() < 0.01);
    }
}
