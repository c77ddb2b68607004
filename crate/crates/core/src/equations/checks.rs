use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use super::EquationSpec;

/// Angular / relative tolerance for f64 eigenvalue data (2^{-53/2}).
const TOL: f64 = 1.0 / 94_906_265.6;

#[derive(Debug, Clone, Serialize)]
pub struct NonresonanceReport {
    pub pass: bool,
    pub witnesses: Vec<String>,
}

fn in_half_plane(z: Complex64, theta: f64) -> bool {
    (z * Complex64::from_polar(1.0, -theta)).re > TOL * z.norm().max(1.0)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Every integer vector in [−bound, bound]^n, excluding zero.
fn integer_vectors(n: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-bound..=bound).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    out.retain(|v| v.iter().any(|&k| k != 0));
    out
}

/// Search each open half-plane cut out by the eigenvalue directions for
/// (1) integer relations Σ k_i λ_i = 0 with |k_i| ≤ bound and (2) coinciding
/// directions among the points λ_i − Σ k_j λ_j (k_j ≥ 0, Σ k_j ≤ bound) that
/// stay in the half-plane.
pub fn check_nonresonance(lambdas: &[Complex64], bound: i64) -> NonresonanceReport {
    let bound = bound.max(1);
    let mut args: Vec<f64> = lambdas.iter().map(|l| l.arg()).collect();
    args.sort_by(f64::total_cmp);
    let mut thetas = args.clone();
    for i in 0..args.len() {
        let a = args[i];
        let b = if i + 1 < args.len() { args[i + 1] } else { args[0] + 2.0 * PI };
        thetas.push(0.5 * (a + b));
    }
    let mut witnesses = Vec::new();
    for &theta in &thetas {
        let idx: Vec<usize> = (0..lambdas.len()).filter(|&i| in_half_plane(lambdas[i], theta)).collect();
        let sub: Vec<Complex64> = idx.iter().map(|&i| lambdas[i]).collect();
        let scale = sub.iter().map(|l| l.norm()).fold(0.0, f64::max);
        for k in integer_vectors(sub.len(), bound) {
            let s: Complex64 = k.iter().zip(&sub).map(|(&c, l)| l * c as f64).sum();
            if s.norm() <= TOL * scale * bound as f64 {
                let terms: Vec<String> = k
                    .iter()
                    .zip(&idx)
                    .filter(|(c, _)| **c != 0)
                    .map(|(c, i)| format!("{c}·λ_{}", i + 1))
                    .collect();
                let w = format!("(1) integer relation {} = 0", terms.join(" + ").replace("+ -", "− "));
                if !witnesses.contains(&w) {
                    witnesses.push(w);
                }
            }
        }
        // (2): the finite set of shifted eigenvalues in the half-plane
        let mut pts: Vec<Complex64> = Vec::new();
        for &l in &sub {
            for k in integer_vectors(sub.len(), bound)
                .into_iter()
                .chain(std::iter::once(vec![0; sub.len()]))
                .filter(|k| k.iter().all(|&c| c >= 0) && k.iter().sum::<i64>() <= bound)
            {
                let z = l - k.iter().zip(&sub).map(|(&c, m)| m * c as f64).sum::<Complex64>();
                if in_half_plane(z, theta) && !pts.iter().any(|p| (p - z).norm() <= TOL * scale) {
                    pts.push(z);
                }
            }
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if angle_gap(pts[i].arg(), pts[j].arg()) <= TOL {
                    let w = format!("(2) shared direction: {} and {}", pts[i], pts[j]);
                    if !witnesses.contains(&w) {
                        witnesses.push(w);
                    }
                }
            }
        }
    }
    NonresonanceReport {
        pass: witnesses.is_empty(),
        witnesses,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreparedReport {
    pub pass: bool,
    pub violations: Vec<String>,
    /// Indices i with ξ + arg λ_i ∈ (−π/2, π/2), when ξ was given.
    pub selected: Option<Vec<usize>>,
}

/// |λ_i| ≥ 1 with λ_1 = 1, Re β_i < 0, and (given a direction ξ) which
/// exponentials e^{-λ_i x} decay along arg x = ξ.
pub fn check_prepared(spec: &EquationSpec, xi: Option<f64>) -> PreparedReport {
    let mut violations = Vec::new();
    if spec.lambdas.is_empty() {
        violations.push("(n3) no eigenvalues".to_string());
    } else if (spec.lambdas[0] - 1.0).norm() > TOL {
        violations.push(format!("(n3) λ_1 = {} ≠ 1", spec.lambdas[0]));
    }
    for (i, l) in spec.lambdas.iter().enumerate() {
        if l.norm() < 1.0 - TOL {
            violations.push(format!("(n3) |λ_{}| = {} < 1", i + 1, l.norm()));
        }
    }
    for (i, b) in spec.betas.iter().enumerate() {
        if b.re >= 0.0 {
            violations.push(format!("(n4) Re β_{} = {} ≥ 0", i + 1, b.re));
        }
    }
    let selected = xi.map(|xi| {
        (0..spec.lambdas.len())
            .filter(|&i| {
                let a = xi + spec.lambdas[i].arg();
                let a = (a + PI).rem_euclid(2.0 * PI) - PI;
                a.abs() < FRAC_PI_2
            })
            .collect()
    });
    PreparedReport {
        pass: violations.is_empty(),
        violations,
        selected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::build_catalog_equation;
    use serde_json::Value;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn nonresonance_examples() {
        assert!(check_nonresonance(&[c(1.0, 0.0), c(0.0, 1.0)], 5).pass);
        let r = check_nonresonance(&[c(1.0, 0.0), c(2.0, 0.0)], 3);
        assert!(!r.pass);
        assert!(r.witnesses.iter().any(|w| w.contains("2·λ_1") && w.contains("λ_2")), "{:?}", r.witnesses);
        assert!(check_nonresonance(&[c(1.0, 0.0), c(-1.0, 0.0)], 5).pass);
    }

    #[test]
    fn prepared_examples() {
        let toy = build_catalog_equation("toy", &Value::Null).unwrap();
        assert!(check_prepared(&toy, None).pass);
        let mut half = toy.clone();
        half.lambdas = vec![c(0.5, 0.0)];
        let r = check_prepared(&half, None);
        assert!(!r.pass && r.violations.iter().any(|v| v.starts_with("(n3)")));
        let airy = build_catalog_equation("airy", &Value::Null).unwrap();
        let r = check_prepared(&airy, Some(0.0));
        assert!(r.pass);
        assert_eq!(r.selected, Some(vec![0]));
    }
}
