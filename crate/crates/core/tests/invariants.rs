use std::f64::consts::FRAC_PI_2;

use exasym_core::berry::{fit_erf, ErfShape};
use exasym_core::borel::{averaged_sum, borel_transform, AverageSpec};
use exasym_core::equations::build_catalog_equation;
use exasym_core::numerics::erf_f64;
use exasym_core::run::{execute, RunConfig};
use exasym_core::truncation::{least_term_index, term, truncation_error, Reference};
use exasym_core::PrecisionContext;
use num_complex::Complex64;
use proptest::prelude::*;
use rug::{Complex, Float, Rational};
use serde_json::{json, Value};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn toy_coefficients_obey_their_recurrence(k_max in 2usize..400) {
        let spec = build_catalog_equation("toy", &Value::Null).unwrap();
        let t = spec.generate_coefficients(k_max).unwrap();
        prop_assert_eq!(t.values.len(), k_max + 1);
        for k in 0..k_max {
            prop_assert_eq!(Rational::from(&t.values[k] * (k as u64 + 1)), t.values[k + 1].clone());
        }
    }

    #[test]
    fn least_term_is_a_local_minimum(r in 3.0f64..60.0, theta in -1.5f64..1.5) {
        let ctx = PrecisionContext::default();
        let spec = build_catalog_equation("airy", &Value::Null).unwrap();
        let t = spec.generate_coefficients(200).unwrap();
        let z = Complex64::from_polar(r, theta);
        let x = ctx.complex(z.re, z.im);
        let n = least_term_index(&t, &x, &ctx).unwrap();
        let mag = |k: usize| Float::with_val(ctx.working(), term(&t, &x, k, &ctx).abs_ref());
        if n > 0 {
            prop_assert!(mag(n) <= mag(n - 1));
        }
        prop_assert!(mag(n) <= mag(n + 1));
    }

    // Just above the Stokes line the unswitched exponential e^{-x} is still
    // comparable to the least term and the ratio grows like min(√r, 1/θ);
    // away from that layer it stays O(1).
    #[test]
    fn toy_remainder_is_of_least_term_size(r in 8.0f64..40.0, theta in 0.4f64..(FRAC_PI_2 - 1e-3)) {
        let ctx = PrecisionContext::default();
        let spec = build_catalog_equation("toy", &Value::Null).unwrap();
        let t = spec.generate_coefficients(100).unwrap();
        let z = Complex64::from_polar(r, theta);
        let rep = truncation_error(&spec, &t, &ctx.complex(z.re, z.im), &Reference::exact(), &ctx).unwrap();
        let ratio = rep.ratio.unwrap();
        prop_assert!(ratio > 0.1 && ratio < 5.0, "ratio {ratio} at r = {r}, θ = {theta}");
    }

    #[test]
    fn convergent_series_sums_to_its_closed_form(x in 4.0f64..12.0) {
        // a_k = 1: Σ x^{-k-1} = 1/(x − 1), whatever the averaging weight
        let ctx = PrecisionContext::default();
        let spec = build_catalog_equation(
            "custom",
            &json!({"recurrence": {"seeds": [1], "terms": [[1]]}, "offset": 1}),
        )
        .unwrap();
        let t = spec.generate_coefficients(800).unwrap();
        let bf = borel_transform(&spec, &t, &ctx).unwrap();
        let y = averaged_sum(&bf, &ctx.complex(x, 0.0), &AverageSpec::balanced(), &ctx).unwrap();
        let want = Complex::with_val(ctx.working(), (1.0 / (x - 1.0), 0));
        let err = Float::with_val(ctx.working(), Complex::with_val(ctx.working(), &y - &want).abs_ref()).to_f64();
        prop_assert!(err < 1e-14 / (x - 1.0), "err {err}");
    }

    #[test]
    fn erf_fit_recovers_its_parameters(
        jr in -5.0f64..5.0,
        ji in 1.0f64..5.0,
        center in -0.8f64..0.8,
        off in -1.0f64..1.0,
    ) {
        let jump = Complex64::new(jr, ji);
        let grid: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let vals: Vec<Complex64> = grid
            .iter()
            .map(|w| jump * 0.5 * erf_f64((w - center) / 2f64.sqrt()) + Complex64::new(off, 0.0))
            .collect();
        let fit = fit_erf(&grid, &vals, ErfShape::FixedWidth(2f64.sqrt())).unwrap();
        prop_assert!((fit.jump - jump).norm() < 1e-6 * jump.norm());
        prop_assert!((fit.center - center).abs() < 1e-6);
        prop_assert!(fit.residual_rms < 1e-8);
    }

    #[test]
    fn configs_round_trip(k_max in 2usize..50, bits in 64u32..512, with_id in any::<bool>()) {
        let mut v = json!({"equation": "toy", "experiment": "coeffs", "k_max": k_max, "precision": bits});
        if with_id {
            v["id"] = json!(format!("run{k_max}"));
        }
        let c = RunConfig::from_value(&v).unwrap();
        prop_assert_eq!(RunConfig::from_value(&c.to_value()).unwrap(), c);
    }
}

#[test]
fn identical_configs_give_identical_csv() {
    let v = json!({"equation": "airy", "experiment": "truncate", "radii": [10, 20], "angles": [0.3, 1.0]});
    let c = RunConfig::from_value(&v).unwrap();
    let a = execute(&c).unwrap().csv.render();
    let b = execute(&c).unwrap().csv.render();
    assert_eq!(a, b);
    // 256 bits print with ⌈256·0.302⌉ = 78 significant digits
    let first = a.lines().nth(1).unwrap();
    let rem_re = first.split(',').nth(3).unwrap();
    let digits = rem_re.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
    assert_eq!(digits.len(), 78, "{rem_re}");
}
