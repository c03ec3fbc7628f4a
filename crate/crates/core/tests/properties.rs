//! Randomised invariants over expressions, models, constructions and checks.

use std::collections::BTreeMap;

use kcl_core::constructor::{build_profile_ode, build_profile_quadrature, solve_radius};
use kcl_core::expr;
use kcl_core::verifier::{self, BoundParams, Tolerances};
use kcl_core::{Error, GraphSolution, ModelManifold, ModelSpec, QuadratureConfig, StepControl, Variant};
use proptest::prelude::*;

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

// ---- expressions ----------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Tok {
    Num(u8),
    Op(char),
}

/// Shunting-yard over a flat `a op b op c ...` sequence.
fn reference_eval(tokens: &[Tok]) -> f64 {
    fn prec(op: char) -> u8 {
        match op {
            '+' | '-' => 1,
            '*' | '/' => 2,
            _ => 3,
        }
    }
    fn apply(vals: &mut Vec<f64>, op: char) {
        let b = vals.pop().unwrap();
        let a = vals.pop().unwrap();
        vals.push(match op {
            '+' => a + b,
            '-' => a - b,
            '*' => a * b,
            '/' => a / b,
            _ => a.powf(b),
        });
    }
    let mut vals = Vec::new();
    let mut ops: Vec<char> = Vec::new();
    for t in tokens {
        match *t {
            Tok::Num(n) => vals.push(n as f64),
            Tok::Op(op) => {
                while let Some(&top) = ops.last() {
                    // '^' is right associative
                    let pops = if op == '^' { prec(top) > prec(op) } else { prec(top) >= prec(op) };
                    if !pops {
                        break;
                    }
                    apply(&mut vals, ops.pop().unwrap());
                }
                ops.push(op);
            }
        }
    }
    while let Some(op) = ops.pop() {
        apply(&mut vals, op);
    }
    vals[0]
}

fn flat_expression() -> impl Strategy<Value = Vec<Tok>> {
    let op = prop::sample::select(vec!['+', '-', '*', '/', '^']);
    (1u8..10, prop::collection::vec((op, 1u8..4), 1..7)).prop_map(|(first, rest)| {
        let mut toks = vec![Tok::Num(first)];
        for (op, n) in rest {
            toks.push(Tok::Op(op));
            toks.push(Tok::Num(n));
        }
        toks
    })
}

fn render(tokens: &[Tok]) -> String {
    tokens
        .iter()
        .map(|t| match t {
            Tok::Num(n) => n.to_string(),
            Tok::Op(c) => format!(" {c} "),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn precedence_matches_reference(tokens in flat_expression()) {
        let want = reference_eval(&tokens);
        prop_assume!(want.is_finite());
        let src = render(&tokens);
        let got = expr::parse(&src).unwrap().eval(0.0, &BTreeMap::new()).unwrap();
        prop_assert!(got == want || (got - want).abs() <= 1e-12 * want.abs(), "{src}: {got} vs {want}");
    }

    #[test]
    fn display_round_trips(tokens in flat_expression(), r in 0.0f64..3.0) {
        let src = format!("-({}) * r + sinh(r)", render(&tokens));
        let ast = expr::parse(&src).unwrap();
        let params = BTreeMap::new();
        if let Ok(v) = ast.eval(r, &params) {
            let again = expr::parse(&ast.to_string()).unwrap().eval(r, &params).unwrap();
            prop_assert_eq!(v, again);
        }
    }
}

// ---- models and constructions --------------------------------------------

#[derive(Debug, Clone)]
struct Case {
    spec: ModelSpec,
    h0: f64,
    variant: Variant,
}

fn base_spec() -> impl Strategy<Value = ModelSpec> {
    (0usize..3, 2usize..4, 0.25f64..4.0).prop_map(|(which, n, kappa)| match which {
        0 => ModelSpec::Euclidean { n },
        1 => ModelSpec::Hyperbolic { n, kappa },
        _ => ModelSpec::Spherical { n, kappa },
    })
}

fn model_spec() -> impl Strategy<Value = ModelSpec> {
    (base_spec(), 0usize..3, 0.25f64..2.0).prop_map(|(base, wrap, c)| match wrap {
        0 => base,
        1 => ModelSpec::CorollaryWeighted { base: Box::new(base), c },
        _ => ModelSpec::CorollaryUnweighted { base: Box::new(base), c },
    })
}

fn case() -> impl Strategy<Value = Case> {
    (model_spec(), -4.0f64..-0.25, any::<bool>()).prop_map(|(spec, h0, weighted)| Case {
        spec,
        h0,
        variant: if weighted { Variant::Weighted } else { Variant::Unweighted },
    })
}

/// Builds the quadrature solution, or `None` when `n|H0|` is out of reach.
fn solve(c: &Case) -> Option<GraphSolution> {
    let m = ModelManifold::new(&c.spec).unwrap();
    match build_profile_quadrature(&m, c.h0, c.variant, 257, &q()) {
        Ok(sol) => Some(sol),
        Err(Error::TargetOutOfRange { .. }) | Err(Error::NonMonotoneRatio { .. }) => None,
        Err(e) => panic!("{}: {e}", c.spec),
    }
}

fn without_weight_oscillation_growth(spec: &ModelSpec) -> bool {
    match spec {
        ModelSpec::Euclidean { .. } | ModelSpec::Spherical { .. } => true,
        ModelSpec::CorollaryWeighted { c, .. } => *c == 1.0,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ball_volume_is_monotone(spec in model_spec(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let m = ModelManifold::new(&spec).unwrap();
        let end = m.domain_end().min(5.0);
        let (lo, hi) = if a < b { (a * end, b * end) } else { (b * end, a * end) };
        prop_assume!(hi - lo > 1e-6 * end);
        for k in [0.0, 1.0, 2.0] {
            prop_assert!(m.ball_volume(lo, k, &q()).unwrap() < m.ball_volume(hi, k, &q()).unwrap());
        }
    }

    #[test]
    fn construction_invariants(c in case()) {
        let sol = solve(&c);
        prop_assume!(sol.is_some());
        let sol = sol.unwrap();
        let p = &sol.profile;
        let tol = Tolerances::default();
        let last = p.len() - 1;

        prop_assert_eq!(p.u[last], 0.0);
        prop_assert!(p.u.iter().all(|u| *u >= 0.0));
        prop_assert!(p.u.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(p.phi[0], 0.0);
        prop_assert_eq!(p.phi[last], std::f64::consts::FRAC_PI_2);

        // 0 < 1/W <= e^{-ψ} in the interior
        let angle = verifier::angle_function_check(&sol, &tol).unwrap();
        prop_assert!(angle[0].passed(), "{:?}", angle[0]);

        let k = sol.weight_exponent();
        let sal = verifier::salavessa_check(&sol.model, &sol, &[0.5 * sol.r0], k, &tol, &q()).unwrap();
        prop_assert!(sal[0].margin > 0.0, "{:?}", sal[0]);
        prop_assert!(sal[1].passed(), "{:?}", sal[1]);

        let flux = verifier::flux_identity_check(&sol, &tol, &q()).unwrap();
        prop_assert!(flux.passed(), "{}: {:?}", c.spec, flux);

        let res = verifier::curvature_residual(&sol).unwrap();
        prop_assert!(res.sup <= 1e-6, "{}: {:?}", c.spec, res);

        let bp = BoundParams::from_solution(&sol, None, None).unwrap();
        let bounds = verifier::height_bound_check(&sol, &bp, &tol, &q()).unwrap();
        prop_assert!(bounds[2].passed(), "{:?}", bounds[2]);
        if without_weight_oscillation_growth(&c.spec) {
            prop_assert!(bounds[1].margin >= bounds[2].margin - 1e-12, "{:?} {:?}", bounds[1], bounds[2]);
        }

        // determinism, bit for bit
        let again = solve(&c).unwrap();
        prop_assert_eq!(&again.profile, p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ode_trace_invariants(c in case()) {
        let m = ModelManifold::new(&c.spec).unwrap();
        prop_assume!(solve_radius(&m, c.h0, c.variant.weight_exponent(), &q()).is_ok());
        let sol = build_profile_ode(&m, c.h0, c.variant, 129, &StepControl::default(), &q()).unwrap();
        let length = sol.trace.as_ref().unwrap().length();
        let mut previous = 0.0;
        for i in 1..=8 {
            let v = verifier::intrinsic_ball_volume(&sol, length * i as f64 / 8.0, 2.0, &q()).unwrap();
            prop_assert!(v > previous);
            previous = v;
        }
        let res = verifier::laplacian_identity(&sol, 2.0).unwrap();
        prop_assert!(res.sup <= 1e-5 * (1.0 + c.h0 * c.h0), "{}: {:?}", c.spec, res);
    }
}
