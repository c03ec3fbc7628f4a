//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kcl_cli::commands::profile_csv;
use kcl_cli::output::to_json;
use kcl_core::constructor::{build_profile_ode, build_profile_quadrature, corollary_profile, solve_radius};
use kcl_core::verifier::{self, BoundParams, Tolerances};
use kcl_core::{GraphSolution, ModelManifold, ModelSpec, QuadratureConfig, StepControl, Variant};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

const GRID: usize = 257;

struct Line {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn model(spec: &ModelSpec) -> ModelManifold {
    ModelManifold::new(spec).unwrap()
}

fn hyperbolic2() -> ModelSpec {
    ModelSpec::Hyperbolic { n: 2, kappa: 1.0 }
}

fn builtin_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::Euclidean { n: 2 },
        ModelSpec::Euclidean { n: 3 },
        hyperbolic2(),
        ModelSpec::Hyperbolic { n: 3, kappa: 1.0 },
        ModelSpec::Spherical { n: 2, kappa: 1.0 },
        ModelSpec::Spherical { n: 3, kappa: 1.0 },
        ModelSpec::CorollaryWeighted { base: Box::new(hyperbolic2()), c: 1.0 },
        ModelSpec::CorollaryUnweighted { base: Box::new(hyperbolic2()), c: 1.0 },
    ]
}

const VARIANTS: [Variant; 2] = [Variant::Weighted, Variant::Unweighted];

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn secs(d: Duration) -> String {
    format!("{:.3} s", d.as_secs_f64())
}

fn euclidean_sharpness() -> Line {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for n in [2, 3, 4] {
        for h0 in [-0.5, -1.0, -2.0] {
            let start = Instant::now();
            let m = model(&ModelSpec::Euclidean { n });
            let sol = build_profile_quadrature(&m, h0, Variant::Weighted, GRID, &q()).unwrap();
            slowest = slowest.max(start.elapsed());
            worst = worst.max((sol.profile.max_height() - 1.0 / h0.abs()).abs());
        }
    }
    Line {
        id: 1,
        title: "euclidean sharpness",
        pass: worst <= 1e-8 && slowest < Duration::from_secs(1),
        detail: format!("max |max u - 1/|H0|| = {} (tol 1e-8), slowest case {} (limit 1 s)", sci(worst), secs(slowest)),
    }
}

fn known_radii() -> Line {
    let start = Instant::now();
    let ln3 = solve_radius(&model(&hyperbolic2()), -1.0, 1.0, &q()).unwrap();
    let sph = solve_radius(&model(&ModelSpec::Spherical { n: 2, kappa: 1.0 }), -1.0, 1.0, &q()).unwrap();
    let took = start.elapsed();
    let e1 = (ln3 - 3f64.ln()).abs();
    let e2 = (sph - 2.0 * 0.5f64.atan()).abs();
    Line {
        id: 2,
        title: "known radii",
        pass: e1 <= 1e-10 && e2 <= 1e-10 && took < Duration::from_millis(100),
        detail: format!("|r0 - ln 3| = {}, |r0 - 2 atan(1/2)| = {} (tol 1e-10), {} (limit 0.1 s)", sci(e1), sci(e2), secs(took)),
    }
}

struct Builds {
    pairs: Vec<(String, GraphSolution, GraphSolution)>,
    elapsed: Duration,
}

fn build_all() -> Builds {
    let start = Instant::now();
    let mut pairs = Vec::new();
    for spec in builtin_models() {
        let m = model(&spec);
        for variant in VARIANTS {
            let quad = build_profile_quadrature(&m, -1.0, variant, GRID, &q()).unwrap();
            let ode = build_profile_ode(&m, -1.0, variant, GRID, &StepControl::default(), &q()).unwrap();
            pairs.push((format!("{spec} {}", variant.name()), quad, ode));
        }
    }
    Builds {
        pairs,
        elapsed: start.elapsed(),
    }
}

fn cross_validation(b: &Builds) -> Line {
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for (name, quad, ode) in &b.pairs {
        let sup = verifier::method_agreement(quad, ode).unwrap();
        if sup > worst {
            worst = sup;
            at = name.clone();
        }
    }
    Line {
        id: 3,
        title: "ODE/quadrature cross-validation",
        pass: worst <= 1e-6 && b.elapsed < Duration::from_secs(5),
        detail: format!(
            "{} builds, sup |u_ode - u_quad| = {} at {at} (tol 1e-6), {} total (limit 5 s)",
            2 * b.pairs.len(),
            sci(worst),
            secs(b.elapsed)
        ),
    }
}

fn corollary_weighted_c1() -> GraphSolution {
    corollary_profile(&hyperbolic2(), 1.0, -1.0, Variant::Weighted, GRID, &q()).unwrap()
}

fn all_constructions(b: &Builds) -> Vec<(String, &GraphSolution)> {
    let mut out = Vec::new();
    for (name, quad, ode) in &b.pairs {
        out.push((format!("{name} quadrature"), quad));
        out.push((format!("{name} ode"), ode));
    }
    out
}

fn curvature_residuals(b: &Builds, closed: &GraphSolution) -> Line {
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    let mut all = all_constructions(b);
    all.push(("corollary_weighted closed form".into(), closed));
    for (name, sol) in &all {
        let sup = verifier::curvature_residual(sol).unwrap().sup;
        if sup > worst {
            worst = sup;
            at = name.clone();
        }
    }
    Line {
        id: 4,
        title: "curvature residual",
        pass: worst <= 1e-5,
        detail: format!("{} constructions, worst sup |nH - nH0| = {} at {at} (tol 1e-5)", all.len(), sci(worst)),
    }
}

fn height_bounds(closed: &GraphSolution) -> Line {
    let tol = Tolerances::default();
    let upper = 1f64.sinh().sqrt(); // e^{ψ(1)} with ψ = (1/2) log(sinh r / r)
    let height = closed.max_weighted_height().unwrap();
    let bp = BoundParams::from_solution(closed, None, None).unwrap();
    let checks = verifier::height_bound_check(closed, &bp, &tol, &q()).unwrap();
    let theorem_a = checks.iter().find(|c| c.name == "height_theorem_a").unwrap();
    let sharp = checks.iter().find(|c| c.name == "height_integral").unwrap();
    let pass = (1.0..=upper).contains(&height)
        && theorem_a.margin >= 0.0
        && sharp.margin >= 0.0
        && sharp.margin <= theorem_a.margin;
    Line {
        id: 5,
        title: "height bounds",
        pass,
        detail: format!(
            "max u e^-psi = {:.7} in [1, {:.7}], margin(hest) = {}, margin(integral) = {}",
            height,
            upper,
            sci(theorem_a.margin),
            sci(sharp.margin)
        ),
    }
}

fn flux_identity(b: &Builds, closed: &GraphSolution) -> Line {
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    let mut all = all_constructions(b);
    all.push(("corollary_weighted closed form".into(), closed));
    for (name, sol) in &all {
        let c = verifier::flux_identity_check(sol, &tol, &q()).unwrap();
        if c.measured > worst {
            worst = c.measured;
            at = name.clone();
        }
    }
    Line {
        id: 6,
        title: "flux identity",
        pass: worst <= 1e-8,
        detail: format!("{} constructions, worst pointwise gap = {} at {at} (tol 1e-8)", all.len(), sci(worst)),
    }
}

fn lemma_checks() -> Line {
    let tol = Tolerances::default();
    let m = model(&ModelSpec::Euclidean { n: 2 });
    let sol = build_profile_ode(&m, -1.0, Variant::Weighted, GRID, &StepControl::default(), &q()).unwrap();
    let mut failures = 0;
    let mut min_margin = f64::INFINITY;
    let mut count = 0;
    for r in [0.25, 0.5, 1.0] {
        for delta in [1.0, 2.0] {
            for d in [0.0, 2.0] {
                for c in verifier::volume_lemma_check(&sol, r, delta, d, &q(), &tol).unwrap() {
                    count += 1;
                    min_margin = min_margin.min(c.margin);
                    if !c.passed() {
                        failures += 1;
                    }
                }
            }
        }
    }
    let cap = verifier::intrinsic_ball_volume(&sol, 1.0, 0.0, &q()).unwrap();
    let err = (cap - 2.0 * PI * (1.0 - 1f64.cos())).abs();
    Line {
        id: 7,
        title: "lemma checks",
        pass: failures == 0 && err <= 1e-8,
        detail: format!(
            "{count} checks, {failures} failed, smallest margin {}; |vol(B_1) - 2 pi (1 - cos 1)| = {} (tol 1e-8)",
            sci(min_margin),
            sci(err)
        ),
    }
}

fn growth_probe() -> Line {
    let tol = Tolerances::default();
    let radii: Vec<f64> = (0..16).map(|i| 5.0 * 4f64.powf(i as f64 / 15.0)).collect();
    let flat = verifier::volume_growth_check(&model(&ModelSpec::Euclidean { n: 2 }), 1.0, &radii, &q(), &tol).unwrap();
    let hyp = verifier::volume_growth_check(&model(&hyperbolic2()), 1.0, &radii, &q(), &tol).unwrap();
    Line {
        id: 8,
        title: "volume-growth probe",
        pass: (flat.measured - 2.0).abs() <= 0.02 && flat.passed() && hyp.measured >= 2.5 && !hyp.passed(),
        detail: format!(
            "euclidean(2) slope {:.4} ({}), hyperbolic(2,1) slope {:.4} ({}) over R in [5, 20]",
            flat.measured,
            flat.status.name(),
            hyp.measured,
            hyp.status.name()
        ),
    }
}

fn random_spec() -> impl Strategy<Value = (ModelSpec, f64, Variant)> {
    use proptest::prelude::*;
    let base = (0usize..3, 2usize..4, 0.25f64..4.0).prop_map(|(which, n, kappa)| match which {
        0 => ModelSpec::Euclidean { n },
        1 => ModelSpec::Hyperbolic { n, kappa },
        _ => ModelSpec::Spherical { n, kappa },
    });
    (base, 0usize..3, 0.25f64..2.0, -4.0f64..-0.25, any::<bool>()).prop_map(|(base, wrap, c, h0, w)| {
        let spec = match wrap {
            0 => base,
            1 => ModelSpec::CorollaryWeighted { base: Box::new(base), c },
            _ => ModelSpec::CorollaryUnweighted { base: Box::new(base), c },
        };
        (spec, h0, if w { Variant::Weighted } else { Variant::Unweighted })
    })
}

fn property_suites() -> Line {
    let start = Instant::now();
    let tol = Tolerances::default();
    let config = Config {
        cases: 200,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let strategy = random_spec();
    let (mut built, mut skipped) = (0, 0);
    let mut violations = Vec::new();
    while built < 200 && skipped < 1000 {
        let (spec, h0, variant) = strategy.new_tree(&mut runner).unwrap().current();
        let m = model(&spec);
        let Ok(sol) = build_profile_quadrature(&m, h0, variant, GRID, &q()) else {
            skipped += 1;
            continue;
        };
        built += 1;
        let mut fail = |what: &str| violations.push(format!("{spec} H0={h0:.3}: {what}"));
        let vols: Vec<f64> = (0..=8)
            .map(|i| m.ball_volume(sol.r0 * i as f64 / 8.0, sol.weight_exponent(), &q()).unwrap())
            .collect();
        if !vols.windows(2).all(|w| w[1] > w[0]) {
            fail("ball volume not increasing");
        }
        if !verifier::angle_function_check(&sol, &tol).unwrap()[0].passed() {
            fail("angle function bounds");
        }
        let sal = verifier::salavessa_check(&m, &sol, &[sol.r0], sol.weight_exponent(), &tol, &q()).unwrap();
        if !sal[1].passed() {
            fail("Salavessa equality at r0");
        }
        let again = build_profile_quadrature(&m, h0, variant, GRID, &q()).unwrap();
        let report = verifier::curvature_residual_check(&sol, &tol).unwrap();
        let report_again = verifier::curvature_residual_check(&again, &tol).unwrap();
        if profile_csv(&sol).unwrap() != profile_csv(&again).unwrap() || to_json(&report) != to_json(&report_again) {
            fail("outputs not byte-stable");
        }
    }
    let took = start.elapsed();
    Line {
        id: 9,
        title: "property suites",
        pass: built == 200 && violations.is_empty() && took < Duration::from_secs(60),
        detail: format!(
            "{built} random constructions ({skipped} unattainable targets skipped), {} violations{}, {} (limit 60 s)",
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default(),
            secs(took)
        ),
    }
}

fn main() -> ExitCode {
    let builds = build_all();
    let closed = corollary_weighted_c1();
    let lines = vec![
        euclidean_sharpness(),
        known_radii(),
        cross_validation(&builds),
        curvature_residuals(&builds, &closed),
        height_bounds(&closed),
        flux_identity(&builds, &closed),
        lemma_checks(),
        growth_probe(),
        property_suites(),
    ];
    let mut ok = true;
    for l in &lines {
        ok &= l.pass;
        println!("criterion {} [{}] {}: {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.title, l.detail);
    }
    println!("acceptance: {}/{} criteria pass", lines.iter().filter(|l| l.pass).count(), lines.len());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
