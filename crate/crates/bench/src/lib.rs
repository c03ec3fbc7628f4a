//! Shared fixtures for the benchmarks.

use kcl_core::{ModelManifold, ModelSpec};

/// Models exercised by every benchmark group.
pub fn fixtures() -> Vec<(&'static str, ModelManifold)> {
    let specs = [
        ("euclidean2", ModelSpec::Euclidean { n: 2 }),
        ("hyperbolic2", ModelSpec::Hyperbolic { n: 2, kappa: 1.0 }),
        ("spherical3", ModelSpec::Spherical { n: 3, kappa: 1.0 }),
        (
            "corollary_weighted",
            ModelSpec::CorollaryWeighted {
                base: Box::new(ModelSpec::Hyperbolic { n: 2, kappa: 1.0 }),
                c: 1.0,
            },
        ),
    ];
    specs
        .into_iter()
        .map(|(name, spec)| (name, ModelManifold::new(&spec).expect("built-in model")))
        .collect()
}
