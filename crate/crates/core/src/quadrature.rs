//! Adaptive Gauss–Kronrod (G7/K15) quadrature.
//!
//! Intervals are bisected in order of decreasing error estimate until the
//! summed estimate drops below `max(abs_tol, rel_tol * |I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances for every adaptive integral computed by the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_depth: 48,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_depth < 1 {
            return Err(Error::Config("quadrature depth must be at least 1".into()));
        }
        Ok(())
    }

    pub fn halved(&self) -> Self {
        QuadratureConfig {
            abs_tol: self.abs_tol / 2.0,
            rel_tol: self.rel_tol / 2.0,
            max_depth: self.max_depth,
        }
    }
}

/// Value and error estimate of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Most panels any single integral may use.
const MAX_PANELS: usize = 1 << 16;

/// One 15-point Kronrod panel with the QUADPACK error rescaling.
///
/// Returns the value, the error estimate and the rounding floor of that
/// estimate (`50 ε ∫|f|`).
pub fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok((value, err, floor))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    floor: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` (either orientation) to the configured tolerance.
///
/// Stops early, without error, once every panel's estimate sits at its
/// rounding floor: further bisection cannot lower it.
pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (value, error, floor) = gk15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value,
        error,
        floor,
        depth: 0,
    });
    let mut total = value;
    let mut total_err = error;
    let mut total_floor = floor;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tol || total_err <= total_floor {
            break;
        }
        let worst = heap.pop().expect("heap never empties");
        if worst.depth >= cfg.max_depth || heap.len() >= MAX_PANELS {
            return Err(Error::QuadratureNonConvergence {
                achieved: total_err,
                requested: tol,
                a,
                b,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1, f1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2, f2) = gk15(&mut f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        total_floor += f1 + f2 - worst.floor;
        for (lo, hi, v, e, fl) in [(worst.a, mid, v1, e1, f1), (mid, worst.b, v2, e2, f2)] {
            heap.push(Panel {
                a: lo,
                b: hi,
                value: v,
                error: e,
                floor: fl,
                depth: worst.depth + 1,
            });
        }
        // sums drift under many updates; refresh them from the panels
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
            total_floor = heap.iter().map(|p| p.floor).sum();
        }
    }
    let intervals = heap.len();
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(Estimate {
        value,
        error,
        intervals,
    })
}

/// Integrates `f` over `[a, b] ⊂ (-∞, end]` where `f` may blow up like
/// `(end - r)^(-1/2)` at `end`.
///
/// Uses `r = end - w²`, `dr = -2w dw`, so the transformed integrand is
/// bounded. The closure receives both `r` and `end - r = w²` so callers can
/// evaluate the singular factor without cancellation.
pub fn integrate_to_sqrt_endpoint<F>(
    mut f: F,
    a: f64,
    b: f64,
    end: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let wa = (end - a).max(0.0).sqrt();
    let wb = (end - b).max(0.0).sqrt();
    // ∫_a^b f dr = ∫_{wb}^{wa} 2w f(end - w²) dw
    integrate(
        |w| {
            if w == 0.0 {
                return Ok(0.0);
            }
            let gap = w * w;
            Ok(2.0 * w * f(end - gap, gap)?)
        },
        wb,
        wa,
        cfg,
    )
}
