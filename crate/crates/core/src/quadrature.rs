//! Adaptive Gauss–Kronrod (7/15) quadrature and nested integration over a ball.

// Tabulated nodes and weights, kept at their published precision.
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
// Gauss weights for the odd-indexed Kronrod nodes (and the center).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_489_0,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive bisection until the summed error estimate is below
/// `max(abs_tol, rel_tol·|I|)`, or below the rounding floor of the
/// accumulated `∫|f|`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Integral> {
    let (v, e) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let value: f64 = intervals.iter().map(|i| i.2).sum();
        let error: f64 = intervals.iter().map(|i| i.3).sum();
        let magnitude: f64 = intervals.iter().map(|i| i.2.abs()).sum();
        let floor = 50.0 * f64::EPSILON * magnitude;
        if error <= abs_tol.max(rel_tol * value.abs()).max(floor) {
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        if intervals.len() >= max_intervals {
            return Err(Error::Numeric(format!(
                "quadrature on [{a}, {b}] did not converge: value {value}, error estimate {error} after {} intervals / {evaluations} evaluations",
                intervals.len()
            )));
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Tolerances for [`ball_integral`].
#[derive(Debug, Clone, Copy)]
pub struct BallTolerance {
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for BallTolerance {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

/// `∫_{‖y‖ ≤ r} f(y) dy` for `y ∈ ℝ^d` by nested 1-D integration.
///
/// Each coordinate is written `y_i = ρ_i sin φ_i` with `ρ_i` the radius left
/// by the previous coordinates, which removes the square-root endpoint
/// behaviour of the ball's boundary. A coarse pass fixes the magnitude of
/// the integral so inner levels can stop on an absolute tolerance; near the
/// boundary integrands built from `r² − ‖y‖²` are only accurate to rounding.
pub fn ball_integral<F: Fn(&[f64]) -> f64>(
    f: &F,
    d: usize,
    radius: f64,
    tol: BallTolerance,
) -> Result<f64> {
    if d == 0 {
        return Err(Error::Config("ball dimension must be at least 1".into()));
    }
    let start = vec![0.0; d];
    if d == 1 {
        return nested(
            f,
            &start,
            0,
            radius * radius,
            tol.rel_tol,
            0.0,
            tol.max_intervals,
        );
    }
    let coarse = nested(f, &start, 0, radius * radius, 1e-6, 0.0, tol.max_intervals)?;
    // an error δ in a level-k integral reaches the total scaled by at most (π r)^k
    let unit = tol.rel_tol * coarse.abs() / (std::f64::consts::PI * radius).max(1.0).powi(d as i32);
    nested(
        f,
        &start,
        0,
        radius * radius,
        tol.rel_tol,
        unit,
        tol.max_intervals,
    )
}

fn nested<F: Fn(&[f64]) -> f64>(
    f: &F,
    point: &[f64],
    depth: usize,
    remaining_sq: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    let d = point.len();
    let rho = remaining_sq.max(0.0).sqrt();
    if rho == 0.0 {
        return Ok(0.0);
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut failure = None;
    let result = integrate(
        |phi| {
            if failure.is_some() {
                return 0.0;
            }
            let (s, c) = phi.sin_cos();
            let mut p = point.to_vec();
            p[depth] = rho * s;
            let jac = rho * c;
            if depth + 1 == d {
                f(&p) * jac
            } else {
                let left = remaining_sq - p[depth] * p[depth];
                match nested(f, &p, depth + 1, left, rel_tol, abs_tol, max_intervals) {
                    Ok(v) => v * jac,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            }
        },
        -half_pi,
        half_pi,
        abs_tol,
        rel_tol,
        max_intervals,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result?.value)
}
