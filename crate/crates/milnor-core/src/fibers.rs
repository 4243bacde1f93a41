//! Fiber samplers: Gauss-Newton solves from random starts, kernel-direction
//! walks along a fiber, Milnor-tube point clouds, and preimages of the
//! curved rays produced by the conic flows.
//!
//! Every accepted point carries its residual, and the residual contract
//! (`||f(x) - c|| <= tol`) is checked at acceptance time, never assumed.

use crate::conic::{ConicError, ConicFlow};
use crate::germ::{GermError, MapGerm};
use crate::linalg::{factorize, min_norm_solve, NumError};
use crate::sampling::{sample_ball_with, sample_sphere};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 50;
const MAX_HALVINGS: usize = 20;
const MERGE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, thiserror::Error)]
pub enum FiberError {
    #[error("kernel is trivial (n = k): no fiber directions to walk")]
    KernelTrivial,
    #[error("correction back to the fiber failed at step {step}")]
    CorrectionFailed { step: usize },
    #[error(transparent)]
    Germ(#[from] GermError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

/// Points found on the fiber `f^{-1}(c)` inside the epsilon-ball.
#[derive(Debug, Clone, Serialize)]
pub struct FiberSample {
    pub target: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Starts that failed to converge.
    pub failures: usize,
    pub seed: u64,
}

impl FiberSample {
    pub fn point(&self, i: usize) -> DVector<f64> {
        DVector::from_vec(self.points[i].clone())
    }
}

/// Gauss-Newton with backtracking from one start; returns the converged
/// point when the residual contract and the ball constraint hold.
fn solve_to_fiber(
    germ: &MapGerm,
    c: &DVector<f64>,
    start: &DVector<f64>,
    eps: f64,
    rank_tol: f64,
) -> Option<(DVector<f64>, f64)> {
    let mut x = start.clone();
    let mut residual = match germ.evaluate(&x) {
        Ok(v) => (v - c).norm(),
        Err(_) => return None,
    };
    for _ in 0..MAX_ITERATIONS {
        if residual <= RESIDUAL_TOL {
            if x.norm() <= eps * (1.0 + 1e-12) {
                return Some((x, residual));
            }
            return None;
        }
        let (value, jac) = germ.evaluate_with_jacobian(&x).ok()?;
        let rhs = c - value;
        // least-squares step; tolerate inconsistency, backtracking guards it
        let step = min_norm_solve(&jac, &rhs, rank_tol, f64::INFINITY).ok()?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &x + &step * lambda;
            if let Ok(v) = germ.evaluate(&candidate) {
                let r = (v - c).norm();
                if r < residual {
                    x = candidate;
                    residual = r;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    if residual <= RESIDUAL_TOL && x.norm() <= eps * (1.0 + 1e-12) {
        Some((x, residual))
    } else {
        None
    }
}

/// Sample the fiber `f^{-1}(c)` from `count` random starts in the
/// epsilon-ball. Zero-dimensional fibers (n = k) are deduplicated; fibers
/// with continua are not.
pub fn fiber_points(
    germ: &MapGerm,
    c: &DVector<f64>,
    eps: f64,
    count: usize,
    seed: u64,
    rank_tol: f64,
) -> FiberSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<DVector<f64>> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let mut failures = 0usize;
    let merge = germ.n() == germ.k();
    for _ in 0..count {
        let start = sample_ball_with(&mut rng, germ.n(), eps);
        match solve_to_fiber(germ, c, &start, eps, rank_tol) {
            Some((x, r)) => {
                if merge && points.iter().any(|p| (p - &x).norm() <= MERGE_RADIUS) {
                    continue;
                }
                points.push(x);
                residuals.push(r);
            }
            None => failures += 1,
        }
    }
    FiberSample {
        target: c.iter().copied().collect(),
        points: points.iter().map(|p| p.iter().copied().collect()).collect(),
        residuals,
        failures,
        seed,
    }
}

/// Predictor-corrector walk along the fiber through `x0`: predict along a
/// random unit kernel direction, correct back by Gauss-Newton, stop when the
/// path leaves the epsilon-ball or after `steps` steps.
pub fn fiber_walk(
    germ: &MapGerm,
    x0: &DVector<f64>,
    steps: usize,
    step_size: f64,
    eps: f64,
    seed: u64,
    rank_tol: f64,
) -> Result<Vec<DVector<f64>>, FiberError> {
    if germ.n() == germ.k() {
        return Err(FiberError::KernelTrivial);
    }
    let c = germ.evaluate(x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = vec![x0.clone()];
    let mut x = x0.clone();
    for step in 0..steps {
        let jac = germ.jacobian(&x)?;
        let fact = factorize(&jac, rank_tol)?;
        if fact.kernel.is_empty() {
            return Err(FiberError::KernelTrivial);
        }
        let mut dir = DVector::zeros(germ.n());
        for b in &fact.kernel {
            let coeff: f64 =
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            dir += b * coeff;
        }
        let norm = dir.norm();
        if norm < 1e-12 {
            continue;
        }
        dir /= norm;
        let predicted = &x + dir * step_size;
        match solve_to_fiber(germ, &c, &predicted, f64::INFINITY, rank_tol) {
            Some((corrected, _)) => {
                if corrected.norm() > eps {
                    break;
                }
                x = corrected;
                path.push(x.clone());
            }
            None => return Err(FiberError::CorrectionFailed { step }),
        }
    }
    Ok(path)
}

/// Point cloud of the Milnor tube: fibers over uniformly sampled values on
/// the delta-sphere of the target.
pub fn milnor_tube_sample(
    germ: &MapGerm,
    eps: f64,
    delta: f64,
    value_count: usize,
    per_fiber: usize,
    seed: u64,
    rank_tol: f64,
) -> Vec<FiberSample> {
    let values = sample_sphere(germ.k(), delta, value_count, seed);
    values
        .iter()
        .enumerate()
        .map(|(i, c)| fiber_points(germ, c, eps, per_fiber, seed.wrapping_add(1 + i as u64), rank_tol))
        .collect()
}

/// Preimage samples of one curved ray: the flow curve through `theta`
/// composed with fiber solves at each curve value.
#[derive(Debug, Clone, Serialize)]
pub struct EThetaSample {
    pub alpha: Vec<f64>,
    pub eta: f64,
    pub theta: Vec<f64>,
    /// `(t, y)` samples of the curve in the target.
    pub curve: Vec<(f64, Vec<f64>)>,
    /// One fiber sample per curve value.
    pub fibers: Vec<FiberSample>,
    pub seed: u64,
}

#[allow(clippy::too_many_arguments)]
pub fn e_theta_sample(
    germ: &MapGerm,
    flow: &ConicFlow,
    theta: &DVector<f64>,
    eps: f64,
    curve_samples: usize,
    per_value: usize,
    seed: u64,
    rank_tol: f64,
) -> Result<EThetaSample, FiberError> {
    let curve = flow.curve(theta, curve_samples, None)?;
    let mut fibers = Vec::with_capacity(curve.samples.len());
    for (i, (_t, y)) in curve.samples.iter().enumerate() {
        fibers.push(fiber_points(
            germ,
            y,
            eps,
            per_value,
            seed.wrapping_add(i as u64),
            rank_tol,
        ));
    }
    Ok(EThetaSample {
        alpha: flow.parameter().alpha().iter().copied().collect(),
        eta: flow.eta(),
        theta: theta.iter().copied().collect(),
        curve: curve
            .samples
            .iter()
            .map(|(t, y)| (*t, y.iter().copied().collect()))
            .collect(),
        fibers,
        seed,
    })
}
