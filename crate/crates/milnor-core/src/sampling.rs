//! Deterministic seeded sampling of spheres, shells and tube complements,
//! the randomized search for a suitable-parameter radius, and parameter-grid
//! suitability maps.
//!
//! All draws come from ChaCha8 streams assigned up front (one per stratum or
//! candidate), so results are independent of evaluation order and
//! reproducible from `(plan, seed)` alone.

use crate::germ::MapGerm;
use crate::regularity::{suitability_at, RegularityError, SuitabilityVerdict, ToleranceProfile};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SamplingError {
    #[error("rejection budget exhausted: {accepted} accepted in {attempts} draws")]
    RejectionBudgetExhausted { accepted: usize, attempts: usize },
    #[error("no omega candidate passed; smallest tested {smallest:.3e} still produced failures")]
    NoOmegaFound { smallest: f64 },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Counts, strata and rejection budget for a sampling run.
#[derive(Debug, Clone, Serialize)]
pub struct SamplingPlan {
    pub seed: u64,
    pub count_per_stratum: usize,
    /// Sphere radii to stratify over, each positive and at most the ambient
    /// ball radius.
    pub radii: Vec<f64>,
    /// Max rejection draws per stratum.
    pub rejection_budget: usize,
}

impl SamplingPlan {
    /// One stratum at the full radius.
    pub fn single(radius: f64, count: usize, seed: u64) -> Self {
        SamplingPlan {
            seed,
            count_per_stratum: count,
            radii: vec![radius],
            rejection_budget: count.max(1) * 200,
        }
    }

    /// Geometric strata from `radius` down to `radius / 8`, extremes
    /// included.
    pub fn strata(radius: f64, levels: usize, count_per_stratum: usize, seed: u64) -> Self {
        let levels = levels.max(1);
        let mut radii = Vec::with_capacity(levels);
        if levels == 1 {
            radii.push(radius);
        } else {
            let ratio = (1.0f64 / 8.0).powf(1.0 / (levels as f64 - 1.0));
            for j in 0..levels {
                radii.push(radius * ratio.powi(j as i32));
            }
        }
        SamplingPlan {
            seed,
            count_per_stratum,
            radii,
            rejection_budget: count_per_stratum.max(1) * 200,
        }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.count_per_stratum == 0 {
            return Err(SamplingError::InvalidPlan("counts must be >= 1".into()));
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| *r <= 0.0) {
            return Err(SamplingError::InvalidPlan(
                "radii must be nonempty and strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// One uniform point on the sphere of radius `r` in `R^n`.
pub fn sample_sphere_with(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(
            n,
            (0..n).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)),
        );
        let norm = v.norm();
        if norm > 1e-12 {
            return v * (r / norm);
        }
    }
}

/// Uniform points on the sphere of radius `r` in `R^n`, deterministic in
/// `seed`.
pub fn sample_sphere(n: usize, r: f64, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_sphere_with(&mut rng, n, r)).collect()
}

/// One uniform point in the open ball of radius `r`.
pub fn sample_ball_with(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DVector<f64> {
    let dir = sample_sphere_with(rng, n, 1.0);
    let u: f64 = rng.random();
    dir * (r * u.powf(1.0 / n as f64))
}

/// Which subset of the ball to keep while rejection-sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionMode {
    /// Near the Milnor tube: `| ||f(x)|| - delta | <= band * delta`.
    TubeBoundary { band: f64 },
    /// Outside the open solid tube: `||f(x)|| >= delta`.
    OutsideTube,
    /// Off the zero fiber: `||f(x)|| > value_floor`.
    PuncturedBall,
}

/// Points accepted by [`sample_region`], with acceptance bookkeeping.
#[derive(Debug, Clone)]
pub struct RegionSamples {
    pub points: Vec<DVector<f64>>,
    pub requested: usize,
    pub accepted: usize,
    pub attempts: usize,
}

impl RegionSamples {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

/// Rejection-sample the requested region, stratified over `plan.radii`
/// spheres. Errors only when not a single point was accepted anywhere.
pub fn sample_region(
    germ: &MapGerm,
    epsilon: f64,
    delta: f64,
    mode: RegionMode,
    plan: &SamplingPlan,
    value_floor: f64,
) -> Result<RegionSamples, SamplingError> {
    plan.validate()?;
    if plan.radii.iter().any(|r| *r > epsilon * (1.0 + 1e-12)) {
        return Err(SamplingError::InvalidPlan(format!(
            "stratum radius exceeds epsilon = {epsilon}"
        )));
    }
    let mut points = Vec::new();
    let mut attempts_total = 0usize;
    for (stratum, &r) in plan.radii.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(stratum as u64);
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < plan.count_per_stratum && attempts < plan.rejection_budget {
            attempts += 1;
            let x = sample_sphere_with(&mut rng, germ.n(), r);
            let keep = match germ.evaluate(&x) {
                Ok(f_x) => {
                    let nf = f_x.norm();
                    match mode {
                        RegionMode::TubeBoundary { band } => (nf - delta).abs() <= band * delta,
                        RegionMode::OutsideTube => nf >= delta && nf > value_floor,
                        RegionMode::PuncturedBall => nf > value_floor,
                    }
                }
                Err(_) => false,
            };
            if keep {
                accepted += 1;
                points.push(x);
            }
        }
        attempts_total += attempts;
    }
    let accepted = points.len();
    if accepted == 0 {
        return Err(SamplingError::RejectionBudgetExhausted {
            accepted,
            attempts: attempts_total,
        });
    }
    Ok(RegionSamples {
        points,
        requested: plan.count_per_stratum * plan.radii.len(),
        accepted,
        attempts: attempts_total,
    })
}

// ---------------------------------------------------------------------------
// Omega search
// ---------------------------------------------------------------------------

/// A stored (alpha, point) pair that re-evaluates to NotSuitable.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaWitness {
    pub alpha: Vec<f64>,
    pub point: Vec<f64>,
    pub margin_radial: f64,
    pub margin_vertical: f64,
}

/// Outcome of the sampled search for a radius of suitable parameters.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaSearchResult {
    pub germ: String,
    pub kind: String,
    /// Largest candidate radius whose sampled (alpha, point) pairs produced
    /// zero NotSuitable verdicts; an empirical statistic, not a proof.
    pub omega: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub alphas_tested: usize,
    pub points_tested: usize,
    pub candidates: Vec<(f64, bool)>,
    pub failure_witnesses: Vec<OmegaWitness>,
    /// Samples skipped because the predicate errored (critical point or zero
    /// value), not counted as failures.
    pub skipped: usize,
    pub seed: u64,
    pub rng: String,
    pub version: String,
}

/// Bisection over the candidate radius: each candidate draws fresh parameter
/// samples in its ball and tests every (alpha, point) pair; a candidate is
/// accepted only with zero NotSuitable verdicts.
pub fn omega_search(
    germ: &MapGerm,
    epsilon: f64,
    delta: f64,
    alphas_per_candidate: usize,
    plan: &SamplingPlan,
    tol: &ToleranceProfile,
) -> Result<OmegaSearchResult, SamplingError> {
    let region = sample_region(germ, epsilon, delta, RegionMode::OutsideTube, plan, tol.value_floor)?;
    let points = &region.points;
    let k = germ.k();

    let mut witnesses: Vec<OmegaWitness> = Vec::new();
    let mut skipped = 0usize;
    let mut alphas_tested = 0usize;
    let mut candidates: Vec<(f64, bool)> = Vec::new();

    let mut test_candidate = |omega: f64, stream: u64| -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(1_000 + stream);
        let mut ok = true;
        for _ in 0..alphas_per_candidate {
            let alpha = sample_ball_with(&mut rng, k, omega);
            alphas_tested += 1;
            for p in points {
                match suitability_at(germ, &alpha, p, tol) {
                    Ok(v) if v.suitable => {}
                    Ok(v) => {
                        ok = false;
                        witnesses.push(OmegaWitness {
                            alpha: alpha.iter().copied().collect(),
                            point: p.iter().copied().collect(),
                            margin_radial: v.margin_radial,
                            margin_vertical: v.margin_vertical,
                        });
                    }
                    Err(_) => skipped += 1,
                }
            }
        }
        ok
    };

    let hi0 = 0.95;
    let mut omega = 0.0f64;
    if test_candidate(hi0, 0) {
        omega = hi0;
        candidates.push((hi0, true));
    } else {
        candidates.push((hi0, false));
        let (mut lo, mut hi) = (0.0f64, hi0);
        for i in 1..=10u64 {
            let mid = 0.5 * (lo + hi);
            let ok = test_candidate(mid, i);
            candidates.push((mid, ok));
            if ok {
                lo = mid;
                omega = omega.max(mid);
            } else {
                hi = mid;
            }
        }
    }

    let result = OmegaSearchResult {
        germ: germ.name.clone(),
        kind: "omega-search".to_string(),
        omega,
        epsilon,
        delta,
        alphas_tested,
        points_tested: points.len(),
        candidates,
        failure_witnesses: witnesses,
        skipped,
        seed: plan.seed,
        rng: crate::regularity::RNG_DESCRIPTION.to_string(),
        version: crate::report::SCHEMA_VERSION.to_string(),
    };
    if result.omega == 0.0 {
        let smallest = result
            .candidates
            .iter()
            .map(|(w, _)| *w)
            .fold(f64::INFINITY, f64::min);
        return Err(SamplingError::NoOmegaFound { smallest });
    }
    Ok(result)
}

/// Re-run the predicate on a stored witness; used to assert witness fidelity.
pub fn reevaluate_witness(
    germ: &MapGerm,
    witness: &OmegaWitness,
    tol: &ToleranceProfile,
) -> Result<SuitabilityVerdict, RegularityError> {
    suitability_at(
        germ,
        &DVector::from_vec(witness.alpha.clone()),
        &DVector::from_vec(witness.point.clone()),
        tol,
    )
}

// ---------------------------------------------------------------------------
// Alpha-grid suitability maps
// ---------------------------------------------------------------------------

/// Regular lattice over `[-max_norm, max_norm]^k`, filtered to the ball.
#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub per_axis: usize,
    pub max_norm: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            per_axis: 41,
            max_norm: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaMapCell {
    pub alpha: Vec<f64>,
    pub margin_radial: Option<f64>,
    pub margin_vertical: Option<f64>,
    pub suitable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaMap {
    pub germ: String,
    pub kind: String,
    pub point: Vec<f64>,
    pub grid: GridSpec,
    pub cells: Vec<AlphaMapCell>,
    pub version: String,
}

/// Evaluate suitability of every grid parameter at the fixed point `p`.
pub fn alpha_suitability_map(
    germ: &MapGerm,
    p: &DVector<f64>,
    grid: &GridSpec,
    tol: &ToleranceProfile,
) -> Result<AlphaMap, SamplingError> {
    if grid.per_axis < 2 || !(grid.max_norm > 0.0 && grid.max_norm < 1.0) {
        return Err(SamplingError::InvalidPlan(
            "grid needs per_axis >= 2 and max_norm in (0,1)".into(),
        ));
    }
    let k = germ.k();
    let mut cells = Vec::new();
    let mut index = vec![0usize; k];
    let coord = |i: usize| -> f64 {
        -grid.max_norm + 2.0 * grid.max_norm * i as f64 / (grid.per_axis - 1) as f64
    };
    loop {
        let alpha = DVector::from_iterator(k, index.iter().map(|&i| coord(i)));
        if alpha.norm() <= grid.max_norm {
            let cell = match suitability_at(germ, &alpha, p, tol) {
                Ok(v) => AlphaMapCell {
                    alpha: alpha.iter().copied().collect(),
                    margin_radial: Some(v.margin_radial),
                    margin_vertical: Some(v.margin_vertical),
                    suitable: Some(v.suitable),
                    error: None,
                },
                Err(e) => AlphaMapCell {
                    alpha: alpha.iter().copied().collect(),
                    margin_radial: None,
                    margin_vertical: None,
                    suitable: None,
                    error: Some(e.to_string()),
                },
            };
            cells.push(cell);
        }
        // odometer over the k-dimensional lattice
        let mut carry = true;
        for d in (0..k).rev() {
            if !carry {
                break;
            }
            index[d] += 1;
            if index[d] == grid.per_axis {
                index[d] = 0;
            } else {
                carry = false;
            }
        }
        if carry {
            break;
        }
    }
    Ok(AlphaMap {
        germ: germ.name.clone(),
        kind: "alpha-map".to_string(),
        point: p.iter().copied().collect(),
        grid: grid.clone(),
        cells,
        version: crate::report::SCHEMA_VERSION.to_string(),
    })
}
