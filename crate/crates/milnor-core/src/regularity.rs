//! Canonical liftings through a germ's differential, the pointwise
//! suitability predicate, and the sampled regularity checkers, together with
//! an independent finite-difference submersion oracle they are validated
//! against.
//!
//! The pointwise predicate asks whether some lifting `u' = u + w` (with `w`
//! tangent to the fiber) of the conic field at `f(p)` has a nonzero radial
//! component at `p`. Every vertical `w` contributes at most
//! `<w, p> <= ||w|| * ||proj_ker p||`, with equality attained along the
//! kernel projection of `p`, so the existential reduces exactly to two
//! margins: the radial component of the canonical lift and the size of the
//! kernel projection of `p`. Those two numbers are what every checker here
//! reports.

use crate::conic::{ConicError, ConicFlow};
use crate::germ::{GermError, MapGerm};
use crate::linalg::{factorize, min_norm_solve, NumError};
use crate::sampling::{sample_sphere_with, RegionMode, SamplingError, SamplingPlan};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

pub const RNG_DESCRIPTION: &str = "ChaCha8 (rand_chacha 0.9, per-stratum streams)";

#[derive(Debug, Clone, thiserror::Error)]
pub enum RegularityError {
    #[error("critical point: Df has numeric rank {rank} < {needed}")]
    CriticalPoint { rank: usize, needed: usize },
    #[error("value too close to zero: ||f(p)|| = {norm:.3e}")]
    ZeroValue { norm: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Germ(#[from] GermError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

/// Declared numeric thresholds for every regularity predicate.
#[derive(Debug, Clone, Serialize)]
pub struct ToleranceProfile {
    /// Relative cutoff for numeric rank decisions.
    pub rank_tol: f64,
    /// Radial margin threshold.
    pub tau_radial: f64,
    /// Vertical margin threshold.
    pub tau_vertical: f64,
    /// Relative finite-difference step for the submersion oracle.
    pub fd_step: f64,
    /// Floor for the normalized-field denominator.
    pub denom_floor: f64,
    /// Values with norm at or below this count as "on the zero fiber".
    pub value_floor: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile {
            rank_tol: 1e-10,
            tau_radial: 1e-8,
            tau_vertical: 1e-8,
            fd_step: 1e-6,
            denom_floor: 1e-12,
            value_floor: 1e-12,
        }
    }
}

/// Everything computed while lifting a target vector through `Df_p`.
#[derive(Debug, Clone)]
pub struct LiftResult {
    pub point: DVector<f64>,
    pub value: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// Orthonormal basis of ker Df_p = tangent space of the fiber through p.
    pub kernel: Vec<DVector<f64>>,
    /// Minimum-norm preimage of the target vector; orthogonal to the kernel.
    pub lift: DVector<f64>,
    /// Orthogonal projection of `p` onto the kernel.
    pub vertical_projection: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SuitabilityBranch {
    /// The canonical lift itself has a nonzero radial component.
    RadialLift,
    /// Only a vertical adjustment can produce one.
    VerticalAdjust,
    NotSuitable,
}

impl SuitabilityBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            SuitabilityBranch::RadialLift => "RadialLift",
            SuitabilityBranch::VerticalAdjust => "VerticalAdjust",
            SuitabilityBranch::NotSuitable => "NotSuitable",
        }
    }
}

/// Pointwise suitability classification.
///
/// `margin_radial` is the radial coefficient `<u, p> / ||p||^2` of the
/// canonical lift (0 when the lift vanishes); `margin_vertical` is
/// `||proj_ker p|| / ||p||`. The point is suitable iff either margin clears
/// its threshold.
#[derive(Debug, Clone, Serialize)]
pub struct SuitabilityVerdict {
    pub margin_radial: f64,
    pub margin_vertical: f64,
    pub suitable: bool,
    pub branch: SuitabilityBranch,
}

/// Lift `target` through `Df_p`; errors with `CriticalPoint` when the
/// differential is rank-deficient below the target dimension.
pub fn canonical_lift(
    germ: &MapGerm,
    p: &DVector<f64>,
    target: &DVector<f64>,
    tol: &ToleranceProfile,
) -> Result<LiftResult, RegularityError> {
    let (value, jacobian) = germ.evaluate_with_jacobian(p)?;
    let fact = factorize(&jacobian, tol.rank_tol)?;
    if fact.rank < germ.k() {
        return Err(RegularityError::CriticalPoint {
            rank: fact.rank,
            needed: germ.k(),
        });
    }
    let lift = min_norm_solve(&jacobian, target, tol.rank_tol, 1e-6)?;
    let vertical_projection = fact.project_onto_kernel(p);
    Ok(LiftResult {
        point: p.clone(),
        value,
        jacobian,
        kernel: fact.kernel,
        lift,
        vertical_projection,
    })
}

/// Classify whether `alpha` is a suitable parameter for `germ` at `p`.
pub fn suitability_at(
    germ: &MapGerm,
    alpha: &DVector<f64>,
    p: &DVector<f64>,
    tol: &ToleranceProfile,
) -> Result<SuitabilityVerdict, RegularityError> {
    if alpha.norm() >= 1.0 {
        return Err(RegularityError::Precondition(format!(
            "||alpha|| = {} must be < 1",
            alpha.norm()
        )));
    }
    if alpha.len() != germ.k() {
        return Err(RegularityError::Germ(GermError::DimensionMismatch {
            expected: germ.k(),
            got: alpha.len(),
        }));
    }
    let f_p = germ.evaluate(p)?;
    let nf = f_p.norm();
    if nf <= tol.value_floor {
        return Err(RegularityError::ZeroValue { norm: nf });
    }
    // target = v_alpha(f(p)) = f(p) + ||f(p)||^2 alpha
    let target = &f_p + alpha * (nf * nf);
    let lift = canonical_lift(germ, p, &target, tol)?;
    Ok(classify(&lift, p, tol))
}

fn classify(lift: &LiftResult, p: &DVector<f64>, tol: &ToleranceProfile) -> SuitabilityVerdict {
    let pn2 = p.norm_squared();
    let margin_radial = if lift.lift.norm() == 0.0 || pn2 == 0.0 {
        0.0
    } else {
        lift.lift.dot(p) / pn2
    };
    let margin_vertical = if pn2 == 0.0 {
        0.0
    } else {
        lift.vertical_projection.norm() / pn2.sqrt()
    };
    let branch = if margin_radial.abs() > tol.tau_radial {
        SuitabilityBranch::RadialLift
    } else if margin_vertical > tol.tau_vertical {
        SuitabilityBranch::VerticalAdjust
    } else {
        SuitabilityBranch::NotSuitable
    };
    SuitabilityVerdict {
        margin_radial,
        margin_vertical,
        suitable: branch != SuitabilityBranch::NotSuitable,
        branch,
    }
}

/// Does the fiber through `p` meet the sphere of radius `||p||` transversely?
/// True iff the kernel of `Df_p` sticks out of the tangent hyperplane of the
/// sphere, i.e. iff `||proj_ker p|| / ||p||` clears the vertical threshold.
pub fn fiber_sphere_transverse(
    germ: &MapGerm,
    p: &DVector<f64>,
    tol: &ToleranceProfile,
) -> Result<(bool, f64), RegularityError> {
    let jacobian = germ.jacobian(p)?;
    let fact = factorize(&jacobian, tol.rank_tol)?;
    if fact.rank < germ.k() {
        return Err(RegularityError::CriticalPoint {
            rank: fact.rank,
            needed: germ.k(),
        });
    }
    let margin = fact.project_onto_kernel(p).norm() / p.norm();
    Ok((margin > tol.tau_vertical, margin))
}

/// `phi(x)`: the normalized map on the sphere. With a flow it is the
/// normalized composition of the inverse homeomorphism with `f`; without one
/// it is `f / ||f||`.
pub fn normalized_map(
    germ: &MapGerm,
    flow: Option<&ConicFlow>,
    x: &DVector<f64>,
    tol: &ToleranceProfile,
) -> Result<DVector<f64>, RegularityError> {
    let f_x = germ.evaluate(x)?;
    let nf = f_x.norm();
    if nf <= tol.value_floor {
        return Err(RegularityError::ZeroValue { norm: nf });
    }
    match flow {
        None => Ok(f_x / nf),
        Some(fl) => {
            let y = fl.h_invert(&f_x)?;
            let ny = y.norm();
            if ny <= tol.value_floor {
                return Err(RegularityError::ZeroValue { norm: ny });
            }
            Ok(y / ny)
        }
    }
}

/// Smallest singular value of the differential of `phi` restricted to the
/// sphere through `x` (target restricted to the tangent space of the unit
/// sphere at `phi(x)`). Positive iff `phi` is a submersion there: this is the
/// independent oracle the suitability predicate is checked against.
pub fn sphere_submersion_test(
    germ: &MapGerm,
    flow: Option<&ConicFlow>,
    x: &DVector<f64>,
    tol: &ToleranceProfile,
) -> Result<f64, RegularityError> {
    let n = germ.n();
    let k = germ.k();
    if n < k {
        return Err(RegularityError::Precondition(format!(
            "submersion test needs n >= k, got n = {n}, k = {k}"
        )));
    }
    let r = x.norm();
    if r == 0.0 {
        return Err(RegularityError::ZeroValue { norm: 0.0 });
    }
    let phi0 = normalized_map(germ, flow, x, tol)?;

    // orthonormal bases of the two tangent spaces, as kernels of row vectors
    let x_hat = (x / r).transpose();
    let tangent_source = factorize(&DMatrix::from_rows(&[x_hat]), 1e-12)?.kernel;
    let phi_row = phi0.transpose();
    let tangent_target = factorize(&DMatrix::from_rows(&[phi_row]), 1e-12)?.kernel;

    let h = tol.fd_step * r;
    let mut m = DMatrix::zeros(k - 1, n - 1);
    for (j, u) in tangent_source.iter().enumerate() {
        // symmetric points renormalized back onto the sphere of radius r
        let plus = {
            let q = x + u * h;
            q.clone() * (r / q.norm())
        };
        let minus = {
            let q = x - u * h;
            q.clone() * (r / q.norm())
        };
        let fp = normalized_map(germ, flow, &plus, tol)?;
        let fm = normalized_map(germ, flow, &minus, tol)?;
        let col = (fp - fm) / (2.0 * h);
        for (l, b) in tangent_target.iter().enumerate() {
            m[(l, j)] = b.dot(&col);
        }
    }
    let fact = factorize(&m, 0.0)?;
    Ok(fact.singular_values.last().copied().unwrap_or(0.0))
}

/// Empirical radius of the suitable-parameter neighbourhood around `alpha`
/// at `p`: the largest tested `nu` such that sampled perturbations within
/// `nu` keep the same branch with a same-sign margin above half threshold.
pub fn openness_margin(
    germ: &MapGerm,
    alpha: &DVector<f64>,
    p: &DVector<f64>,
    tol: &ToleranceProfile,
    draws: usize,
    seed: u64,
) -> Result<f64, RegularityError> {
    let base = suitability_at(germ, alpha, p, tol)?;
    if !base.suitable {
        return Err(RegularityError::Precondition(
            "openness margin requires a suitable base parameter".into(),
        ));
    }
    let k = germ.k();
    let radial_sign = base.margin_radial.signum();
    let keeps = |a: &DVector<f64>| -> bool {
        match suitability_at(germ, a, p, tol) {
            Ok(v) => {
                v.suitable
                    && v.branch == base.branch
                    && match base.branch {
                        SuitabilityBranch::RadialLift => {
                            radial_sign * v.margin_radial > tol.tau_radial / 2.0
                        }
                        SuitabilityBranch::VerticalAdjust => {
                            v.margin_vertical > tol.tau_vertical / 2.0
                        }
                        SuitabilityBranch::NotSuitable => false,
                    }
            }
            Err(_) => false,
        }
    };
    let hi_cap = (0.98 * (1.0 - alpha.norm())).min(0.5);
    if hi_cap <= 0.0 {
        return Ok(0.0);
    }
    let test = |nu: f64, stream: u64| -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        for _ in 0..draws {
            let dir = gaussian_direction(&mut rng, k);
            let radius: f64 = rand::Rng::random::<f64>(&mut rng);
            let a = alpha + dir * (nu * radius.powf(1.0 / k as f64));
            if a.norm() >= 1.0 {
                continue;
            }
            if !keeps(&a) {
                return false;
            }
        }
        true
    };
    if test(hi_cap, 0) {
        return Ok(hi_cap);
    }
    let (mut lo, mut hi) = (0.0f64, hi_cap);
    for i in 1..=24 {
        let mid = 0.5 * (lo + hi);
        if test(mid, i) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn gaussian_direction(rng: &mut ChaCha8Rng, k: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(
            k,
            (0..k).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

// ---------------------------------------------------------------------------
// Sampled checks and their report
// ---------------------------------------------------------------------------

/// One sampled point and what the predicate said about it.
#[derive(Debug, Clone, Serialize)]
pub struct SampleVerdict {
    pub x: Vec<f64>,
    pub f_x: Vec<f64>,
    pub margin_radial: Option<f64>,
    pub margin_vertical: Option<f64>,
    pub branch: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub submersion_sv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Aggregated verdicts of one sampled regularity check.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub germ: String,
    pub kind: String,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub tolerance_profile: ToleranceProfile,
    pub samples: Vec<SampleVerdict>,
    pub pass: bool,
    /// Witness points of every NotSuitable verdict.
    pub failures: Vec<Vec<f64>>,
    pub worst_margin_radial: Option<f64>,
    pub worst_margin_vertical: Option<f64>,
    pub region_empty: bool,
    pub errors: usize,
    pub seed: u64,
    pub rng: String,
    pub version: String,
    pub notes: Vec<String>,
}

impl RegularityReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        germ: &MapGerm,
        kind: &str,
        epsilon: f64,
        delta: Option<f64>,
        alpha: Option<&DVector<f64>>,
        eta: Option<f64>,
        tol: &ToleranceProfile,
        samples: Vec<SampleVerdict>,
        region_empty: bool,
        seed: u64,
        notes: Vec<String>,
    ) -> Self {
        let failures: Vec<Vec<f64>> = samples
            .iter()
            .filter(|s| s.branch == "NotSuitable")
            .map(|s| s.x.clone())
            .collect();
        let errors = samples.iter().filter(|s| s.error.is_some()).count();
        let worst = |pick: fn(&SampleVerdict) -> Option<f64>| {
            samples
                .iter()
                .filter_map(pick)
                .fold(None, |acc: Option<f64>, v| {
                    Some(match acc {
                        None => v,
                        Some(a) => {
                            if v.abs() < a.abs() {
                                v
                            } else {
                                a
                            }
                        }
                    })
                })
        };
        RegularityReport {
            germ: germ.name.clone(),
            kind: kind.to_string(),
            epsilon,
            delta,
            alpha: alpha.map(|a| a.iter().copied().collect()),
            eta,
            tolerance_profile: tol.clone(),
            pass: failures.is_empty(),
            failures,
            worst_margin_radial: worst(|s| s.margin_radial),
            worst_margin_vertical: worst(|s| s.margin_vertical),
            region_empty,
            errors,
            samples,
            seed,
            rng: RNG_DESCRIPTION.to_string(),
            version: crate::report::SCHEMA_VERSION.to_string(),
            notes,
        }
    }

    pub fn push_note(&mut self, note: &str) {
        self.notes.push(note.to_string());
    }
}

fn verdict_sample(
    germ: &MapGerm,
    alpha: &DVector<f64>,
    x: &DVector<f64>,
    tol: &ToleranceProfile,
) -> SampleVerdict {
    let f_x = germ
        .evaluate(x)
        .map(|v| v.iter().copied().collect::<Vec<f64>>())
        .unwrap_or_default();
    match suitability_at(germ, alpha, x, tol) {
        Ok(v) => SampleVerdict {
            x: x.iter().copied().collect(),
            f_x,
            margin_radial: Some(v.margin_radial),
            margin_vertical: Some(v.margin_vertical),
            branch: v.branch.as_str().to_string(),
            submersion_sv: None,
            error: None,
        },
        Err(e) => SampleVerdict {
            x: x.iter().copied().collect(),
            f_x,
            margin_radial: None,
            margin_vertical: None,
            branch: "Error".to_string(),
            submersion_sv: None,
            error: Some(e.to_string()),
        },
    }
}

/// Sample the boundary-sphere part of the solid tube (`x` on the sphere of
/// radius `epsilon` with `||f(x)|| <= delta`) and test each fiber against the
/// sphere. An empty region is a vacuous pass and is flagged as such.
pub fn transversality_property_check(
    germ: &MapGerm,
    epsilon: f64,
    delta: f64,
    plan: &SamplingPlan,
    tol: &ToleranceProfile,
) -> Result<RegularityReport, RegularityError> {
    if !(epsilon > 0.0 && delta > 0.0) {
        return Err(RegularityError::Precondition(
            "epsilon and delta must be positive".into(),
        ));
    }
    let mut samples = Vec::new();
    let mut accepted = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(0);
    let mut attempts = 0usize;
    while accepted < plan.count_per_stratum && attempts < plan.rejection_budget {
        attempts += 1;
        let x = sample_sphere_with(&mut rng, germ.n(), epsilon);
        let f_x = germ.evaluate(&x)?;
        let nf = f_x.norm();
        if nf <= tol.value_floor || nf > delta {
            continue;
        }
        accepted += 1;
        let sample = match fiber_sphere_transverse(germ, &x, tol) {
            Ok((transverse, margin)) => SampleVerdict {
                x: x.iter().copied().collect(),
                f_x: f_x.iter().copied().collect(),
                margin_radial: None,
                margin_vertical: Some(margin),
                branch: if transverse {
                    "VerticalAdjust".to_string()
                } else {
                    "NotSuitable".to_string()
                },
                submersion_sv: None,
                error: None,
            },
            Err(e) => SampleVerdict {
                x: x.iter().copied().collect(),
                f_x: f_x.iter().copied().collect(),
                margin_radial: None,
                margin_vertical: None,
                branch: "Error".to_string(),
                submersion_sv: None,
                error: Some(e.to_string()),
            },
        };
        samples.push(sample);
    }
    let region_empty = accepted == 0;
    let mut notes = Vec::new();
    if region_empty {
        notes.push(format!(
            "no sphere point with ||f|| in (value_floor, {delta}] found in {attempts} draws; vacuous pass"
        ));
    }
    Ok(RegularityReport::assemble(
        germ,
        "transversality-property",
        epsilon,
        Some(delta),
        None,
        None,
        tol,
        samples,
        region_empty,
        plan.seed,
        notes,
    ))
}

/// Evaluate the suitability predicate over pre-drawn points; shared core of
/// the two regularity checks so that identical point sets give identical
/// verdicts by construction.
pub fn evaluate_suitability_samples(
    germ: &MapGerm,
    alpha: &DVector<f64>,
    points: &[DVector<f64>],
    tol: &ToleranceProfile,
) -> Vec<SampleVerdict> {
    points
        .iter()
        .map(|x| verdict_sample(germ, alpha, x, tol))
        .collect()
}

/// Classical radial-ray regularity: suitability with `alpha = 0`, sampled
/// over sphere strata of the punctured ball.
pub fn d_regularity_check(
    germ: &MapGerm,
    epsilon: f64,
    plan: &SamplingPlan,
    tol: &ToleranceProfile,
) -> Result<RegularityReport, RegularityError> {
    let alpha = DVector::zeros(germ.k());
    let drawn = crate::sampling::sample_region(
        germ,
        epsilon,
        0.0,
        RegionMode::PuncturedBall,
        plan,
        tol.value_floor,
    );
    let (points, region_empty, note) = unpack_region(drawn)?;
    let samples = evaluate_suitability_samples(germ, &alpha, &points, tol);
    let mut notes = Vec::new();
    if let Some(n) = note {
        notes.push(n);
    }
    Ok(RegularityReport::assemble(
        germ,
        "d-regular",
        epsilon,
        None,
        Some(&alpha),
        None,
        tol,
        samples,
        region_empty,
        plan.seed,
        notes,
    ))
}

/// Curved-ray regularity for the homeomorphism generated by `alpha`: the
/// suitability predicate sampled outside the open solid tube
/// (`||x|| <= epsilon`, `||f(x)|| >= delta`).
pub fn d_h_regularity_check(
    germ: &MapGerm,
    alpha: &DVector<f64>,
    eta: f64,
    epsilon: f64,
    delta: f64,
    plan: &SamplingPlan,
    tol: &ToleranceProfile,
) -> Result<RegularityReport, RegularityError> {
    if alpha.norm() >= 1.0 {
        return Err(RegularityError::Precondition(format!(
            "||alpha|| = {} must be < 1",
            alpha.norm()
        )));
    }
    let drawn = crate::sampling::sample_region(
        germ,
        epsilon,
        delta,
        RegionMode::OutsideTube,
        plan,
        tol.value_floor,
    );
    let (points, region_empty, note) = unpack_region(drawn)?;
    let mut notes = Vec::new();
    if let Some(n) = note {
        notes.push(n);
    }
    // sampled check of f(B_eps) inside the eta-ball
    let mut breaches = 0usize;
    for x in &points {
        if let Ok(v) = germ.evaluate(x) {
            if v.norm() > eta {
                breaches += 1;
            }
        }
    }
    if breaches > 0 {
        notes.push(format!(
            "{breaches} of {} sampled values exceed the cone radius eta = {eta}; shrink epsilon",
            points.len()
        ));
    }
    let samples = evaluate_suitability_samples(germ, alpha, &points, tol);
    Ok(RegularityReport::assemble(
        germ,
        "d_h-regular",
        epsilon,
        Some(delta),
        Some(alpha),
        Some(eta),
        tol,
        samples,
        region_empty,
        plan.seed,
        notes,
    ))
}

/// `alpha = 0` suitability sampled along the straight ray through
/// `direction`, at radii `(j/count) * epsilon`.
pub fn d_regularity_along_ray(
    germ: &MapGerm,
    direction: &DVector<f64>,
    epsilon: f64,
    count: usize,
    tol: &ToleranceProfile,
) -> Result<RegularityReport, RegularityError> {
    let norm = direction.norm();
    if norm == 0.0 {
        return Err(RegularityError::Precondition("ray direction must be nonzero".into()));
    }
    let dir = direction / norm;
    let alpha = DVector::zeros(germ.k());
    let mut points = Vec::with_capacity(count);
    for j in 1..=count {
        points.push(&dir * (epsilon * j as f64 / count as f64));
    }
    let samples = evaluate_suitability_samples(germ, &alpha, &points, tol);
    let mut report = RegularityReport::assemble(
        germ,
        "d-regular",
        epsilon,
        None,
        Some(&alpha),
        None,
        tol,
        samples,
        false,
        0,
        Vec::new(),
    );
    report.push_note(&format!(
        "sampled along the fixed ray through {:?} instead of random strata",
        dir.iter().copied().collect::<Vec<f64>>()
    ));
    Ok(report)
}

type RegionPoints = (Vec<DVector<f64>>, bool, Option<String>);

fn unpack_region(
    drawn: Result<crate::sampling::RegionSamples, SamplingError>,
) -> Result<RegionPoints, RegularityError> {
    match drawn {
        Ok(r) => {
            let note = if r.accepted < r.requested {
                Some(format!(
                    "sampling accepted {} of {} requested points (acceptance rate {:.3})",
                    r.accepted,
                    r.requested,
                    r.acceptance_rate()
                ))
            } else {
                None
            };
            Ok((r.points, false, note))
        }
        Err(SamplingError::RejectionBudgetExhausted { attempts, .. }) => Ok((
            Vec::new(),
            true,
            Some(format!(
                "region empty after {attempts} rejection draws; vacuous pass"
            )),
        )),
        Err(e) => Err(RegularityError::Precondition(e.to_string())),
    }
}

/// Attach submersion margins from [`sphere_submersion_test`] to an existing
/// report's samples (the oracle is finite-difference and flow-based, so it is
/// run on demand rather than inside the cheap predicate).
pub fn attach_submersion_oracle(
    report: &mut RegularityReport,
    germ: &MapGerm,
    flow: Option<&ConicFlow>,
    tol: &ToleranceProfile,
) {
    for s in &mut report.samples {
        let x = DVector::from_vec(s.x.clone());
        match sphere_submersion_test(germ, flow, &x, tol) {
            Ok(sv) => s.submersion_sv = Some(sv),
            Err(e) => {
                if s.error.is_none() {
                    s.error = Some(format!("submersion oracle: {e}"));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use nalgebra::dvector;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    #[test]
    fn identity_lift_returns_the_target() {
        let g = corpus::identity();
        let p = dvector![0.4, -0.3];
        let v = dvector![0.7, 0.2];
        let lift = canonical_lift(&g, &p, &v, &tol()).unwrap();
        assert!((&lift.lift - &v).norm() < 1e-12);
        assert!(lift.kernel.is_empty());
    }

    #[test]
    fn squaring_lift_at_unit_point() {
        // Df = 2 Id at (1,0): lift of (0,1) is (0, 0.5)
        let g = corpus::square();
        let lift = canonical_lift(&g, &dvector![1.0, 0.0], &dvector![0.0, 1.0], &tol()).unwrap();
        assert!((&lift.lift - dvector![0.0, 0.5]).norm() < 1e-12);
    }

    #[test]
    fn cubic_surface_lift_at_origin() {
        // Df(0) = [[0,0,-1],[1,0,0]]: min-norm lift of (0,1) is (1,0,0)
        let g = corpus::example1();
        let lift = canonical_lift(
            &g,
            &dvector![0.0, 0.0, 0.0],
            &dvector![0.0, 1.0],
            &tol(),
        )
        .unwrap();
        assert!((&lift.lift - dvector![1.0, 0.0, 0.0]).norm() < 1e-12);
    }

    #[test]
    fn critical_point_is_reported() {
        // squaring germ has rank 0 differential at the origin
        let g = corpus::square();
        let r = canonical_lift(&g, &dvector![0.0, 0.0], &dvector![1.0, 0.0], &tol());
        assert!(matches!(r, Err(RegularityError::CriticalPoint { .. })));
    }

    #[test]
    fn squaring_radial_margin_is_one_half_everywhere() {
        let g = corpus::square();
        let alpha = dvector![0.0, 0.0];
        for p in [dvector![0.3, 0.1], dvector![-0.2, 0.4], dvector![0.05, -0.37]] {
            let v = suitability_at(&g, &alpha, &p, &tol()).unwrap();
            assert!(
                (v.margin_radial - 0.5).abs() < 1e-12,
                "margin {} at {p:?}",
                v.margin_radial
            );
            assert_eq!(v.branch, SuitabilityBranch::RadialLift);
        }
    }

    #[test]
    fn gstar_hand_verdicts() {
        let g = corpus::gstar();
        let p = dvector![1.0, 0.0];
        // alpha = 0: u0 = (0,1) orthogonal to p, trivial kernel -> NotSuitable
        let v0 = suitability_at(&g, &dvector![0.0, 0.0], &p, &tol()).unwrap();
        assert!(!v0.suitable);
        assert_eq!(v0.branch, SuitabilityBranch::NotSuitable);
        assert!(v0.margin_radial.abs() < 1e-12);
        assert_eq!(v0.margin_vertical, 0.0);
        // alpha = (0, a): u = (a, 1), margin = a exactly
        for a in [0.3, -0.2, 0.05] {
            let v = suitability_at(&g, &dvector![0.0, a], &p, &tol()).unwrap();
            assert!(v.suitable);
            assert_eq!(v.branch, SuitabilityBranch::RadialLift);
            assert!((v.margin_radial - a).abs() < 1e-9, "a = {a}: {}", v.margin_radial);
        }
    }

    #[test]
    fn zero_value_is_rejected() {
        let g = corpus::square();
        let r = suitability_at(&g, &dvector![0.0, 0.0], &dvector![0.0, 0.0], &tol());
        assert!(matches!(r, Err(RegularityError::ZeroValue { .. })));
    }

    #[test]
    fn projection_fiber_transversality_hand_cases() {
        let g = corpus::projection();
        // fiber through (0,0,c) is vertical: transverse with margin 1
        let (t, m) = fiber_sphere_transverse(&g, &dvector![0.0, 0.0, 0.7], &tol()).unwrap();
        assert!(t);
        assert!((m - 1.0).abs() < 1e-12);
        // fiber through (a,b,0) is tangent: kernel e3 orthogonal to p
        let (t, m) = fiber_sphere_transverse(&g, &dvector![0.3, 0.4, 0.0], &tol()).unwrap();
        assert!(!t);
        assert!(m < 1e-12);
    }

    #[test]
    fn equal_dimension_fiber_is_never_transverse() {
        let g = corpus::identity();
        let (t, m) = fiber_sphere_transverse(&g, &dvector![0.3, 0.4], &tol()).unwrap();
        assert!(!t);
        assert_eq!(m, 0.0);
    }

    #[test]
    fn normalized_map_doubles_the_angle_for_squaring() {
        let g = corpus::square();
        for u in [0.3f64, 1.1, 2.8] {
            let r = 0.4;
            let x = dvector![r * u.cos(), r * u.sin()];
            let phi = normalized_map(&g, None, &x, &tol()).unwrap();
            let expected = dvector![(2.0 * u).cos(), (2.0 * u).sin()];
            assert!((phi - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn normalized_map_with_radial_flow_matches_plain_normalization() {
        use crate::conic::{ConicFlow, ConicParameter};
        let g = corpus::square();
        let flow = ConicFlow::new(ConicParameter::new(dvector![0.0, 0.0], 0.9).unwrap());
        for x in [dvector![0.3, 0.2], dvector![-0.25, 0.33]] {
            let with_flow = normalized_map(&g, Some(&flow), &x, &tol()).unwrap();
            let plain = normalized_map(&g, None, &x, &tol()).unwrap();
            assert!((with_flow - plain).norm() < 1e-9);
        }
    }

    #[test]
    fn submersion_oracle_on_squaring_scales_like_two_over_radius() {
        let g = corpus::square();
        for r in [0.2, 0.5] {
            let x = dvector![r, 0.0];
            let sv = sphere_submersion_test(&g, None, &x, &tol()).unwrap();
            assert!(
                (sv - 2.0 / r).abs() < 1e-3 * (2.0 / r),
                "r = {r}: sv = {sv}"
            );
        }
    }

    #[test]
    fn submersion_oracle_vanishes_at_gstar_bad_point() {
        let g = corpus::gstar();
        let sv = sphere_submersion_test(&g, None, &dvector![1.0, 0.0], &tol()).unwrap();
        assert!(sv < 1e-6, "sv = {sv}");
    }

    #[test]
    fn submersion_verdict_is_radius_invariant_for_squaring() {
        let g = corpus::square();
        let dir = dvector![0.6, 0.8];
        let tolp = tol();
        let verdicts: Vec<bool> = [0.1, 0.3, 0.7]
            .iter()
            .map(|r| sphere_submersion_test(&g, None, &(&dir * *r), &tolp).unwrap() > 1e-6)
            .collect();
        assert!(verdicts.iter().all(|v| *v));
    }

    #[test]
    fn openness_margin_generous_for_squaring() {
        let g = corpus::square();
        let nu = openness_margin(&g, &dvector![0.0, 0.0], &dvector![0.4, 0.1], &tol(), 20, 7)
            .unwrap();
        assert!(nu >= 0.4, "nu = {nu}");
    }

    #[test]
    fn openness_margin_detects_gstar_failure_hyperplane() {
        let g = corpus::gstar();
        let nu = openness_margin(&g, &dvector![0.0, 0.1], &dvector![1.0, 0.0], &tol(), 40, 7)
            .unwrap();
        assert!(nu > 0.05 && nu < 0.2, "nu = {nu}");
    }

    #[test]
    fn dreg_check_passes_for_squaring() {
        let g = corpus::square();
        let plan = SamplingPlan::strata(0.5, 3, 40, 11);
        let report = d_regularity_check(&g, 0.5, &plan, &tol()).unwrap();
        assert!(report.pass);
        assert!(report.worst_margin_radial.unwrap() > 0.4);
        assert_eq!(report.kind, "d-regular");
    }

    #[test]
    fn dreg_check_passes_for_projection() {
        let g = corpus::projection();
        let plan = SamplingPlan::strata(0.5, 3, 40, 11);
        let report = d_regularity_check(&g, 0.5, &plan, &tol()).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn transversality_check_is_vacuous_for_squaring_with_small_delta() {
        // on the eps-sphere ||f|| = eps^2 exactly; delta below that empties the region
        let g = corpus::square();
        let eps = 0.5;
        let plan = SamplingPlan::single(eps, 50, 3);
        let report =
            transversality_property_check(&g, eps, eps * eps / 2.0, &plan, &tol()).unwrap();
        assert!(report.region_empty);
        assert!(report.pass);
    }

    #[test]
    fn transversality_check_passes_for_projection() {
        let g = corpus::projection();
        let plan = SamplingPlan::single(0.5, 60, 3);
        let report = transversality_property_check(&g, 0.5, 0.2, &plan, &tol()).unwrap();
        assert!(!report.region_empty);
        assert!(report.pass);
        // accepted points satisfy ||proj_ker x||^2 = eps^2 - ||f||^2 > 0
        for s in &report.samples {
            assert!(s.margin_vertical.unwrap() > 0.5);
        }
    }

    #[test]
    fn dh_check_with_zero_alpha_matches_dreg_on_shared_points() {
        // every point the d_h check (alpha = 0) reported must reproduce its
        // verdict through the radial predicate the d-regularity check uses
        let g = corpus::square();
        let tolp = tol();
        let plan = SamplingPlan::strata(0.5, 3, 30, 17);
        let alpha = dvector![0.0, 0.0];
        let dh = d_h_regularity_check(&g, &alpha, 0.9, 0.5, 0.01, &plan, &tolp).unwrap();
        assert!(!dh.samples.is_empty());
        for s in &dh.samples {
            let x = DVector::from_vec(s.x.clone());
            let direct = suitability_at(&g, &alpha, &x, &tolp).unwrap();
            assert_eq!(s.branch, direct.branch.as_str());
            assert_eq!(s.margin_radial.unwrap(), direct.margin_radial);
            assert_eq!(s.margin_vertical.unwrap(), direct.margin_vertical);
        }
        // and the restricted region is a subset of the d-reg region, so a
        // passing d-reg implies the same verdicts here
        let dreg = d_regularity_check(&g, 0.5, &plan, &tolp).unwrap();
        assert_eq!(dh.pass, dreg.pass);
    }

    #[test]
    fn suitability_margin_is_lipschitz_in_alpha() {
        // finite-difference slope estimate at small scale bounds the margin
        // change at a larger scale
        let g = corpus::square();
        let tolp = tol();
        let p = dvector![0.35, -0.2];
        let alpha = dvector![0.1, 0.2];
        let base = suitability_at(&g, &alpha, &p, &tolp).unwrap().margin_radial;
        let h = 1e-5;
        let mut slope: f64 = 0.0;
        for i in 0..2 {
            let mut a = alpha.clone();
            a[i] += h;
            let m = suitability_at(&g, &a, &p, &tolp).unwrap().margin_radial;
            slope = slope.max(((m - base) / h).abs());
        }
        let c = 2.0 * (slope * 2.0 + 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let mut delta = DVector::zeros(2);
            for i in 0..2 {
                delta[i] =
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
            delta *= 1e-3 / delta.norm();
            let m = suitability_at(&g, &(&alpha + &delta), &p, &tolp)
                .unwrap()
                .margin_radial;
            assert!(
                (m - base).abs() <= c * 1e-3,
                "margin moved {} but C estimate allows {}",
                (m - base).abs(),
                c * 1e-3
            );
        }
    }

    #[test]
    fn dh_check_passes_for_squaring_with_moderate_alpha() {
        let g = corpus::square();
        let plan = SamplingPlan::strata(0.5, 3, 30, 5);
        let report = d_h_regularity_check(
            &g,
            &dvector![0.3, -0.2],
            0.9,
            0.5,
            0.01,
            &plan,
            &tol(),
        )
        .unwrap();
        assert!(report.pass, "failures: {:?}", report.failures);
        assert_eq!(report.kind, "d_h-regular");
    }

    #[test]
    fn cubic_surface_ray_report_has_positive_radial_margins() {
        // along (x,0,0): u0 = (x,0,0), <u0,p> = x^2 > 0
        let g = corpus::example1();
        let report =
            d_regularity_along_ray(&g, &dvector![1.0, 0.0, 0.0], 0.5, 12, &tol()).unwrap();
        assert!(report.pass);
        for s in &report.samples {
            let expected = 1.0; // <u0,p>/||p||^2 = x^2/x^2
            assert!((s.margin_radial.unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn vertical_exhaustion_identity_holds() {
        // max over unit vertical w of <w,p> equals ||proj_ker p||
        let g = corpus::projection();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = DVector::from_iterator(
                3,
                (0..3).map(|_| {
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                }),
            );
            if p.norm() < 1e-6 {
                continue;
            }
            let jac = g.jacobian(&p).unwrap();
            let fact = factorize(&jac, 1e-10).unwrap();
            let proj = fact.project_onto_kernel(&p);
            let pn = proj.norm();
            if pn < 1e-12 {
                continue;
            }
            let w_star = &proj / pn;
            assert!((w_star.dot(&p) - pn).abs() < 1e-10);
            // random vertical unit vectors never beat the projection direction
            for _ in 0..5 {
                let mut w = DVector::zeros(3);
                for b in &fact.kernel {
                    let c: f64 =
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                    w += b * c;
                }
                let n = w.norm();
                if n < 1e-12 {
                    continue;
                }
                w /= n;
                assert!(w.dot(&p) <= pn + 1e-10);
            }
        }
    }
}
