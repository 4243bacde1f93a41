//! Conic vector fields `v_a(y) = y + ||y||^2 a`, their normalized flows, and
//! the conic homeomorphisms of the target ball they generate.
//!
//! The normalization `v_hat = v / <2y, v>` makes the squared norm grow at
//! unit rate along integral curves, so the curve through `theta in S_eta` at
//! parameter `t` satisfies `||p(t)||^2 = t` exactly. That identity is both
//! the reparametrization the homeomorphism is built on and the external
//! oracle every flow here is checked against: after each accepted step the
//! state is rescaled back onto `||p||^2 = t` and the pre-projection defect is
//! recorded as a quality metric.

use crate::linalg::NumError;
use crate::ode::{integrate_with_hook, OdeControl, StepDecision};
use nalgebra::DVector;
use std::collections::HashMap;
use std::sync::RwLock;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConicError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid conic parameter: {0}")]
    InvalidParameter(String),
    #[error("alpha = 0: the radial field has a single zero")]
    AlphaZero,
    #[error("degenerate denominator <2y, v_a(y)> = {denom:.3e}")]
    DegenerateDenominator { denom: f64 },
    #[error("point with norm {norm:.6} outside the ball of radius {radius:.6}")]
    OutsideDomain { norm: f64, radius: f64 },
    #[error("flow invariant drift {defect:.3e} not recoverable by step refinement")]
    InvariantDrift { defect: f64 },
    #[error(transparent)]
    Flow(#[from] NumError),
}

/// The pair (alpha, eta): a field parameter in the open unit ball and a cone
/// radius in (0, 1).
#[derive(Debug, Clone)]
pub struct ConicParameter {
    alpha: DVector<f64>,
    eta: f64,
}

impl ConicParameter {
    pub fn new(alpha: DVector<f64>, eta: f64) -> Result<Self, ConicError> {
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(ConicError::InvalidParameter("alpha has non-finite entries".into()));
        }
        let norm = alpha.norm();
        if norm >= 1.0 {
            return Err(ConicError::InvalidParameter(format!(
                "||alpha|| = {norm:.6} must be < 1 (origin must be the only zero in the unit ball)"
            )));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(ConicError::InvalidParameter(format!(
                "eta = {eta:.6} must lie in (0, 1)"
            )));
        }
        Ok(ConicParameter { alpha, eta })
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }
}

/// `v_a(y) = y + ||y||^2 a`, defined on all of R^k.
pub fn conic_field(cp: &ConicParameter, y: &DVector<f64>) -> Result<DVector<f64>, ConicError> {
    if y.len() != cp.k() {
        return Err(ConicError::DimensionMismatch {
            expected: cp.k(),
            got: y.len(),
        });
    }
    Ok(y + &cp.alpha * y.norm_squared())
}

/// The zero of `v_a` away from the origin: `y_a = -a / ||a||^2`, of norm
/// `1 / ||a||`.
pub fn nontrivial_zero(cp: &ConicParameter) -> Result<DVector<f64>, ConicError> {
    let n2 = cp.alpha.norm_squared();
    if n2 == 0.0 {
        return Err(ConicError::AlphaZero);
    }
    Ok(-&cp.alpha / n2)
}

/// `v_hat_a(y) = v_a(y) / <2y, v_a(y)>`; the derivative of `||.||^2` along
/// the result is exactly 1.
pub fn normalized_field(
    cp: &ConicParameter,
    y: &DVector<f64>,
    denom_floor: f64,
) -> Result<DVector<f64>, ConicError> {
    let v = conic_field(cp, y)?;
    let denom = 2.0 * y.dot(&v);
    if denom <= denom_floor {
        return Err(ConicError::DegenerateDenominator { denom });
    }
    Ok(v / denom)
}

/// A ray decomposition `x = t * theta` with `theta in S_eta` and `t in (0, 1]`.
#[derive(Debug, Clone)]
pub struct RayCoordinate {
    pub theta: DVector<f64>,
    pub t: f64,
}

impl RayCoordinate {
    pub fn new(theta: DVector<f64>, eta: f64, t: f64) -> Result<Self, ConicError> {
        let norm = theta.norm();
        if (norm - eta).abs() > 1e-12 * eta.max(1.0) {
            return Err(ConicError::InvalidParameter(format!(
                "||theta|| = {norm} is not on the sphere of radius {eta}"
            )));
        }
        if !(t > 0.0 && t <= 1.0) {
            return Err(ConicError::InvalidParameter(format!("t = {t} outside (0, 1]")));
        }
        Ok(RayCoordinate { theta, t })
    }

    /// Decompose a nonzero point of the closed eta-ball.
    pub fn from_point(x: &DVector<f64>, eta: f64) -> Result<Self, ConicError> {
        let norm = x.norm();
        if norm == 0.0 {
            return Err(ConicError::InvalidParameter("origin has no ray coordinate".into()));
        }
        if norm > eta * (1.0 + 1e-12) {
            return Err(ConicError::OutsideDomain { norm, radius: eta });
        }
        Ok(RayCoordinate {
            theta: x * (eta / norm),
            t: (norm / eta).min(1.0),
        })
    }

    pub fn point(&self) -> DVector<f64> {
        &self.theta * self.t
    }
}

/// A sampled integral curve of the normalized conic field; the curve
/// parameter is exactly the squared norm of the moving point.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    /// `(t, p)` samples with `||p||^2 = t` (post-projection), `t` strictly
    /// monotone along the sequence.
    pub samples: Vec<(f64, DVector<f64>)>,
    /// Largest `| ||p||^2 - t |` observed before projection.
    pub max_defect: f64,
}

impl FlowTrajectory {
    pub fn endpoint(&self) -> &DVector<f64> {
        &self.samples.last().expect("trajectory has samples").1
    }
}

type PointKey = Vec<u64>;

fn point_key(v: &DVector<f64>) -> PointKey {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Flow engine for one conic parameter: integrates the normalized field,
/// applies/inverts the induced homeomorphism `h_a` of the eta-ball, and
/// memoizes endpoint queries.
///
/// Cached values are keyed by the exact bit pattern of the query, so a cache
/// hit returns the very floats a fresh computation would have produced:
/// caching can change speed, never results.
pub struct ConicFlow {
    cp: ConicParameter,
    ctrl: OdeControl,
    pub denom_floor: f64,
    /// Flow-invariant tolerance; pre-projection defects beyond 10x force a
    /// step retry.
    pub flow_tol: f64,
    /// Rescale each accepted state back onto `||p||^2 = t`. Disabling turns
    /// the recorded defect into the raw accumulated drift.
    pub projection_enabled: bool,
    apply_cache: RwLock<HashMap<(PointKey, u64), DVector<f64>>>,
    invert_cache: RwLock<HashMap<PointKey, DVector<f64>>>,
}

impl ConicFlow {
    pub fn new(cp: ConicParameter) -> Self {
        ConicFlow {
            cp,
            ctrl: OdeControl::default(),
            denom_floor: 1e-12,
            flow_tol: 1e-9,
            projection_enabled: true,
            apply_cache: RwLock::new(HashMap::new()),
            invert_cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_control(mut self, ctrl: OdeControl) -> Self {
        self.ctrl = ctrl;
        self
    }

    pub fn with_projection(mut self, enabled: bool) -> Self {
        self.projection_enabled = enabled;
        self
    }

    pub fn parameter(&self) -> &ConicParameter {
        &self.cp
    }

    pub fn eta(&self) -> f64 {
        self.cp.eta()
    }

    fn integrate_invariant(
        &self,
        start: &DVector<f64>,
        s0: f64,
        s1: f64,
    ) -> Result<FlowTrajectory, ConicError> {
        let mut max_defect: f64 = 0.0;
        let mut drift_rejected = false;
        let flow_tol = self.flow_tol;
        let project = self.projection_enabled;
        let result = integrate_with_hook(
            |_s, y| {
                normalized_field(&self.cp, y, self.denom_floor).map_err(|e| e.to_string())
            },
            start,
            s0,
            s1,
            &self.ctrl,
            |s, p| {
                let defect = (p.norm_squared() - s).abs();
                // refining the step can only cure a local defect, so the
                // retry path is tied to projection being on
                if project && defect > 10.0 * flow_tol {
                    drift_rejected = true;
                    return StepDecision::Retry;
                }
                max_defect = max_defect.max(defect);
                if project {
                    let norm = p.norm();
                    if norm > 0.0 {
                        *p *= s.sqrt() / norm;
                    }
                }
                StepDecision::Accept
            },
        );
        match result {
            Ok(samples) => Ok(FlowTrajectory { samples, max_defect }),
            Err(NumError::StepUnderflow { .. }) if drift_rejected => {
                Err(ConicError::InvariantDrift { defect: max_defect })
            }
            Err(e) => Err(ConicError::Flow(e)),
        }
    }

    /// Integral curve `P(theta, .)` from the initial condition
    /// `P(theta, eta^2) = theta` down (or up) to `t_target in (0, eta^2]`.
    pub fn flow_to(&self, theta: &DVector<f64>, t_target: f64) -> Result<FlowTrajectory, ConicError> {
        let eta = self.cp.eta();
        let eta2 = eta * eta;
        if theta.len() != self.cp.k() {
            return Err(ConicError::DimensionMismatch {
                expected: self.cp.k(),
                got: theta.len(),
            });
        }
        let norm = theta.norm();
        if (norm - eta).abs() > 1e-9 * eta {
            return Err(ConicError::InvalidParameter(format!(
                "||theta|| = {norm} is not on the sphere of radius {eta}"
            )));
        }
        if !(t_target > 0.0 && t_target <= eta2 * (1.0 + 1e-12)) {
            return Err(ConicError::InvalidParameter(format!(
                "t_target = {t_target} outside (0, eta^2]"
            )));
        }
        if t_target >= eta2 {
            return Ok(FlowTrajectory {
                samples: vec![(eta2, theta.clone())],
                max_defect: 0.0,
            });
        }
        self.integrate_invariant(theta, eta2, t_target)
    }

    /// Endpoint `P(theta, t)`, memoized on the exact (theta, t) bits.
    pub fn point_at(&self, theta: &DVector<f64>, t: f64) -> Result<DVector<f64>, ConicError> {
        let key = (point_key(theta), t.to_bits());
        if let Some(hit) = self.apply_cache.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let traj = self.flow_to(theta, t)?;
        let end = traj.endpoint().clone();
        self.apply_cache.write().unwrap().insert(key, end.clone());
        Ok(end)
    }

    /// The conic homeomorphism: `0 -> 0`, boundary fixed pointwise, and
    /// `t theta -> P(theta, t eta^2)` in between, so `||h(x)|| = sqrt(eta ||x||)`.
    pub fn h_apply(&self, x: &DVector<f64>) -> Result<DVector<f64>, ConicError> {
        if x.len() != self.cp.k() {
            return Err(ConicError::DimensionMismatch {
                expected: self.cp.k(),
                got: x.len(),
            });
        }
        if x.norm() == 0.0 {
            return Ok(DVector::zeros(self.cp.k()));
        }
        let ray = RayCoordinate::from_point(x, self.cp.eta())?;
        let t_flow = ray.t * self.cp.eta() * self.cp.eta();
        self.point_at(&ray.theta, t_flow)
    }

    /// Inverse of [`Self::h_apply`]: flow forward to the boundary sphere and
    /// contract the ray by `||y||^2 / eta^2`.
    pub fn h_invert(&self, y: &DVector<f64>) -> Result<DVector<f64>, ConicError> {
        if y.len() != self.cp.k() {
            return Err(ConicError::DimensionMismatch {
                expected: self.cp.k(),
                got: y.len(),
            });
        }
        let eta = self.cp.eta();
        let eta2 = eta * eta;
        let norm = y.norm();
        if norm == 0.0 {
            return Err(ConicError::InvalidParameter(
                "h_invert is defined on the punctured ball".into(),
            ));
        }
        if norm > eta * (1.0 + 1e-12) {
            return Err(ConicError::OutsideDomain { norm, radius: eta });
        }
        let s0 = norm * norm;
        let ratio = s0 / eta2;
        if s0 >= eta2 {
            return Ok(y.clone());
        }
        let key = point_key(y);
        if let Some(theta) = self.invert_cache.read().unwrap().get(&key) {
            return Ok(theta * ratio);
        }
        let traj = self.integrate_invariant(y, s0, eta2)?;
        let theta = traj.endpoint().clone();
        self.invert_cache.write().unwrap().insert(key, theta.clone());
        Ok(theta * ratio)
    }

    /// The curve `C_theta`: `P(theta, .)` sampled at geometrically spaced
    /// parameters in `(t_min, eta^2]`, ascending. `t_min` defaults to
    /// `1e-4 * eta^2` when not given.
    pub fn curve(
        &self,
        theta: &DVector<f64>,
        samples: usize,
        t_min: Option<f64>,
    ) -> Result<FlowTrajectory, ConicError> {
        if samples < 2 {
            return Err(ConicError::InvalidParameter("need at least 2 curve samples".into()));
        }
        let eta2 = self.cp.eta() * self.cp.eta();
        let t_min = t_min.unwrap_or(1e-4 * eta2);
        if !(t_min > 0.0 && t_min < eta2) {
            return Err(ConicError::InvalidParameter(format!(
                "t_min = {t_min} outside (0, eta^2)"
            )));
        }
        let ratio = (t_min / eta2).powf(1.0 / (samples as f64 - 1.0));
        let mut targets = Vec::with_capacity(samples);
        for j in 0..samples {
            targets.push(eta2 * ratio.powi(j as i32));
        }
        // integrate downward through the targets, reusing the running state
        let mut out = vec![(eta2, theta.clone())];
        let mut max_defect: f64 = 0.0;
        let mut state = theta.clone();
        let mut s = eta2;
        for &t in targets.iter().skip(1) {
            let traj = self.integrate_invariant(&state, s, t)?;
            max_defect = max_defect.max(traj.max_defect);
            state = traj.endpoint().clone();
            s = t;
            out.push((t, state.clone()));
        }
        out.reverse();
        Ok(FlowTrajectory {
            samples: out,
            max_defect,
        })
    }
}

/// Samples of the conic field on a square grid, for plotting.
/// Rows are `(y1, y2, v1, v2)`; requires `k = 2`.
pub fn field_grid(
    cp: &ConicParameter,
    half_width: f64,
    per_axis: usize,
    max_norm: Option<f64>,
) -> Result<Vec<[f64; 4]>, ConicError> {
    if cp.k() != 2 {
        return Err(ConicError::DimensionMismatch {
            expected: 2,
            got: cp.k(),
        });
    }
    let mut rows = Vec::new();
    for i in 0..per_axis {
        for j in 0..per_axis {
            let frac = |idx: usize| -> f64 {
                if per_axis == 1 {
                    0.0
                } else {
                    -half_width + 2.0 * half_width * idx as f64 / (per_axis - 1) as f64
                }
            };
            let y = DVector::from_vec(vec![frac(i), frac(j)]);
            if let Some(m) = max_norm {
                if y.norm() > m {
                    continue;
                }
            }
            let v = conic_field(cp, &y)?;
            rows.push([y[0], y[1], v[0], v[1]]);
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Closed-form homeomorphism pair for the cubic-surface example germ (k = 2)
// ---------------------------------------------------------------------------

/// Closed-form conic homeomorphism on the eta-ball of R^2, evaluated exactly
/// as printed including the case split on `y1 != 0` / `y2 != 0`; extended by
/// `0 -> 0`. Where the two branches disagree, [`example1_h_branches`] exposes
/// both so the discrepancy can be reported rather than patched.
pub fn example1_h(eta: f64, y: &DVector<f64>) -> Result<DVector<f64>, ConicError> {
    let (b1, b2) = example1_h_branches(eta, y)?;
    b1.or(b2).ok_or(ConicError::InvalidParameter(
        "unreachable: some branch applies to every nonzero point".into(),
    ))
}

/// The two case branches of the closed-form map, each present when its
/// condition holds.
pub type BranchPair = (Option<DVector<f64>>, Option<DVector<f64>>);

/// Both printed branches of the closed-form map, each present when its case
/// condition holds.
pub fn example1_h_branches(eta: f64, y: &DVector<f64>) -> Result<BranchPair, ConicError> {
    check_example1_domain(eta, y)?;
    let (y1, y2) = (y[0], y[1]);
    if y1 == 0.0 && y2 == 0.0 {
        return Ok((Some(DVector::zeros(2)), Some(DVector::zeros(2))));
    }
    let rho = (y1 * y1 + y2 * y2).sqrt();
    let e1 = (1.0 - eta / rho).exp();
    let e2 = (0.5 - eta / (2.0 * rho)).exp();
    let branch1 = if y1 != 0.0 {
        let q = y2 / y1;
        let den = (1.0 + q * q).sqrt();
        Some(DVector::from_vec(vec![
            eta * e1 / den,
            eta * q * e2 / den,
        ]))
    } else {
        None
    };
    let branch2 = if y2 != 0.0 {
        let q = y1 / y2;
        let den = (1.0 + q * q).sqrt();
        Some(DVector::from_vec(vec![
            eta * q * e1 / den,
            eta * e2 / den,
        ]))
    } else {
        None
    };
    Ok((branch1, branch2))
}

/// Printed inverse of [`example1_h`], with the `xi` scaling factor; extended
/// by `0 -> 0`.
pub fn example1_h_inv(eta: f64, y: &DVector<f64>) -> Result<DVector<f64>, ConicError> {
    check_example1_domain(eta, y)?;
    let (y1, y2) = (y[0], y[1]);
    if y1 == 0.0 && y2 == 0.0 {
        return Ok(DVector::zeros(2));
    }
    let root = (y2.powi(4) + 4.0 * y1 * y1 * eta * eta).sqrt();
    let s = y2 * y2 + root;
    let xi = eta / ((1.0 - (s / (2.0 * eta * eta)).ln()) * s);
    Ok(DVector::from_vec(vec![
        xi * 2.0 * eta * y1,
        xi * y2 * (2.0 * y2 * y2 + 2.0 * root).sqrt(),
    ]))
}

fn check_example1_domain(eta: f64, y: &DVector<f64>) -> Result<(), ConicError> {
    if y.len() != 2 {
        return Err(ConicError::DimensionMismatch {
            expected: 2,
            got: y.len(),
        });
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(ConicError::InvalidParameter(format!("eta = {eta} outside (0, 1)")));
    }
    let norm = y.norm();
    if norm > eta * (1.0 + 1e-12) {
        return Err(ConicError::OutsideDomain { norm, radius: eta });
    }
    Ok(())
}
