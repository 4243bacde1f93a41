//! Sampled verification of the conic-homeomorphism axioms for an arbitrary
//! apply/invert pair: rays map to smooth paths, the inverse is smooth outside
//! the origin, and the inverse is a submersion outside the origin.
//!
//! Everything here is finite-difference evidence against declared thresholds,
//! not a proof; callback failures are recorded per sample and never abort the
//! whole report.

use crate::linalg::factorize;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Sampling plan and thresholds for [`verify_conic_axioms`].
#[derive(Debug, Clone, Serialize)]
pub struct AxiomPlan {
    pub rays: usize,
    pub points_per_ray: usize,
    /// Lowest ray parameter in (0, 1); below it curvature growth near the
    /// origin makes second differences meaningless.
    pub s_lo: f64,
    /// Radii (as fractions of eta) at which the inverse map is probed.
    pub inverse_radii: Vec<f64>,
    pub points_per_radius: usize,
    pub seed: u64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    pub smoothness_bound: f64,
    pub submersion_floor: f64,
}

impl Default for AxiomPlan {
    fn default() -> Self {
        AxiomPlan {
            rays: 8,
            points_per_ray: 9,
            s_lo: 0.05,
            inverse_radii: vec![0.25, 0.5, 0.9],
            points_per_radius: 4,
            seed: 0,
            fd_step: 1e-5,
            smoothness_bound: 1e7,
            submersion_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RaySample {
    pub theta: Vec<f64>,
    /// Max norm of the normalized second difference along the image path.
    pub max_second_difference: f64,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseSample {
    pub y: Vec<f64>,
    /// Smallest singular value of the finite-difference Jacobian of the
    /// inverse: the submersion margin.
    pub sigma_min: f64,
    pub condition: f64,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub eta: f64,
    pub rays: Vec<RaySample>,
    pub inverse_points: Vec<InverseSample>,
    pub pass_smooth_rays: bool,
    pub pass_submersion: bool,
    pub pass: bool,
    pub plan: AxiomPlan,
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

/// Check the three conic axioms for an `apply`/`invert` pair on the eta-ball
/// of `R^k`.
pub fn verify_conic_axioms<A, I>(
    k: usize,
    apply: A,
    invert: I,
    eta: f64,
    plan: &AxiomPlan,
) -> AxiomReport
where
    A: Fn(&DVector<f64>) -> Result<DVector<f64>, String>,
    I: Fn(&DVector<f64>) -> Result<DVector<f64>, String>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut rays = Vec::with_capacity(plan.rays);
    let m = plan.points_per_ray.max(3);
    let ds = (1.0 - plan.s_lo) / (m as f64 - 1.0);

    for _ in 0..plan.rays {
        let theta = gaussian_direction(&mut rng, k) * eta;
        let mut images: Vec<Result<DVector<f64>, String>> = Vec::with_capacity(m);
        for j in 0..m {
            let s = plan.s_lo + ds * j as f64;
            images.push(apply(&(&theta * s)));
        }
        let mut max_d2: f64 = 0.0;
        let mut err: Option<String> = None;
        for w in images.windows(3) {
            match (&w[0], &w[1], &w[2]) {
                (Ok(a), Ok(b), Ok(c)) => {
                    let d2 = (a - b * 2.0 + c).norm() / (ds * ds);
                    max_d2 = max_d2.max(d2);
                }
                _ => {
                    err = w
                        .iter()
                        .find_map(|r| r.as_ref().err().cloned());
                    break;
                }
            }
        }
        let ok = err.is_none() && max_d2.is_finite() && max_d2 <= plan.smoothness_bound;
        rays.push(RaySample {
            theta: theta.iter().copied().collect(),
            max_second_difference: max_d2,
            ok,
            error: err,
        });
    }

    let mut inverse_points = Vec::new();
    for &frac in &plan.inverse_radii {
        for _ in 0..plan.points_per_radius {
            let y = gaussian_direction(&mut rng, k) * (frac * eta);
            let h = plan.fd_step * y.norm();
            let mut jac = DMatrix::zeros(k, k);
            let mut err: Option<String> = None;
            'cols: for j in 0..k {
                let mut e = DVector::zeros(k);
                e[j] = h;
                let plus = invert(&(&y + &e));
                let minus = invert(&(&y - &e));
                match (plus, minus) {
                    (Ok(p), Ok(mn)) => {
                        let col = (p - mn) / (2.0 * h);
                        for i in 0..k {
                            jac[(i, j)] = col[i];
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        err = Some(e);
                        break 'cols;
                    }
                }
            }
            let (sigma_min, condition, ok) = if err.is_some() {
                (f64::NAN, f64::NAN, false)
            } else {
                match factorize(&jac, 0.0) {
                    Ok(f) => {
                        let smax = f.singular_values.first().copied().unwrap_or(0.0);
                        let smin = f.singular_values.last().copied().unwrap_or(0.0);
                        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
                        (smin, cond, smin.is_finite() && smin > plan.submersion_floor)
                    }
                    Err(e) => {
                        err = Some(e.to_string());
                        (f64::NAN, f64::NAN, false)
                    }
                }
            };
            inverse_points.push(InverseSample {
                y: y.iter().copied().collect(),
                sigma_min,
                condition,
                ok,
                error: err,
            });
        }
    }

    let pass_smooth_rays = rays.iter().all(|r| r.ok);
    let pass_submersion = inverse_points.iter().all(|p| p.ok);
    AxiomReport {
        eta,
        pass: pass_smooth_rays && pass_submersion,
        rays,
        inverse_points,
        pass_smooth_rays,
        pass_submersion,
        plan: plan.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{ConicFlow, ConicParameter};
    use nalgebra::dvector;

    #[test]
    fn identity_passes_all_axioms_with_unit_margin() {
        let plan = AxiomPlan::default();
        let report = verify_conic_axioms(
            2,
            |x| Ok(x.clone()),
            |y| Ok(y.clone()),
            0.9,
            &plan,
        );
        assert!(report.pass);
        for p in &report.inverse_points {
            assert!((p.sigma_min - 1.0).abs() < 1e-6);
        }
        for r in &report.rays {
            assert!(r.max_second_difference < 1e-4);
        }
    }

    #[test]
    fn coordinate_collapse_fails_submersion() {
        let plan = AxiomPlan::default();
        let report = verify_conic_axioms(
            2,
            |x| Ok(x.clone()),
            |y| Ok(dvector![y[0], 0.0]),
            0.9,
            &plan,
        );
        assert!(!report.pass_submersion);
        assert!(!report.pass);
        // rays are still smooth for the identity-as-apply
        assert!(report.pass_smooth_rays);
    }

    #[test]
    fn flow_homeomorphism_passes_with_positive_margins() {
        let cp = ConicParameter::new(dvector![-0.4, 0.25], 0.9).unwrap();
        let flow = ConicFlow::new(cp);
        let plan = AxiomPlan {
            rays: 4,
            points_per_radius: 2,
            ..AxiomPlan::default()
        };
        let report = verify_conic_axioms(
            2,
            |x| flow.h_apply(x).map_err(|e| e.to_string()),
            |y| flow.h_invert(y).map_err(|e| e.to_string()),
            0.9,
            &plan,
        );
        assert!(report.pass, "report: {report:?}");
        for p in &report.inverse_points {
            assert!(p.sigma_min > 0.0);
        }
    }
}
