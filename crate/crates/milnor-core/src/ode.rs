//! Adaptive one-step ODE integration with an embedded 5(4) error estimate
//! (Dormand-Prince pair). Works in either direction of the independent
//! variable; accepted states can be post-processed by a hook, which is how
//! flow invariants are projected without the integrator knowing about them.

use crate::linalg::NumError;
use nalgebra::DVector;

/// Step-size and termination control for [`integrate`].
#[derive(Debug, Clone)]
pub struct OdeControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step magnitude; 0 picks |s1 - s0| / 100.
    pub initial_step: f64,
    /// Below this magnitude the integration aborts with `StepUnderflow`.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeControl {
    fn default() -> Self {
        OdeControl {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            initial_step: 0.0,
            min_step: 1e-15,
            max_steps: 200_000,
        }
    }
}

impl OdeControl {
    pub fn validate(&self) -> Result<(), NumError> {
        let bad = |t: f64| !t.is_finite() || t <= 0.0;
        if bad(self.rel_tol) || bad(self.abs_tol) {
            return Err(NumError::FieldEvaluation(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(NumError::FieldEvaluation(
                "max step count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// What a post-step hook decided about an accepted step.
pub enum StepDecision {
    /// Keep the (possibly mutated) state.
    Accept,
    /// Throw the step away and retry with half the step size.
    Retry,
}

// Dormand-Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `dy/ds = field(s, y)` from `s0` to `s1` (either direction).
///
/// Returns the dense sequence of accepted `(s, y)` samples, monotone in `s`,
/// starting at `(s0, y0)` and ending exactly at `s1`.
pub fn integrate<F>(
    field: F,
    y0: &DVector<f64>,
    s0: f64,
    s1: f64,
    ctrl: &OdeControl,
) -> Result<Vec<(f64, DVector<f64>)>, NumError>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>, String>,
{
    integrate_with_hook(field, y0, s0, s1, ctrl, |_, _| StepDecision::Accept)
}

/// [`integrate`] with a hook invoked on every accepted step, before the state
/// is committed. The hook may mutate the state (e.g. project it back onto an
/// invariant manifold) or demand a retry with a smaller step.
pub fn integrate_with_hook<F, H>(
    field: F,
    y0: &DVector<f64>,
    s0: f64,
    s1: f64,
    ctrl: &OdeControl,
    mut on_accept: H,
) -> Result<Vec<(f64, DVector<f64>)>, NumError>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>, String>,
    H: FnMut(f64, &mut DVector<f64>) -> StepDecision,
{
    ctrl.validate()?;
    let dim = y0.len();
    let span = s1 - s0;
    let mut out = vec![(s0, y0.clone())];
    if span == 0.0 {
        return Ok(out);
    }
    let dir = span.signum();
    let mut h = if ctrl.initial_step > 0.0 {
        ctrl.initial_step.min(span.abs()) * dir
    } else {
        span / 100.0
    };
    let mut s = s0;
    let mut y = y0.clone();
    let mut k: Vec<DVector<f64>> = vec![DVector::zeros(dim); 7];

    for _attempt in 0..ctrl.max_steps {
        if (s - s1).abs() <= f64::EPSILON * (s1.abs().max(s0.abs()).max(1.0)) {
            break;
        }
        // do not overshoot the endpoint
        if (s + h - s1) * dir > 0.0 {
            h = s1 - s;
        }
        if h.abs() < ctrl.min_step {
            return Err(NumError::StepUnderflow { s });
        }

        let mut eval_failed: Option<String> = None;
        for i in 0..7 {
            let mut yi = y.clone();
            for (j, kj) in k.iter().enumerate().take(i) {
                if A[i][j] != 0.0 {
                    yi += kj * (h * A[i][j]);
                }
            }
            match field(s + C[i] * h, &yi) {
                Ok(v) => k[i] = v,
                Err(e) => {
                    eval_failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = eval_failed {
            return Err(NumError::FieldEvaluation(e));
        }

        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for i in 0..7 {
            if B5[i] != 0.0 {
                y5 += &k[i] * (h * B5[i]);
            }
            if B4[i] != 0.0 {
                y4 += &k[i] * (h * B4[i]);
            }
        }

        // weighted RMS error of the embedded difference
        let mut err_sq = 0.0;
        let mut finite = true;
        for i in 0..dim {
            if !y5[i].is_finite() {
                finite = false;
                break;
            }
            let scale = ctrl.abs_tol + ctrl.rel_tol * y[i].abs().max(y5[i].abs());
            let e = (y5[i] - y4[i]) / scale;
            err_sq += e * e;
        }
        let err = if finite {
            (err_sq / dim as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            let s_new = s + h;
            let mut y_new = y5;
            match on_accept(s_new, &mut y_new) {
                StepDecision::Accept => {
                    s = s_new;
                    y = y_new;
                    out.push((s, y.clone()));
                    let factor = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    h *= factor;
                }
                StepDecision::Retry => {
                    h *= 0.5;
                }
            }
        } else {
            let factor = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            h *= factor;
        }
    }

    if (s - s1).abs() > f64::EPSILON * (s1.abs().max(s0.abs()).max(1.0)) {
        return Err(NumError::MaxStepsExceeded {
            max_steps: ctrl.max_steps,
            s,
        });
    }
    // land exactly on the requested endpoint
    if let Some(last) = out.last_mut() {
        last.0 = s1;
    }
    Ok(out)
}
