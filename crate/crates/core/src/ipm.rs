//! Short-step dual barrier driver with audited robust Newton steps: the
//! sharpness schedule, per-iteration oracle calls, local-norm condition
//! checks, slack movement invariant, termination statuses, and trace
//! records suitable for offline re-verification.
//!
//! One iteration at `(y, eta)` executes in order: grow `eta`; obtain the
//! approximate slack inverse; assemble the Hessian exactly from it; obtain
//! the approximate gradient at the new `eta`; obtain the approximate Newton
//! direction; audit; update `y`. The audit measures, against exactly
//! recomputed references at `y`:
//! - the two-sided semidefinite factor between the exact and approximate
//!   slack inverses (bound `1 + c0`),
//! - the same factor between the Hessian assembled from the approximate
//!   slack inverse and the Hessian actually used (bound `1 + c0`),
//! - the gradient deviation in the inverse local norm, relative to the
//!   exact gradient at the new sharpness (bound `c0`),
//! - the direction deviation from the exact solve in the local norm,
//!   relative to that solve (bound `c0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{
    duality_report, gradient, hessian, initial_eta, inv_weighted_norm, potential, solve_hessian,
    weighted_norm, DualState, DualityReport, SdpInstance,
};
use crate::linalg::{condition_number, psd_power, DenseMatrix, DEFAULT_PSD_FLOOR};
use crate::oracle::{Oracle, OracleOutput, RealizedErrorLevels};

/// Slack on the entry-proximity comparison, absorbing accumulated roundoff.
pub const POTENTIAL_TOLERANCE: f64 = 1e-9;

/// Multiple of the audit radius bounding per-step slack movement.
pub const SLACK_MOVEMENT_FACTOR: f64 = 1.1;

/// Accuracy targets and audit cadence for one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Target accuracy; the certified gap at termination is `eps^2`.
    pub eps: f64,
    /// Audit radius for the proximity potential.
    #[serde(rename = "eps_N")]
    pub eps_newton: f64,
    /// Hard iteration cap applied on top of the planned schedule.
    pub max_iters: usize,
    /// Stride between full condition audits; 1 audits every iteration.
    pub verify_every: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            eps: 0.01,
            eps_newton: 0.1,
            max_iters: 100_000,
            verify_every: 1,
        }
    }
}

impl SolverParams {
    /// Admissible region: `0 < eps <= 0.01` and
    /// `sqrt(eps) <= eps_newton <= 0.1`. The lower corner is closed so the
    /// canonical pair `(0.01, 0.1)` validates.
    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_finite() || self.eps <= 0.0 || self.eps > 0.01 {
            return Err(Error::validation(
                "eps",
                format!("{} outside (0, 0.01]", self.eps),
            ));
        }
        if !self.eps_newton.is_finite()
            || self.eps_newton < self.eps.sqrt()
            || self.eps_newton > 0.1
        {
            return Err(Error::validation(
                "eps_N",
                format!(
                    "{} outside [sqrt(eps) = {}, 0.1]",
                    self.eps_newton,
                    self.eps.sqrt()
                ),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("max_iters", "must be at least 1"));
        }
        if self.verify_every == 0 {
            return Err(Error::validation("verify_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// Iterations planned by the schedule:
/// `ceil(40 / eps_newton * sqrt(n) * ln(n / eps))` (natural logarithm).
pub fn planned_iterations(n: usize, eps: f64, eps_newton: f64) -> usize {
    let nf = n as f64;
    (40.0 / eps_newton * nf.sqrt() * (nf / eps).ln()).ceil() as usize
}

/// Per-iteration sharpness growth factor `1 + eps_newton / (20 sqrt(n))`.
pub fn eta_growth(n: usize, eps_newton: f64) -> f64 {
    1.0 + eps_newton / (20.0 * (n as f64).sqrt())
}

/// Upper bound `n (1 + 2 eps_newton) / eta` on the gap to the optimum,
/// compared against `eps^2` for early exit.
pub fn gap_surrogate(n: usize, eta: f64, eps_newton: f64) -> f64 {
    n as f64 * (1.0 + 2.0 * eps_newton) / eta
}

/// One measured audit quantity against its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

fn factor_check(result: Result<f64>, bound: f64) -> ConditionCheck {
    let measured = match result {
        Ok(v) if v.is_finite() => v,
        _ => f64::MAX,
    };
    ConditionCheck {
        measured,
        bound,
        pass: measured <= bound,
    }
}

fn ratio_check(lhs: f64, rhs: f64, bound: f64) -> ConditionCheck {
    let measured = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::MAX
    };
    ConditionCheck {
        measured,
        bound,
        pass: measured <= bound,
    }
}

/// Audit of one iteration's approximate quantities in the local norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Semidefinite factor between exact and approximate slack inverses.
    pub slack_inverse_factor: ConditionCheck,
    /// Semidefinite factor between the reference and used Hessians.
    pub hessian_factor: ConditionCheck,
    /// Gradient deviation over gradient size, inverse local norm.
    pub gradient_error: ConditionCheck,
    /// Direction deviation over direction size, local norm.
    pub direction_error: ConditionCheck,
    pub passed: bool,
    /// Name of the first failing check, if any.
    pub first_failed: Option<String>,
}

struct ExactPoint {
    s_inv: DenseMatrix,
    h: DenseMatrix,
}

fn exact_point(inst: &SdpInstance, y: &[f64]) -> Result<ExactPoint> {
    let slack = inst.slack(y);
    let s_inv = psd_power(&slack, -1.0).map_err(|e| match e {
        Error::NotPositiveDefinite { min_eig, floor } => {
            Error::NotStrictlyFeasible { min_eig, floor }
        }
        e => e,
    })?;
    let h = hessian(inst, &s_inv)?;
    Ok(ExactPoint { s_inv, h })
}

/// Measure the four step-audit conditions for supplied approximate
/// quantities, recomputing exact references at `y`. The Hessian actually
/// used is passed explicitly so stress tests can audit perturbed Hessians.
#[allow(clippy::too_many_arguments)]
pub fn check_conditions(
    inst: &SdpInstance,
    y: &[f64],
    eta_new: f64,
    s_inv_tilde: &DenseMatrix,
    h_tilde: &DenseMatrix,
    g_tilde: &[f64],
    delta_tilde: &[f64],
    c0: f64,
) -> Result<ConditionReport> {
    let point = exact_point(inst, y)?;
    check_conditions_at(
        inst,
        &point,
        eta_new,
        s_inv_tilde,
        h_tilde,
        g_tilde,
        delta_tilde,
        c0,
    )
}

#[allow(clippy::too_many_arguments)]
fn check_conditions_at(
    inst: &SdpInstance,
    point: &ExactPoint,
    eta_new: f64,
    s_inv_tilde: &DenseMatrix,
    h_tilde: &DenseMatrix,
    g_tilde: &[f64],
    delta_tilde: &[f64],
    c0: f64,
) -> Result<ConditionReport> {
    use crate::linalg::loewner_factor;
    let factor_bound = 1.0 + c0;

    let slack_inverse_factor =
        factor_check(loewner_factor(&point.s_inv, s_inv_tilde), factor_bound);

    let h_ref = hessian(inst, s_inv_tilde)?;
    let hessian_factor = factor_check(loewner_factor(&h_ref, h_tilde), factor_bound);

    let g_ref = gradient(inst, &point.s_inv, eta_new);
    let dg: Vec<f64> = g_tilde.iter().zip(&g_ref).map(|(a, b)| a - b).collect();
    let gradient_error = ratio_check(
        inv_weighted_norm(&point.h, &dg)?,
        inv_weighted_norm(&point.h, &g_ref)?,
        c0,
    );

    let direction_error = match solve_hessian(h_tilde, g_tilde) {
        Ok(mut d_ref) => {
            for v in &mut d_ref {
                *v = -*v;
            }
            let dd: Vec<f64> = delta_tilde.iter().zip(&d_ref).map(|(a, b)| a - b).collect();
            ratio_check(
                weighted_norm(&point.h, &dd),
                weighted_norm(&point.h, &d_ref),
                c0,
            )
        }
        Err(_) => ratio_check(f64::MAX, 0.0, c0),
    };

    let named = [
        ("slack_inverse_factor", &slack_inverse_factor),
        ("hessian_factor", &hessian_factor),
        ("gradient_error", &gradient_error),
        ("direction_error", &direction_error),
    ];
    let first_failed = named
        .iter()
        .find(|(_, c)| !c.pass)
        .map(|(name, _)| name.to_string());
    Ok(ConditionReport {
        passed: first_failed.is_none(),
        first_failed,
        slack_inverse_factor,
        hessian_factor,
        gradient_error,
        direction_error,
    })
}

/// Frobenius distance of `S_old^{-1/2} S_new S_old^{-1/2}` from the
/// identity; the per-step slack movement measure.
pub fn slack_invariant(s_old: &DenseMatrix, s_new: &DenseMatrix) -> Result<f64> {
    let r = psd_power(s_old, -0.5)?;
    let t = r.matmul(s_new).matmul(&r).symmetrize();
    Ok(t.sub(&DenseMatrix::identity(t.rows())).frobenius_norm())
}

/// Everything recorded about one iteration, sufficient to re-verify the
/// step offline together with the instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    /// Sharpness before the step.
    pub eta: f64,
    /// Sharpness after the step.
    pub eta_new: f64,
    /// Point before the step.
    pub y: Vec<f64>,
    /// Exact proximity potential at `(y, eta)`.
    pub potential_before: f64,
    /// Exact proximity potential at `(y + delta, eta_new)`; absent when
    /// the step was rejected.
    pub potential_after: Option<f64>,
    /// Slack movement of the step; absent when the step was rejected.
    pub slack_invariant_value: Option<f64>,
    /// Condition audit; absent on iterations skipped by `verify_every`.
    pub condition_report: Option<ConditionReport>,
    /// Objective at the post-step point (pre-step if rejected).
    pub objective: f64,
    pub realized_error_levels: RealizedErrorLevels,
    /// Approximate slack inverse used by the step.
    pub slack_inv_tilde: DenseMatrix,
    /// Approximate gradient used by the step.
    pub g_tilde: Vec<f64>,
    /// Step actually added to `y` when accepted.
    pub delta_tilde: Vec<f64>,
    /// Measured Hessian condition number driving effective noise levels.
    pub kappa_h: f64,
    /// Measured flattened-constraint condition number.
    pub kappa_a: f64,
}

/// Result of one [`step`] call.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// State after the step; equals the input state when rejected.
    pub next: DualState,
    pub record: IterationRecord,
    /// False when an audit or movement bound rejected the update.
    pub accepted: bool,
    pub reject_reason: Option<String>,
}

fn finite_or_max(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

/// Execute one barrier iteration from `state`. Audits run when `index` is
/// a multiple of `params.verify_every`; a failed audit or an excessive
/// slack movement rejects the update and leaves the state unchanged.
/// Leaving the cone is an error, as are oracle failures.
pub fn step(
    inst: &SdpInstance,
    state: &DualState,
    params: &SolverParams,
    oracle: &mut dyn Oracle,
    index: usize,
) -> Result<StepOutput> {
    let slack = &state.slack;
    let point = exact_point(inst, &state.y)?;
    let g_now = gradient(inst, &point.s_inv, state.eta);
    let potential_before = inv_weighted_norm(&point.h, &g_now)?;
    let kappa_h = condition_number(&point.h);
    let kappa_a = condition_number(inst.flat());
    let eff = oracle.effective_levels(kappa_h, kappa_a);
    let eta_new = state.eta * eta_growth(inst.n(), params.eps_newton);

    let (slack_inv_tilde, realized_slack) = oracle.slack_inverse(slack, &eff)?;
    let h_tilde = hessian(inst, &slack_inv_tilde)?;
    let (g_tilde, realized_gradient) = oracle.gradient(inst, &slack_inv_tilde, eta_new, &eff)?;
    let (delta_tilde, realized_direction) = oracle.direction(&h_tilde, &g_tilde, &eff)?;
    let output = OracleOutput {
        slack_inv_tilde,
        g_tilde,
        delta_tilde,
        injected_errors: RealizedErrorLevels {
            slack: realized_slack,
            gradient: realized_gradient,
            direction: realized_direction,
        },
    };

    let condition_report = if index.is_multiple_of(params.verify_every) {
        Some(check_conditions_at(
            inst,
            &point,
            eta_new,
            &output.slack_inv_tilde,
            &h_tilde,
            &output.g_tilde,
            &output.delta_tilde,
            oracle.c0(),
        )?)
    } else {
        None
    };

    let mut record = IterationRecord {
        index,
        eta: state.eta,
        eta_new,
        y: state.y.clone(),
        potential_before,
        potential_after: None,
        slack_invariant_value: None,
        condition_report,
        objective: inst.objective(&state.y),
        realized_error_levels: output.injected_errors,
        slack_inv_tilde: output.slack_inv_tilde,
        g_tilde: output.g_tilde,
        delta_tilde: output.delta_tilde,
        kappa_h: finite_or_max(kappa_h),
        kappa_a: finite_or_max(kappa_a),
    };

    if potential_before > params.eps_newton + POTENTIAL_TOLERANCE {
        let reason = format!(
            "entry potential {potential_before:.6e} above budget {:.6e}",
            params.eps_newton
        );
        return Ok(StepOutput {
            next: state.clone(),
            record,
            accepted: false,
            reject_reason: Some(reason),
        });
    }
    if let Some(report) = &record.condition_report {
        if !report.passed {
            let name = report.first_failed.clone().unwrap_or_default();
            return Ok(StepOutput {
                next: state.clone(),
                record,
                accepted: false,
                reject_reason: Some(format!("step audit failed: {name}")),
            });
        }
    }

    let y_new: Vec<f64> = state
        .y
        .iter()
        .zip(&record.delta_tilde)
        .map(|(a, b)| a + b)
        .collect();
    let next = DualState::new(inst, y_new, eta_new)?;
    if !next.strictly_feasible {
        return Err(Error::LeftCone {
            iteration: index,
            min_eig: next.min_slack_eig,
        });
    }
    let movement = slack_invariant(slack, &next.slack)?;
    record.slack_invariant_value = Some(movement);
    record.potential_after = Some(potential(inst, &next.y, eta_new)?);
    record.objective = inst.objective(&next.y);
    let movement_bound = SLACK_MOVEMENT_FACTOR * params.eps_newton;
    if movement > movement_bound {
        let reason = format!(
            "slack movement {movement:.6e} above bound {movement_bound:.6e}"
        );
        return Ok(StepOutput {
            next: state.clone(),
            record,
            accepted: false,
            reject_reason: Some(reason),
        });
    }
    Ok(StepOutput {
        next,
        record,
        accepted: true,
        reject_reason: None,
    })
}

/// Terminal status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Planned schedule completed, or the gap surrogate reached target.
    Converged,
    /// The `max_iters` cap stopped the run before the schedule finished.
    MaxIters,
    /// A step audit or the slack movement bound failed.
    ConditionViolated,
    /// An oracle or linear algebra failure, or the iterate left the cone.
    NumericalFailure,
}

/// Summary of one solve; the trace is carried separately from the
/// serialized form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Accepted steps.
    pub iterations: usize,
    /// Schedule length for this instance and parameters.
    pub planned_iterations: usize,
    pub y_final: Vec<f64>,
    pub eta_final: f64,
    /// Objective at the final point.
    pub objective: f64,
    /// Plain gap bound `n / eta` at the final point.
    pub gap_bound: f64,
    /// Exact proximity potential at the final point.
    pub potential_final: f64,
    pub duality: DualityReport,
    /// Failure description for non-converged statuses.
    pub failure: Option<String>,
    pub failed_iteration: Option<usize>,
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
}

/// Run the barrier method from `y0` at the initial sharpness until the
/// schedule completes, the gap surrogate reaches `eps^2`, the iteration
/// cap hits, or a failure stops the run. The entry point must satisfy the
/// proximity budget or the solve refuses to start.
pub fn solve(
    inst: &SdpInstance,
    y0: &[f64],
    params: &SolverParams,
    oracle: &mut dyn Oracle,
) -> Result<SolveResult> {
    params.validate()?;
    if y0.len() != inst.m() {
        return Err(Error::validation(
            "y0",
            format!("has {} entries, expected m = {}", y0.len(), inst.m()),
        ));
    }
    let n = inst.n();
    let eta0 = initial_eta(n);
    let planned = planned_iterations(n, params.eps, params.eps_newton);
    let mut state = DualState::new(inst, y0.to_vec(), eta0)?;
    if !state.strictly_feasible {
        return Err(Error::NotStrictlyFeasible {
            min_eig: state.min_slack_eig,
            floor: DEFAULT_PSD_FLOOR,
        });
    }
    let entry_potential = potential(inst, y0, eta0)?;
    if entry_potential > params.eps_newton {
        return Err(Error::InitNotOnPath {
            potential: entry_potential,
            budget: params.eps_newton,
        });
    }

    let cap = planned.min(params.max_iters);
    let mut trace = Vec::new();
    let mut status = None;
    let mut failure = None;
    let mut failed_iteration = None;
    let mut iterations = 0usize;
    for index in 0..cap {
        if gap_surrogate(n, state.eta, params.eps_newton) <= params.eps * params.eps {
            status = Some(SolveStatus::Converged);
            break;
        }
        match step(inst, &state, params, oracle, index) {
            Err(e) => {
                status = Some(SolveStatus::NumericalFailure);
                failure = Some(e.to_string());
                failed_iteration = Some(index);
                break;
            }
            Ok(out) => {
                let accepted = out.accepted;
                trace.push(out.record);
                if !accepted {
                    status = Some(SolveStatus::ConditionViolated);
                    failure = out.reject_reason;
                    failed_iteration = Some(index);
                    break;
                }
                state = out.next;
                iterations += 1;
            }
        }
    }
    let status = status.unwrap_or(if cap == planned {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIters
    });
    let potential_final = potential(inst, &state.y, state.eta)?;
    let duality = duality_report(inst, &state.y, state.eta, params.eps_newton);
    Ok(SolveResult {
        status,
        iterations,
        planned_iterations: planned,
        y_final: state.y.clone(),
        eta_final: state.eta,
        objective: duality.objective,
        gap_bound: duality.gap_bound,
        potential_final,
        duality,
        failure,
        failed_iteration,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{reference_coupled3, reference_diagonal};
    use crate::oracle::{EffectiveLevels, ExactOracle, NoiseModel, NoisyOracle};

    fn coupled3_state(eta: f64) -> (SdpInstance, DualState) {
        let (inst, path) = reference_coupled3();
        let state = DualState::new(&inst, path.y_at(eta), eta).unwrap();
        (inst, state)
    }

    /// Noise channels small enough for the audits to pass on the
    /// reference instances: no slack perturbation, vector channels well
    /// under the audit constant.
    fn compliant_noise(seed: u64) -> NoiseModel {
        NoiseModel {
            eps_s: 0.0,
            eps_g: 1e-5,
            eps_g_norm: 1e-5,
            eps_delta: 1e-5,
            eps_n: 1e-5,
            eps_delta_norm: 1e-5,
            scale_by_kappa: true,
            c0: 1e-4,
            seed,
        }
    }

    #[test]
    fn params_validation() {
        SolverParams::default().validate().unwrap();
        let bad = SolverParams {
            eps: 0.02,
            ..SolverParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::Validation { ref field, .. }) if field == "eps"
        ));
        let bad = SolverParams {
            eps_newton: 0.05,
            ..SolverParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::Validation { ref field, .. }) if field == "eps_N"
        ));
        let bad = SolverParams {
            eps_newton: 0.11,
            ..SolverParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::Validation { ref field, .. }) if field == "eps_N"
        ));
        let bad = SolverParams {
            verify_every: 0,
            ..SolverParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::Validation { ref field, .. }) if field == "verify_every"
        ));
    }

    #[test]
    fn schedule_values() {
        assert_eq!(initial_eta(3), 0.2);
        assert_eq!(planned_iterations(3, 0.01, 0.1), 3952);
        assert_eq!(planned_iterations(1, 0.01, 0.1), 1843);
    }

    #[test]
    fn step_grows_eta_and_keeps_potential() {
        let (inst, state) = coupled3_state(0.2);
        let params = SolverParams::default();
        let mut oracle = ExactOracle::default();
        let out = step(&inst, &state, &params, &mut oracle, 0).unwrap();
        assert!(out.accepted);
        assert!((out.record.eta_new - 0.2005774).abs() <= 1e-7);
        assert!(out.record.potential_after.unwrap() <= 0.1);
        let report = out.record.condition_report.unwrap();
        assert!(report.passed);
        assert!(report.slack_inverse_factor.measured <= 1.0 + 1e-9);
        assert!(report.hessian_factor.measured <= 1.0 + 1e-9);
        assert!(report.gradient_error.measured <= 1e-9);
        assert!(report.direction_error.measured <= 1e-9);
    }

    #[test]
    fn slack_invariant_examples() {
        let i4 = DenseMatrix::identity(4);
        assert!(slack_invariant(&i4, &i4).unwrap() <= 1e-14);
        let grown = i4.scale(1.05);
        let want = 0.05 * 2.0;
        assert!((slack_invariant(&i4, &grown).unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn constructed_violations_fail_the_right_condition() {
        let (inst, state) = coupled3_state(0.5);
        let eta_new = state.eta * eta_growth(3, 0.1);
        let c0 = 1e-4;
        let s_inv = psd_power(&state.slack, -1.0).unwrap();
        let h = hessian(&inst, &s_inv).unwrap();
        let g = gradient(&inst, &s_inv, eta_new);
        let mut delta = solve_hessian(&h, &g).unwrap();
        for v in &mut delta {
            *v = -*v;
        }

        let honest = check_conditions(&inst, &state.y, eta_new, &s_inv, &h, &g, &delta, c0)
            .unwrap();
        assert!(honest.passed);

        let scaled_delta: Vec<f64> = delta.iter().map(|v| v * (1.0 + 2.0 * c0)).collect();
        let r = check_conditions(&inst, &state.y, eta_new, &s_inv, &h, &g, &scaled_delta, c0)
            .unwrap();
        assert!(!r.passed);
        assert_eq!(r.first_failed.as_deref(), Some("direction_error"));
        assert!((r.direction_error.measured - 2.0 * c0).abs() <= 1e-6 * c0);

        let inflated_h = h.scale(1.0 + 3.0 * c0);
        let r = check_conditions(&inst, &state.y, eta_new, &s_inv, &inflated_h, &g, &delta, c0)
            .unwrap();
        assert!(!r.passed);
        assert_eq!(r.first_failed.as_deref(), Some("hessian_factor"));

        let inflated_s = s_inv.scale(1.0 + 2.0 * c0);
        let r = check_conditions(&inst, &state.y, eta_new, &inflated_s, &h, &g, &delta, c0)
            .unwrap();
        assert!(!r.passed);
        assert_eq!(r.first_failed.as_deref(), Some("slack_inverse_factor"));

        let g_len = crate::linalg::norm2(&g);
        let shifted_g: Vec<f64> = {
            let mut s = g.clone();
            s[0] += 0.5 * g_len;
            s
        };
        let r = check_conditions(&inst, &state.y, eta_new, &s_inv, &h, &shifted_g, &delta, c0)
            .unwrap();
        assert!(!r.passed);
        assert_eq!(r.first_failed.as_deref(), Some("gradient_error"));
    }

    #[test]
    fn solve_diagonal_reference_is_isotropic_throughout() {
        let (inst, path) = reference_diagonal(4);
        let params = SolverParams {
            max_iters: 200,
            ..SolverParams::default()
        };
        let mut oracle = ExactOracle::default();
        let y0 = path.y_at(initial_eta(4));
        let result = solve(&inst, &y0, &params, &mut oracle).unwrap();
        assert_eq!(result.status, SolveStatus::MaxIters);
        assert_eq!(result.iterations, 200);
        for rec in &result.trace {
            assert!((rec.kappa_h - 1.0).abs() <= 1e-9);
            assert!(rec.potential_before <= 0.1 + POTENTIAL_TOLERANCE);
            assert!(rec.slack_invariant_value.unwrap() <= 1.1 * 0.1);
        }
    }

    #[test]
    fn solve_coupled3_exact_prefix() {
        let (inst, path) = reference_coupled3();
        let params = SolverParams {
            max_iters: 300,
            ..SolverParams::default()
        };
        let mut oracle = ExactOracle::default();
        let y0 = path.y_at(0.2);
        let result = solve(&inst, &y0, &params, &mut oracle).unwrap();
        assert_eq!(result.status, SolveStatus::MaxIters);
        assert_eq!(result.iterations, 300);
        let growth = eta_growth(3, 0.1);
        let mut eta = 0.2;
        for rec in &result.trace {
            assert!((rec.eta - eta).abs() <= 1e-12 * eta);
            assert!((rec.eta_new - eta * growth).abs() <= 1e-12 * eta);
            eta *= growth;
            assert!(rec.potential_after.unwrap() <= 0.1 + POTENTIAL_TOLERANCE);
            assert!(rec.condition_report.as_ref().unwrap().passed);
        }
        assert!((result.eta_final - eta).abs() <= 1e-9 * eta);
    }

    #[test]
    fn noisy_defaults_fail_gradient_audit_immediately() {
        let (inst, path) = reference_coupled3();
        let params = SolverParams::default();
        let mut oracle = NoisyOracle::new(NoiseModel::default()).unwrap();
        let result = solve(&inst, &path.y_at(0.2), &params, &mut oracle).unwrap();
        assert_eq!(result.status, SolveStatus::ConditionViolated);
        assert_eq!(result.failed_iteration, Some(0));
        let report = result.trace[0].condition_report.as_ref().unwrap();
        assert_eq!(report.first_failed.as_deref(), Some("gradient_error"));
        // The slack-channel error dominates the near-path gradient scale by
        // orders of magnitude, so this is a structural failure, not jitter.
        assert!(report.gradient_error.measured > 10.0 * report.gradient_error.bound);
        assert!(report.slack_inverse_factor.pass);
        assert!(report.hessian_factor.pass);
    }

    #[test]
    fn noisy_compliant_levels_track_exact_run() {
        let (inst, path) = reference_coupled3();
        let y0 = path.y_at(0.2);
        let params = SolverParams {
            max_iters: 100,
            ..SolverParams::default()
        };
        let mut noisy = NoisyOracle::new(compliant_noise(5)).unwrap();
        let noisy_run = solve(&inst, &y0, &params, &mut noisy).unwrap();
        assert_eq!(noisy_run.status, SolveStatus::MaxIters);
        assert_eq!(noisy_run.iterations, 100);
        for rec in &noisy_run.trace {
            assert!(rec.condition_report.as_ref().unwrap().passed);
            assert!(rec.potential_after.unwrap() <= 0.1 + POTENTIAL_TOLERANCE);
            assert!(rec.slack_invariant_value.unwrap() <= 1.1 * 0.1);
        }

        let mut exact = ExactOracle::default();
        let exact_run = solve(&inst, &y0, &params, &mut exact).unwrap();
        let divergence: f64 = noisy_run
            .y_final
            .iter()
            .zip(&exact_run.y_final)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(divergence.is_finite());
        assert!(divergence <= 1e-2, "divergence {divergence}");
    }

    #[test]
    fn noisy_runs_are_deterministic() {
        let (inst, path) = reference_coupled3();
        let y0 = path.y_at(0.2);
        let params = SolverParams {
            max_iters: 50,
            ..SolverParams::default()
        };
        let mut a = NoisyOracle::new(compliant_noise(77)).unwrap();
        let mut b = NoisyOracle::new(compliant_noise(77)).unwrap();
        let ra = solve(&inst, &y0, &params, &mut a).unwrap();
        let rb = solve(&inst, &y0, &params, &mut b).unwrap();
        assert_eq!(ra.y_final, rb.y_final);
        assert_eq!(
            serde_json::to_string(&ra.trace).unwrap(),
            serde_json::to_string(&rb.trace).unwrap()
        );
    }

    #[test]
    fn solve_rejects_off_path_start() {
        let (inst, _) = reference_coupled3();
        let params = SolverParams::default();
        let mut oracle = ExactOracle::default();
        let err = solve(&inst, &[-20.0, -5.0, 0.0], &params, &mut oracle).unwrap_err();
        assert!(matches!(err, Error::InitNotOnPath { .. }), "{err}");
    }

    /// Oracle returning a direction long enough to jump out of the cone.
    struct EscapingOracle(ExactOracle);

    impl Oracle for EscapingOracle {
        fn slack_inverse(
            &mut self,
            slack: &DenseMatrix,
            eff: &EffectiveLevels,
        ) -> Result<(DenseMatrix, f64)> {
            self.0.slack_inverse(slack, eff)
        }
        fn gradient(
            &mut self,
            inst: &SdpInstance,
            s_inv: &DenseMatrix,
            eta: f64,
            eff: &EffectiveLevels,
        ) -> Result<(Vec<f64>, f64)> {
            self.0.gradient(inst, s_inv, eta, eff)
        }
        fn direction(
            &mut self,
            hessian: &DenseMatrix,
            gradient: &[f64],
            _eff: &EffectiveLevels,
        ) -> Result<(Vec<f64>, f64)> {
            let _ = (hessian, gradient);
            Ok((vec![1e3; gradient.len()], 0.0))
        }
        fn effective_levels(&self, kappa_h: f64, kappa_a: f64) -> EffectiveLevels {
            self.0.effective_levels(kappa_h, kappa_a)
        }
        fn c0(&self) -> f64 {
            self.0.c0()
        }
    }

    #[test]
    fn unaudited_escape_reports_left_cone() {
        let (inst, state) = coupled3_state(0.2);
        let params = SolverParams {
            verify_every: 5,
            ..SolverParams::default()
        };
        let mut oracle = EscapingOracle(ExactOracle::default());
        // Index 1 skips the audit, so the bad direction is actually taken.
        let err = step(&inst, &state, &params, &mut oracle, 1).unwrap_err();
        assert!(matches!(err, Error::LeftCone { iteration: 1, .. }), "{err}");
    }
}
