//! Subroutine cost evaluation on concrete instances: condition numbers,
//! row-norm complexity parameters, per-call and per-iteration costs in
//! relative cost units, and the generic plug-in total for comparison.
//!
//! All costs drop constants and polylogarithmic factors; only ratios and
//! exponents between reports are meaningful.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{hessian, SdpInstance};
use crate::linalg::{condition_number, mu_param, psd_power};
use crate::oracle::NoiseModel;

/// Measured structure constants and derived costs at one feasible point.
///
/// Cost fields are relative cost units. The direction-solve cost follows
/// the combined per-iteration statement, which uses the slack matrix's
/// parameters; the slack inverse's row-norm parameter is reported
/// alongside for comparison since the per-call bounds mix the two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    /// Condition number of the flattened constraint matrix.
    #[serde(rename = "kappa_A")]
    pub kappa_a: f64,
    /// Condition number of the slack matrix.
    #[serde(rename = "kappa_S")]
    pub kappa_s: f64,
    /// Condition number of the local Hessian.
    #[serde(rename = "kappa_H")]
    pub kappa_h: f64,
    /// Row-norm complexity parameter of the flattened constraints.
    #[serde(rename = "mu_A")]
    pub mu_a: f64,
    /// Row-norm complexity parameter of the slack matrix.
    #[serde(rename = "mu_S")]
    pub mu_s: f64,
    /// Row-norm complexity parameter of the slack inverse.
    #[serde(rename = "mu_S_inv")]
    pub mu_s_inv: f64,
    /// Spectral norm of the local Hessian.
    #[serde(rename = "norm_H")]
    pub norm_h: f64,
    /// Slack-inverse call: `n^2 mu_S kappa_S / eps_S` at effective levels.
    pub t_slack: f64,
    /// Gradient state preparation: `mu_A kappa_A`.
    pub t_grad_state: f64,
    /// Gradient norm estimation: `mu_A kappa_A / eps_g_norm` at effective
    /// levels.
    pub t_grad_norm: f64,
    /// Direction solve:
    /// `m (mu_A kappa_A + mu_S kappa_S) norm_H kappa_H^2`.
    pub t_delta: f64,
    /// Per iteration: `(m mu_A + n^2 mu_S) kappa_A kappa_S kappa_H^3`.
    pub t_iter: f64,
    /// Whole solve: `sqrt(n) ln(1/eps) t_iter`.
    pub t_total: f64,
    /// Generic bound `sqrt(n) (m n + n^{2.5})` with worst-case parameters
    /// plugged in, for comparison against the measured total.
    pub plugin_total: f64,
}

fn finite_or_max(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

/// Generic plug-in cost `sqrt(n) (m n + n^{2.5})`.
pub fn plugin_total(n: usize, m: usize) -> f64 {
    let nf = n as f64;
    nf.sqrt() * (m as f64 * nf + nf.powf(2.5))
}

/// Evaluate the cost formulas at the strictly feasible point `y` using
/// the noise model's effective levels at the measured condition numbers.
/// The sharpness `eta` travels with the state but does not enter the
/// formulas; `eps` is the target accuracy driving the iteration count.
pub fn estimate(
    inst: &SdpInstance,
    y: &[f64],
    eta: f64,
    noise: &NoiseModel,
    eps: f64,
) -> Result<ResourceReport> {
    noise.validate()?;
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::validation("eta", format!("{eta} not positive")));
    }
    if !eps.is_finite() || eps <= 0.0 || eps >= 1.0 {
        return Err(Error::validation("eps", format!("{eps} outside (0, 1)")));
    }
    if y.len() != inst.m() {
        return Err(Error::validation(
            "y",
            format!("has {} entries, expected m = {}", y.len(), inst.m()),
        ));
    }
    let slack = inst.slack(y);
    let s_inv = psd_power(&slack, -1.0).map_err(|e| match e {
        Error::NotPositiveDefinite { min_eig, floor } => {
            Error::NotStrictlyFeasible { min_eig, floor }
        }
        e => e,
    })?;
    let h = hessian(inst, &s_inv)?;

    let kappa_a = finite_or_max(condition_number(inst.flat()));
    let kappa_s = finite_or_max(condition_number(&slack));
    let kappa_h = finite_or_max(condition_number(&h));
    let mu_a = mu_param(inst.flat(), None);
    let mu_s = mu_param(&slack, None);
    let mu_s_inv = mu_param(&s_inv, None);
    let norm_h = h.spectral_norm();

    let eff = noise.effective(kappa_h, kappa_a);
    if eff.eps_s <= 0.0 {
        return Err(Error::validation(
            "eps_S",
            "slack-inverse cost diverges at zero effective level",
        ));
    }
    if eff.eps_g_norm <= 0.0 {
        return Err(Error::validation(
            "eps_g_norm",
            "gradient-norm cost diverges at zero effective level",
        ));
    }

    let n = inst.n() as f64;
    let m = inst.m() as f64;
    let t_slack = n * n * mu_s * kappa_s / eff.eps_s;
    let t_grad_state = mu_a * kappa_a;
    let t_grad_norm = mu_a * kappa_a / eff.eps_g_norm;
    let t_delta = m * (mu_a * kappa_a + mu_s * kappa_s) * norm_h * kappa_h * kappa_h;
    let t_iter = (m * mu_a + n * n * mu_s) * kappa_a * kappa_s * kappa_h.powi(3);
    let t_total = n.sqrt() * (1.0 / eps).ln() * t_iter;

    Ok(ResourceReport {
        kappa_a,
        kappa_s,
        kappa_h,
        mu_a,
        mu_s,
        mu_s_inv,
        norm_h,
        t_slack,
        t_grad_state,
        t_grad_norm,
        t_delta,
        t_iter,
        t_total,
        plugin_total: plugin_total(inst.n(), inst.m()),
    })
}
