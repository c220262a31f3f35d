//! Pluggable subroutine oracles for the barrier solver: an exact reference
//! oracle and a calibrated noisy oracle that injects bounded relative
//! errors into the slack inverse, the gradient, and the Newton direction.
//!
//! Contracts every oracle upholds, with `eps` the effective level for the
//! call:
//! - slack inverse: returns `S^{-1} + E` with `||E||_F <= eps ||S^{-1}||_F`
//!   and `(1 - eps) S^{-1} <= S^{-1} + E <= (1 + eps) S^{-1}` in the
//!   semidefinite order (equivalently `||S^{1/2} E S^{1/2}||_2 <= eps`);
//! - gradient: returns the exact gradient at the perturbed slack inverse
//!   plus an isotropic direction scaled to `eps` times its norm;
//! - direction: returns `-H^{-1} g` for the supplied perturbed data plus an
//!   isotropic direction scaled to `eps` times its norm.
//!
//! Every call also reports the realized relative error so traces can be
//! audited offline. All randomness is drawn from a seeded ChaCha stream, so
//! equal seeds reproduce equal runs bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{self, solve_hessian, SdpInstance};
use crate::linalg::{norm2, psd_power, DenseMatrix};

/// Largest admissible noise level for any channel.
pub const NOISE_LEVEL_MAX: f64 = 0.1;

/// Default robustness constant; also the default level for every channel.
pub const DEFAULT_C0: f64 = 1e-4;

/// Rescale attempts before a degenerate random draw is reported.
const RESCALE_ATTEMPTS: usize = 20;

/// Margin keeping rescaled perturbations strictly inside their budget.
const RESCALE_MARGIN: f64 = 1.0 - 1e-9;

/// Per-channel noise levels and the audit constant, as read from config
/// files. Levels are relative errors in `[0, 0.1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Slack inverse channel level.
    #[serde(rename = "eps_S")]
    pub eps_s: f64,
    /// Gradient state channel level.
    pub eps_g: f64,
    /// Gradient norm channel level.
    pub eps_g_norm: f64,
    /// Direction state channel level.
    pub eps_delta: f64,
    /// Direction solve channel level.
    pub eps_n: f64,
    /// Direction norm channel level.
    pub eps_delta_norm: f64,
    /// Divide levels by measured condition numbers before injecting.
    pub scale_by_kappa: bool,
    /// Robustness constant used by the step audits.
    pub c0: f64,
    /// Seed of the ChaCha noise stream.
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            eps_s: DEFAULT_C0,
            eps_g: DEFAULT_C0,
            eps_g_norm: DEFAULT_C0,
            eps_delta: DEFAULT_C0,
            eps_n: DEFAULT_C0,
            eps_delta_norm: DEFAULT_C0,
            scale_by_kappa: true,
            c0: DEFAULT_C0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let levels = [
            ("eps_S", self.eps_s),
            ("eps_g", self.eps_g),
            ("eps_g_norm", self.eps_g_norm),
            ("eps_delta", self.eps_delta),
            ("eps_n", self.eps_n),
            ("eps_delta_norm", self.eps_delta_norm),
        ];
        for (field, v) in levels {
            if !v.is_finite() || !(0.0..=NOISE_LEVEL_MAX).contains(&v) {
                return Err(Error::validation(
                    field,
                    format!("level {v} outside [0, {NOISE_LEVEL_MAX}]"),
                ));
            }
        }
        if !self.c0.is_finite() || self.c0 <= 0.0 || self.c0 > NOISE_LEVEL_MAX {
            return Err(Error::validation(
                "c0",
                format!("{} outside (0, {NOISE_LEVEL_MAX}]", self.c0),
            ));
        }
        Ok(())
    }

    /// Levels actually injected at a point with measured condition numbers
    /// `kappa_h` (Hessian) and `kappa_a` (flattened constraints). With
    /// `scale_by_kappa` every level is divided by `kappa_h`, and the slack
    /// channel additionally by `kappa_a`.
    pub fn effective(&self, kappa_h: f64, kappa_a: f64) -> EffectiveLevels {
        if !self.scale_by_kappa {
            return EffectiveLevels {
                eps_s: self.eps_s,
                eps_g: self.eps_g,
                eps_g_norm: self.eps_g_norm,
                eps_delta: self.eps_delta,
                eps_n: self.eps_n,
                eps_delta_norm: self.eps_delta_norm,
            };
        }
        EffectiveLevels {
            eps_s: self.eps_s / (kappa_h * kappa_a),
            eps_g: self.eps_g / kappa_h,
            eps_g_norm: self.eps_g_norm / kappa_h,
            eps_delta: self.eps_delta / kappa_h,
            eps_n: self.eps_n / kappa_h,
            eps_delta_norm: self.eps_delta_norm / kappa_h,
        }
    }
}

/// Noise levels after condition scaling, as injected at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveLevels {
    pub eps_s: f64,
    pub eps_g: f64,
    pub eps_g_norm: f64,
    pub eps_delta: f64,
    pub eps_n: f64,
    pub eps_delta_norm: f64,
}

impl EffectiveLevels {
    pub fn zero() -> Self {
        EffectiveLevels {
            eps_s: 0.0,
            eps_g: 0.0,
            eps_g_norm: 0.0,
            eps_delta: 0.0,
            eps_n: 0.0,
            eps_delta_norm: 0.0,
        }
    }

    pub fn uniform(level: f64) -> Self {
        EffectiveLevels {
            eps_s: level,
            eps_g: level,
            eps_g_norm: level,
            eps_delta: level,
            eps_n: level,
            eps_delta_norm: level,
        }
    }

    /// Combined relative budget of the gradient channels.
    pub fn gradient_total(&self) -> f64 {
        self.eps_g + self.eps_g_norm
    }

    /// Combined relative budget of the direction channels.
    pub fn direction_total(&self) -> f64 {
        self.eps_delta + self.eps_n + self.eps_delta_norm
    }
}

/// Relative errors actually injected by the three calls of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedErrorLevels {
    pub slack: f64,
    pub gradient: f64,
    pub direction: f64,
}

impl RealizedErrorLevels {
    pub fn zero() -> Self {
        RealizedErrorLevels {
            slack: 0.0,
            gradient: 0.0,
            direction: 0.0,
        }
    }
}

/// The three approximate quantities produced for one iteration, with the
/// realized error magnitudes actually injected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleOutput {
    pub slack_inv_tilde: DenseMatrix,
    pub g_tilde: Vec<f64>,
    pub delta_tilde: Vec<f64>,
    pub injected_errors: RealizedErrorLevels,
}

/// Exact inverse of a positive definite slack matrix.
pub fn exact_slack_inverse(slack: &DenseMatrix) -> Result<DenseMatrix> {
    psd_power(slack, -1.0)
}

/// Subroutine supplier for one solver run. Implementations must uphold the
/// module-level contracts and report realized relative errors.
pub trait Oracle {
    /// Approximate inverse of the slack matrix.
    fn slack_inverse(
        &mut self,
        slack: &DenseMatrix,
        eff: &EffectiveLevels,
    ) -> Result<(DenseMatrix, f64)>;

    /// Approximate barrier gradient at the supplied slack inverse.
    fn gradient(
        &mut self,
        inst: &SdpInstance,
        s_inv: &DenseMatrix,
        eta: f64,
        eff: &EffectiveLevels,
    ) -> Result<(Vec<f64>, f64)>;

    /// Approximate Newton direction for the supplied Hessian and gradient.
    fn direction(
        &mut self,
        hessian: &DenseMatrix,
        gradient: &[f64],
        eff: &EffectiveLevels,
    ) -> Result<(Vec<f64>, f64)>;

    /// Levels for a point with the given measured condition numbers.
    fn effective_levels(&self, kappa_h: f64, kappa_a: f64) -> EffectiveLevels;

    /// Robustness constant the step audits compare against.
    fn c0(&self) -> f64;
}

/// Oracle computing every quantity exactly; realized errors are zero.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    c0: f64,
}

impl ExactOracle {
    pub fn new(c0: f64) -> Self {
        ExactOracle { c0 }
    }
}

impl Default for ExactOracle {
    fn default() -> Self {
        ExactOracle { c0: DEFAULT_C0 }
    }
}

impl Oracle for ExactOracle {
    fn slack_inverse(
        &mut self,
        slack: &DenseMatrix,
        _eff: &EffectiveLevels,
    ) -> Result<(DenseMatrix, f64)> {
        Ok((psd_power(slack, -1.0)?, 0.0))
    }

    fn gradient(
        &mut self,
        inst: &SdpInstance,
        s_inv: &DenseMatrix,
        eta: f64,
        _eff: &EffectiveLevels,
    ) -> Result<(Vec<f64>, f64)> {
        Ok((instance::gradient(inst, s_inv, eta), 0.0))
    }

    fn direction(
        &mut self,
        hessian: &DenseMatrix,
        gradient: &[f64],
        _eff: &EffectiveLevels,
    ) -> Result<(Vec<f64>, f64)> {
        let mut d = solve_hessian(hessian, gradient)?;
        for v in &mut d {
            *v = -*v;
        }
        Ok((d, 0.0))
    }

    fn effective_levels(&self, _kappa_h: f64, _kappa_a: f64) -> EffectiveLevels {
        EffectiveLevels::zero()
    }

    fn c0(&self) -> f64 {
        self.c0
    }
}

/// Oracle injecting seeded random perturbations at the configured levels.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    model: NoiseModel,
    rng: ChaCha8Rng,
}

impl NoisyOracle {
    pub fn new(model: NoiseModel) -> Result<Self> {
        model.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(NoisyOracle { model, rng })
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Symmetrized Gaussian matrix, the raw shape of slack perturbations.
    fn gaussian_symmetric(&mut self, n: usize) -> DenseMatrix {
        let entries = (0..n * n).map(|_| self.standard_normal()).collect();
        DenseMatrix::new(n, n, entries).symmetrize()
    }

    /// Isotropic unit vector; retries degenerate draws.
    fn unit_direction(&mut self, len: usize) -> Result<Vec<f64>> {
        for _ in 0..RESCALE_ATTEMPTS {
            let d: Vec<f64> = (0..len).map(|_| self.standard_normal()).collect();
            let norm = norm2(&d);
            if norm > 1e-12 {
                return Ok(d.into_iter().map(|v| v / norm).collect());
            }
        }
        Err(Error::RescaleFailure {
            attempts: RESCALE_ATTEMPTS,
        })
    }

    /// Perturb a vector by an isotropic direction scaled to `level` times
    /// the vector norm; returns the realized relative error.
    fn perturb_vector(&mut self, v: &mut [f64], level: f64) -> Result<f64> {
        let norm = norm2(v);
        if level == 0.0 || norm == 0.0 {
            return Ok(0.0);
        }
        let dir = self.unit_direction(v.len())?;
        for (vi, di) in v.iter_mut().zip(dir) {
            *vi += level * norm * di;
        }
        Ok(level)
    }
}

impl Oracle for NoisyOracle {
    fn slack_inverse(
        &mut self,
        slack: &DenseMatrix,
        eff: &EffectiveLevels,
    ) -> Result<(DenseMatrix, f64)> {
        let s_inv = psd_power(slack, -1.0)?;
        if eff.eps_s == 0.0 {
            return Ok((s_inv, 0.0));
        }
        let s_half = psd_power(slack, 0.5)?;
        let n = slack.rows();
        let inv_fro = s_inv.frobenius_norm();
        for _ in 0..RESCALE_ATTEMPTS {
            let e0 = self.gaussian_symmetric(n);
            let fro = e0.frobenius_norm();
            let conj = s_half.matmul(&e0).matmul(&s_half).symmetrize();
            let sandwich = conj.spectral_norm();
            if fro <= 1e-12 || sandwich <= 1e-12 {
                continue;
            }
            // Scale so both the Frobenius budget and the two-sided
            // semidefinite sandwich hold with margin.
            let c = RESCALE_MARGIN * eff.eps_s * (inv_fro / fro).min(1.0 / sandwich);
            let e = e0.scale(c);
            let realized = (c * fro / inv_fro).max(c * sandwich);
            return Ok((s_inv.add(&e), realized));
        }
        Err(Error::RescaleFailure {
            attempts: RESCALE_ATTEMPTS,
        })
    }

    fn gradient(
        &mut self,
        inst: &SdpInstance,
        s_inv: &DenseMatrix,
        eta: f64,
        eff: &EffectiveLevels,
    ) -> Result<(Vec<f64>, f64)> {
        let mut g = instance::gradient(inst, s_inv, eta);
        let realized = self.perturb_vector(&mut g, eff.gradient_total())?;
        Ok((g, realized))
    }

    fn direction(
        &mut self,
        hessian: &DenseMatrix,
        gradient: &[f64],
        eff: &EffectiveLevels,
    ) -> Result<(Vec<f64>, f64)> {
        let mut d = solve_hessian(hessian, gradient)?;
        for v in &mut d {
            *v = -*v;
        }
        let realized = self.perturb_vector(&mut d, eff.direction_total())?;
        Ok((d, realized))
    }

    fn effective_levels(&self, kappa_h: f64, kappa_a: f64) -> EffectiveLevels {
        self.model.effective(kappa_h, kappa_a)
    }

    fn c0(&self) -> f64 {
        self.model.c0
    }
}
