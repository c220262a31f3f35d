//! Problem data for the dual barrier solver: constraint matrices, slack
//! assembly, barrier gradient and Hessian (with two independently coded
//! evaluation routes), the proximity potential, duality gap bounds,
//! reference instances with closed-form central paths, random
//! well-conditioned generation, and a JSON interchange format.
//!
//! The dual problem is `min b.y` subject to `S(y) = sum_i y_i A_i - C`
//! positive semidefinite. The barrier objective at sharpness `eta` is
//! `eta * b.y - log det S(y)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, dot, psd_power, sym_eig, vec, DenseMatrix, DEFAULT_PSD_FLOOR,
};

/// Relative Frobenius tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// Problem size `m * n` at or below which the Hessian is assembled by the
/// trace route; larger problems use the factored route.
pub const HESSIAN_PATH_CUTOFF: usize = 2000;

/// Relative eigenvalue threshold below which a Hessian counts as singular.
pub const HESSIAN_SINGULARITY_RTOL: f64 = 1e-14;

/// Starting barrier sharpness for an `n x n` cone.
pub fn initial_eta(n: usize) -> f64 {
    1.0 / (n as f64 + 2.0)
}

fn check_symmetric(m: &DenseMatrix, field: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::validation(
            field,
            format!("expected a square matrix, got {} x {}", m.rows(), m.cols()),
        ));
    }
    if m.asymmetry() > SYMMETRY_RTOL {
        return Err(Error::validation(
            field,
            format!(
                "not symmetric: relative asymmetry {:e} exceeds {:e}",
                m.asymmetry(),
                SYMMETRY_RTOL
            ),
        ));
    }
    Ok(())
}

/// Immutable dual problem data. Construction validates shapes and symmetry
/// and precomputes the `m x n^2` matrix whose row `i` is `vec(A_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpInstance {
    n: usize,
    m: usize,
    b: Vec<f64>,
    c: DenseMatrix,
    constraints: Vec<DenseMatrix>,
    flat: DenseMatrix,
}

impl SdpInstance {
    pub fn new(b: Vec<f64>, c: DenseMatrix, constraints: Vec<DenseMatrix>) -> Result<Self> {
        let m = b.len();
        if m == 0 {
            return Err(Error::validation("b", "needs at least one entry"));
        }
        check_symmetric(&c, "C")?;
        let n = c.rows();
        if n == 0 {
            return Err(Error::validation("C", "needs at least one row"));
        }
        if constraints.len() != m {
            return Err(Error::validation(
                "A",
                format!("{} matrices for {} objective entries", constraints.len(), m),
            ));
        }
        for (i, a) in constraints.iter().enumerate() {
            let field = format!("A[{i}]");
            check_symmetric(a, &field)?;
            if a.rows() != n {
                return Err(Error::validation(
                    field,
                    format!("is {} x {}, expected {n} x {n}", a.rows(), a.cols()),
                ));
            }
        }
        let c = c.symmetrize();
        let constraints: Vec<DenseMatrix> =
            constraints.into_iter().map(|a| a.symmetrize()).collect();
        let mut flat = DenseMatrix::zeros(m, n * n);
        for (i, a) in constraints.iter().enumerate() {
            for (j, v) in vec(a).into_iter().enumerate() {
                flat.set(i, j, v);
            }
        }
        Ok(SdpInstance {
            n,
            m,
            b,
            c,
            constraints,
            flat,
        })
    }

    /// Side length of the semidefinite cone.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of dual variables.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn constraints(&self) -> &[DenseMatrix] {
        &self.constraints
    }

    pub fn constraint(&self, i: usize) -> &DenseMatrix {
        &self.constraints[i]
    }

    /// The `m x n^2` matrix with row `i` equal to `vec(A_i)`.
    pub fn flat(&self) -> &DenseMatrix {
        &self.flat
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        dot(&self.b, y)
    }

    /// Slack `S(y) = sum_i y_i A_i - C`.
    pub fn slack(&self, y: &[f64]) -> DenseMatrix {
        assert_eq!(y.len(), self.m, "y length must match m");
        let mut s = self.c.scale(-1.0);
        for (a, &yi) in self.constraints.iter().zip(y) {
            s.add_scaled_assign(a, yi);
        }
        s
    }
}

/// A dual point together with its slack and a strict feasibility flag.
#[derive(Debug, Clone, Serialize)]
pub struct DualState {
    pub y: Vec<f64>,
    pub eta: f64,
    pub slack: DenseMatrix,
    pub strictly_feasible: bool,
    /// Smallest slack eigenvalue backing the feasibility flag.
    pub min_slack_eig: f64,
}

impl DualState {
    pub fn new(inst: &SdpInstance, y: Vec<f64>, eta: f64) -> Result<Self> {
        let slack = inst.slack(&y);
        let min_slack_eig = sym_eig(&slack)?.min_eigenvalue();
        Ok(DualState {
            y,
            eta,
            slack,
            strictly_feasible: min_slack_eig > DEFAULT_PSD_FLOOR,
            min_slack_eig,
        })
    }
}

/// Barrier gradient `g_j = eta * b_j - tr(S^{-1} A_j)`, evaluated through
/// the flattened constraint matrix. In debug builds the result is
/// cross-checked against per-constraint matrix-product traces.
pub fn gradient(inst: &SdpInstance, s_inv: &DenseMatrix, eta: f64) -> Vec<f64> {
    let traces = inst.flat.matvec(&vec(s_inv));
    let g: Vec<f64> = inst
        .b
        .iter()
        .zip(traces.iter())
        .map(|(&bj, &t)| eta * bj - t)
        .collect();
    #[cfg(debug_assertions)]
    {
        for (j, gj) in g.iter().enumerate() {
            let prod = s_inv.matmul(inst.constraint(j));
            let trace: f64 = (0..inst.n).map(|i| prod.get(i, i)).sum();
            let alt = eta * inst.b[j] - trace;
            debug_assert!(
                (gj - alt).abs() <= 1e-8 * alt.abs().max(1.0),
                "gradient routes disagree at j = {j}: {gj} vs {alt}"
            );
        }
    }
    g
}

/// Barrier Hessian `H_jk = tr(S^{-1} A_j S^{-1} A_k)` by the trace route:
/// precompute `B_k = S^{-1} A_k S^{-1}` and contract entrywise.
pub fn hessian_via_traces(inst: &SdpInstance, s_inv: &DenseMatrix) -> DenseMatrix {
    let m = inst.m;
    let b: Vec<DenseMatrix> = inst
        .constraints
        .iter()
        .map(|a| s_inv.matmul(a).matmul(s_inv))
        .collect();
    let mut h = DenseMatrix::zeros(m, m);
    for j in 0..m {
        for (k, bk) in b.iter().enumerate().skip(j) {
            let v = dot(inst.constraint(j).entries(), bk.entries());
            h.set(j, k, v);
            h.set(k, j, v);
        }
    }
    h
}

/// Barrier Hessian by the factored route: with `R = (S^{-1})^{1/2}` the rows
/// `w_j = vec(R A_j R)` satisfy `H = W W^T`, which realizes
/// `H = F (S^{-1} (x) S^{-1}) F^T` (`F` the flattened constraints) without
/// materializing the `n^2 x n^2` Kronecker factor.
pub fn hessian_via_factor(inst: &SdpInstance, s_inv: &DenseMatrix) -> Result<DenseMatrix> {
    let r = psd_power(s_inv, 0.5)?;
    let n2 = inst.n * inst.n;
    let mut w = DenseMatrix::zeros(inst.m, n2);
    for j in 0..inst.m {
        let row = vec(&r.matmul(inst.constraint(j)).matmul(&r));
        for (k, v) in row.into_iter().enumerate() {
            w.set(j, k, v);
        }
    }
    Ok(w.matmul(&w.transpose()).symmetrize())
}

/// Barrier Hessian, dispatching between the trace and factored routes by
/// problem size. In debug builds the other route is evaluated too and the
/// results are required to agree to 1e-8 relative.
pub fn hessian(inst: &SdpInstance, s_inv: &DenseMatrix) -> Result<DenseMatrix> {
    let h = if inst.m * inst.n <= HESSIAN_PATH_CUTOFF {
        hessian_via_traces(inst, s_inv)
    } else {
        hessian_via_factor(inst, s_inv)?
    };
    #[cfg(debug_assertions)]
    {
        let other = if inst.m * inst.n <= HESSIAN_PATH_CUTOFF {
            hessian_via_factor(inst, s_inv)?
        } else {
            hessian_via_traces(inst, s_inv)
        };
        let diff = h.sub(&other).frobenius_norm();
        debug_assert!(
            diff <= 1e-8 * h.frobenius_norm().max(1.0),
            "hessian routes disagree: relative gap {:e}",
            diff / h.frobenius_norm().max(1.0)
        );
    }
    Ok(h)
}

/// Solve `H x = rhs` for a symmetric positive definite Hessian; fails with
/// `SingularHessian` when the spectrum spans more than fourteen decades.
pub fn solve_hessian(h: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let eig = sym_eig(h)?;
    let (min, max) = (eig.min_eigenvalue(), eig.max_eigenvalue());
    if max <= 0.0 || min < HESSIAN_SINGULARITY_RTOL * max {
        return Err(Error::SingularHessian {
            min_eig: min,
            max_eig: max,
        });
    }
    Ok(eig.apply_to_vec(|l| 1.0 / l, rhs))
}

/// Norm `sqrt(v^T H v)` induced by a positive semidefinite weight matrix.
pub fn weighted_norm(h: &DenseMatrix, v: &[f64]) -> f64 {
    dot(v, &h.matvec(v)).max(0.0).sqrt()
}

/// Norm `sqrt(v^T H^{-1} v)` induced by the inverse weight matrix.
pub fn inv_weighted_norm(h: &DenseMatrix, v: &[f64]) -> Result<f64> {
    Ok(dot(v, &solve_hessian(h, v)?).max(0.0).sqrt())
}

/// Proximity potential `sqrt(g^T H^{-1} g)` at `(y, eta)`, from exact slack
/// inverse, gradient, and Hessian. Zero exactly on the central path.
pub fn potential(inst: &SdpInstance, y: &[f64], eta: f64) -> Result<f64> {
    let s = inst.slack(y);
    let s_inv = psd_power(&s, -1.0).map_err(|e| match e {
        Error::NotPositiveDefinite { min_eig, floor } => {
            Error::NotStrictlyFeasible { min_eig, floor }
        }
        e => e,
    })?;
    let g = gradient(inst, &s_inv, eta);
    let h = hessian(inst, &s_inv)?;
    inv_weighted_norm(&h, &g)
}

/// Objective value and sharpness-derived bounds on the distance to the
/// optimum at a strictly feasible dual point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualityReport {
    /// Dual objective `b.y`.
    pub objective: f64,
    /// Barrier sharpness the bounds are taken at.
    pub eta: f64,
    /// Plain path bound `n / eta` on the gap to the optimum.
    pub gap_bound: f64,
    /// Bound `n (1 + 2 eps_newton) / eta` valid within the audit
    /// neighborhood of the path.
    pub robust_gap_bound: f64,
}

/// Gap bounds at `(y, eta)` for an audit radius `eps_newton`.
pub fn duality_report(inst: &SdpInstance, y: &[f64], eta: f64, eps_newton: f64) -> DualityReport {
    let n = inst.n as f64;
    DualityReport {
        objective: inst.objective(y),
        eta,
        gap_bound: n / eta,
        robust_gap_bound: n * (1.0 + 2.0 * eps_newton) / eta,
    }
}

/// Closed-form central path of a reference instance.
#[derive(Debug, Clone, PartialEq)]
pub enum CentralPath {
    /// `y_i(eta) = -1/eta` for all `m` coordinates.
    Isotropic { m: usize },
    /// The three-variable reference path `(-1/eta, -1/eta, 0)`.
    Closed3,
}

impl CentralPath {
    pub fn y_at(&self, eta: f64) -> Vec<f64> {
        match self {
            CentralPath::Isotropic { m } => vec![-1.0 / eta; *m],
            CentralPath::Closed3 => vec![-1.0 / eta, -1.0 / eta, 0.0],
        }
    }
}

/// Diagonal reference instance: `n = m`, `A_i = -e_i e_i^T`, `C = 0`,
/// `b = -1`. The slack is `diag(-y)`, the path is isotropic, and the path
/// Hessian is `eta^2 I` with condition number 1.
pub fn reference_diagonal(n: usize) -> (SdpInstance, CentralPath) {
    let mut constraints = Vec::with_capacity(n);
    for i in 0..n {
        let mut a = DenseMatrix::zeros(n, n);
        a.set(i, i, -1.0);
        constraints.push(a);
    }
    let inst = SdpInstance::new(vec![-1.0; n], DenseMatrix::zeros(n, n), constraints)
        .expect("reference instance is valid by construction");
    (inst, CentralPath::Isotropic { m: n })
}

/// Three-variable reference instance with a coupled off-diagonal
/// constraint. Its central path is `(-1/eta, -1/eta, 0)`, the path Hessian
/// is `diag(eta^2, eta^2, 2 eta^2)` with condition number 2, and the dual
/// optimum value is 0 at `y = 0`.
pub fn reference_coupled3() -> (SdpInstance, CentralPath) {
    let c = DenseMatrix::from_diag(&[0.0, 0.0, -1.0]);
    let a1 = DenseMatrix::from_diag(&[-1.0, 0.0, 0.0]);
    let a2 = DenseMatrix::from_diag(&[0.0, -1.0, 0.0]);
    let a3 = DenseMatrix::from_rows(&[
        vec![0.0, -1.0, 0.0],
        vec![-1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0],
    ]);
    let inst = SdpInstance::new(vec![-1.0, -1.0, 0.0], c, vec![a1, a2, a3])
        .expect("reference instance is valid by construction");
    (inst, CentralPath::Closed3)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let entries = (0..n * n).map(|_| standard_normal(rng)).collect();
    DenseMatrix::new(n, n, entries).symmetrize()
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let g = DenseMatrix::new(n, n, (0..n * n).map(|_| standard_normal(rng)).collect());
    let qr = g.to_na().qr();
    DenseMatrix::from_na(&qr.q())
}

/// Random instance with a known strictly feasible start exactly on the
/// central path at the initial sharpness.
///
/// Draws `m` Gaussian symmetric constraints (redrawing up to 10 times if
/// they are linearly dependent), a start slack with condition number
/// `target_kappa`, and a Gaussian start point `y0`; then back-solves
/// `C = sum_i y0_i A_i - S0` and scales `b` so the gradient at
/// `(y0, initial_eta(n))` vanishes. Returns the instance and `y0`.
pub fn gen_random_wellcond(
    n: usize,
    m: usize,
    target_kappa: f64,
    seed: u64,
) -> Result<(SdpInstance, Vec<f64>)> {
    if n == 0 {
        return Err(Error::validation("n", "must be at least 1"));
    }
    if m == 0 {
        return Err(Error::validation("m", "must be at least 1"));
    }
    if !target_kappa.is_finite() || target_kappa < 1.0 {
        return Err(Error::validation("kappa", "must be finite and at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const MAX_ATTEMPTS: usize = 10;
    let mut constraints = None;
    for _ in 0..MAX_ATTEMPTS {
        let draw: Vec<DenseMatrix> = (0..m).map(|_| random_symmetric(&mut rng, n)).collect();
        let mut flat = DenseMatrix::zeros(m, n * n);
        for (i, a) in draw.iter().enumerate() {
            for (j, v) in vec(a).into_iter().enumerate() {
                flat.set(i, j, v);
            }
        }
        if condition_number(&flat).is_finite() {
            constraints = Some(draw);
            break;
        }
    }
    let constraints = constraints.ok_or(Error::RankDeficientConstraints {
        attempts: MAX_ATTEMPTS,
    })?;

    let q = random_orthogonal(&mut rng, n);
    let eigs: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            target_kappa.powf(-t)
        })
        .collect();
    let s0 = q
        .matmul(&DenseMatrix::from_diag(&eigs))
        .matmul(&q.transpose())
        .symmetrize();

    let y0: Vec<f64> = (0..m).map(|_| standard_normal(&mut rng)).collect();
    let mut c = s0.scale(-1.0);
    for (a, &yi) in constraints.iter().zip(&y0) {
        c.add_scaled_assign(a, yi);
    }
    let c = c.symmetrize();

    let s0_inv = psd_power(&s0, -1.0)?;
    let eta0 = initial_eta(n);
    let mut flat = DenseMatrix::zeros(m, n * n);
    for (i, a) in constraints.iter().enumerate() {
        for (j, v) in vec(a).into_iter().enumerate() {
            flat.set(i, j, v);
        }
    }
    let b: Vec<f64> = flat
        .matvec(&vec(&s0_inv))
        .into_iter()
        .map(|t| t / eta0)
        .collect();

    let inst = SdpInstance::new(b, c, constraints)?;
    Ok((inst, y0))
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    m: usize,
    b: Vec<f64>,
    #[serde(rename = "C")]
    c: DenseMatrix,
    #[serde(rename = "A")]
    a: Vec<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y0: Option<Vec<f64>>,
}

/// Write an instance (and optional start point) as pretty JSON with keys
/// `n`, `m`, `b`, `C`, `A`, and optionally `y0`.
pub fn save_instance(
    path: &std::path::Path,
    inst: &SdpInstance,
    y0: Option<&[f64]>,
) -> Result<()> {
    let file = InstanceFile {
        n: inst.n,
        m: inst.m,
        b: inst.b.clone(),
        c: inst.c.clone(),
        a: inst.constraints.clone(),
        y0: y0.map(|v| v.to_vec()),
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Load an instance written by [`save_instance`], validating every field
/// and reporting the offending field on failure.
pub fn load_instance(path: &std::path::Path) -> Result<(SdpInstance, Option<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let file: InstanceFile = serde_json::from_str(&text)?;
    if file.n == 0 {
        return Err(Error::validation("n", "must be at least 1"));
    }
    if file.m == 0 {
        return Err(Error::validation("m", "must be at least 1"));
    }
    if file.b.len() != file.m {
        return Err(Error::validation(
            "b",
            format!("has {} entries, expected m = {}", file.b.len(), file.m),
        ));
    }
    if file.c.rows() != file.n || file.c.cols() != file.n {
        return Err(Error::validation(
            "C",
            format!(
                "is {} x {}, expected {} x {}",
                file.c.rows(),
                file.c.cols(),
                file.n,
                file.n
            ),
        ));
    }
    if file.a.len() != file.m {
        return Err(Error::validation(
            "A",
            format!("has {} matrices, expected m = {}", file.a.len(), file.m),
        ));
    }
    for (i, a) in file.a.iter().enumerate() {
        if a.rows() != file.n || a.cols() != file.n {
            return Err(Error::validation(
                format!("A[{i}]"),
                format!(
                    "is {} x {}, expected {} x {}",
                    a.rows(),
                    a.cols(),
                    file.n,
                    file.n
                ),
            ));
        }
    }
    if let Some(y0) = &file.y0 {
        if y0.len() != file.m {
            return Err(Error::validation(
                "y0",
                format!("has {} entries, expected m = {}", y0.len(), file.m),
            ));
        }
    }
    let inst = SdpInstance::new(file.b, file.c, file.a)?;
    Ok((inst, file.y0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, norm2, pinv};
    use rand::Rng;

    fn exact_inverse(inst: &SdpInstance, y: &[f64]) -> DenseMatrix {
        psd_power(&inst.slack(y), -1.0).unwrap()
    }

    #[test]
    fn diagonal_reference_path_is_central() {
        let (inst, path) = reference_diagonal(4);
        for eta in [0.2, 1.0, 5.0] {
            let y = path.y_at(eta);
            let g = gradient(&inst, &exact_inverse(&inst, &y), eta);
            assert!(norm2(&g) <= 1e-12 * eta);
            assert!(potential(&inst, &y, eta).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn diagonal_reference_hessian_is_isotropic() {
        let (inst, path) = reference_diagonal(3);
        let eta = 0.7;
        let h = hessian(&inst, &exact_inverse(&inst, &path.y_at(eta))).unwrap();
        let expect = DenseMatrix::identity(3).scale(eta * eta);
        assert!(h.sub(&expect).frobenius_norm() <= 1e-10 * expect.frobenius_norm());
        assert!((condition_number(&h) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn coupled3_path_slack_gradient_hessian() {
        let (inst, path) = reference_coupled3();
        for eta in [0.2, 1.0, 10.0] {
            let y = path.y_at(eta);
            let s = inst.slack(&y);
            let expect_s = DenseMatrix::from_diag(&[1.0 / eta, 1.0 / eta, 1.0]);
            assert!(s.sub(&expect_s).frobenius_norm() <= 1e-12 * expect_s.frobenius_norm());

            let s_inv = exact_inverse(&inst, &y);
            let g = gradient(&inst, &s_inv, eta);
            assert!(norm2(&g) <= 1e-10 * eta.max(1.0));

            let h = hessian(&inst, &s_inv).unwrap();
            let e2 = eta * eta;
            let expect_h = DenseMatrix::from_diag(&[e2, e2, 2.0 * e2]);
            assert!(h.sub(&expect_h).frobenius_norm() <= 1e-9 * expect_h.frobenius_norm());
            assert!((condition_number(&h) - 2.0).abs() <= 1e-9);

            assert!(potential(&inst, &y, eta).unwrap() <= 1e-7);
        }
    }

    #[test]
    fn coupled3_constraint_flat_condition() {
        let (inst, _) = reference_coupled3();
        assert!((condition_number(inst.flat()) - 2f64.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (inst, _) = reference_coupled3();
        let y = [-2.0, -1.5, 0.3];
        let eta = 0.8;
        let g = gradient(&inst, &exact_inverse(&inst, &y), eta);

        let barrier = |y: &[f64]| -> f64 {
            let logdet: f64 = sym_eig(&inst.slack(y))
                .unwrap()
                .eigenvalues
                .iter()
                .map(|l| l.ln())
                .sum();
            eta * inst.objective(y) - logdet
        };
        let h = 1e-6;
        for j in 0..3 {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[j] += h;
            ym[j] -= h;
            let fd = (barrier(&yp) - barrier(&ym)) / (2.0 * h);
            assert!(
                (g[j] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                "coordinate {j}: {} vs {fd}",
                g[j]
            );
        }
    }

    #[test]
    fn hessian_routes_agree_small_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let n = 2;
            let m = 2;
            let constraints: Vec<DenseMatrix> =
                (0..m).map(|_| random_symmetric(&mut rng, n)).collect();
            let g = DenseMatrix::new(
                n,
                n,
                (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let s = g.matmul(&g.transpose()).add(&DenseMatrix::identity(n).scale(0.5));
            let b = vec![1.0; m];
            let c = DenseMatrix::zeros(n, n);
            let inst = SdpInstance::new(b, c, constraints).unwrap();
            let s_inv = psd_power(&s, -1.0).unwrap();
            let ht = hessian_via_traces(&inst, &s_inv);
            let hf = hessian_via_factor(&inst, &s_inv).unwrap();
            assert!(ht.sub(&hf).frobenius_norm() <= 1e-9 * ht.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn hessian_routes_agree_medium_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 4;
        let m = 6;
        let constraints: Vec<DenseMatrix> =
            (0..m).map(|_| random_symmetric(&mut rng, n)).collect();
        let inst = SdpInstance::new(vec![0.0; m], DenseMatrix::zeros(n, n), constraints).unwrap();
        let g = random_symmetric(&mut rng, n);
        let s = g.matmul(&g.transpose()).add(&DenseMatrix::identity(n));
        let s_inv = psd_power(&s, -1.0).unwrap();
        let ht = hessian_via_traces(&inst, &s_inv);
        let hf = hessian_via_factor(&inst, &s_inv).unwrap();
        assert!(ht.sub(&hf).frobenius_norm() <= 1e-8 * ht.frobenius_norm());
    }

    #[test]
    fn hessian_matches_kronecker_congruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 3;
        let m = 4;
        let constraints: Vec<DenseMatrix> =
            (0..m).map(|_| random_symmetric(&mut rng, n)).collect();
        let inst = SdpInstance::new(vec![0.0; m], DenseMatrix::zeros(n, n), constraints).unwrap();
        let g = random_symmetric(&mut rng, n);
        let s = g.matmul(&g.transpose()).add(&DenseMatrix::identity(n));
        let s_inv = psd_power(&s, -1.0).unwrap();
        let h = hessian(&inst, &s_inv).unwrap();
        let k = kron(&s_inv, &s_inv).unwrap();
        let via_kron = inst.flat().matmul(&k).matmul(&inst.flat().transpose());
        assert!(h.sub(&via_kron).frobenius_norm() <= 1e-9 * h.frobenius_norm());
    }

    #[test]
    fn potential_matches_pseudo_inverse_route() {
        let (inst, _) = reference_coupled3();
        let y = [-1.3, -0.9, 0.1];
        let eta = 1.7;
        let s_inv = exact_inverse(&inst, &y);
        let g = gradient(&inst, &s_inv, eta);
        let h = hessian(&inst, &s_inv).unwrap();
        let hg = pinv(&h).matvec(&g);
        let expect = dot(&g, &hg).sqrt();
        let got = potential(&inst, &y, eta).unwrap();
        assert!((got - expect).abs() <= 1e-8 * expect.max(1.0));
    }

    #[test]
    fn potential_rejects_infeasible_and_singular() {
        let (inst, path) = reference_diagonal(2);
        let mut y = path.y_at(1.0);
        y[0] = 1.0;
        assert!(matches!(
            potential(&inst, &y, 1.0),
            Err(Error::NotStrictlyFeasible { .. })
        ));

        let mut a = DenseMatrix::zeros(2, 2);
        a.set(0, 0, -1.0);
        let dup = SdpInstance::new(
            vec![-1.0, -1.0],
            DenseMatrix::identity(2).scale(-1.0),
            vec![a.clone(), a],
        )
        .unwrap();
        assert!(matches!(
            potential(&dup, &[0.2, 0.3], 1.0),
            Err(Error::SingularHessian { .. })
        ));
    }

    #[test]
    fn dual_state_flags_strict_feasibility() {
        let (inst, _) = reference_diagonal(2);
        let inside = DualState::new(&inst, vec![-1.0, -2.0], 1.0).unwrap();
        assert!(inside.strictly_feasible);
        assert!((inside.min_slack_eig - 1.0).abs() <= 1e-12);
        let outside = DualState::new(&inst, vec![1.0, -2.0], 1.0).unwrap();
        assert!(!outside.strictly_feasible);
    }

    #[test]
    fn duality_report_values() {
        let (inst, path) = reference_coupled3();
        let eta = 10.0;
        let rep = duality_report(&inst, &path.y_at(eta), eta, 0.1);
        assert!((rep.objective - 0.2).abs() <= 1e-12);
        assert!((rep.gap_bound - 0.3).abs() <= 1e-12);
        assert!((rep.robust_gap_bound - 0.36).abs() <= 1e-12);
    }

    #[test]
    fn random_wellcond_start_is_central_and_conditioned() {
        for (n, m, kappa, seed) in [(3, 4, 10.0, 7u64), (5, 8, 100.0, 21)] {
            let (inst, y0) = gen_random_wellcond(n, m, kappa, seed).unwrap();
            let eta0 = initial_eta(n);
            let state = DualState::new(&inst, y0.clone(), eta0).unwrap();
            assert!(state.strictly_feasible);
            assert!((condition_number(&state.slack) - kappa).abs() <= 1e-6 * kappa);
            let g = gradient(&inst, &exact_inverse(&inst, &y0), eta0);
            let scale = norm2(inst.b()).max(1.0);
            assert!(norm2(&g) <= 1e-10 * scale);
            assert!(potential(&inst, &y0, eta0).unwrap() <= 1e-7);
        }
    }

    #[test]
    fn random_wellcond_is_deterministic() {
        let (a, ya) = gen_random_wellcond(4, 5, 20.0, 99).unwrap();
        let (b, yb) = gen_random_wellcond(4, 5, 20.0, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(ya, yb);
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let asym = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let err = SdpInstance::new(vec![1.0], asym.clone(), vec![DenseMatrix::zeros(2, 2)])
            .unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "C"));

        let err = SdpInstance::new(vec![1.0], DenseMatrix::zeros(2, 2), vec![asym]).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "A[0]"));

        let err = SdpInstance::new(
            vec![1.0, 2.0],
            DenseMatrix::zeros(2, 2),
            vec![DenseMatrix::zeros(2, 2)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "A"));
    }
}
