//! Deterministic fixtures shared by the kernel and solver benchmarks.

use sdp_core::instance::{gen_random_wellcond, initial_eta, DualState};
use sdp_core::linalg::psd_power;
use sdp_core::{DenseMatrix, SdpInstance};

/// Random well-conditioned instance with its on-path start state.
pub fn fixture_state(n: usize, m: usize, seed: u64) -> (SdpInstance, DualState) {
    let (inst, y0) = gen_random_wellcond(n, m, 10.0, seed).expect("fixture generates");
    let eta = initial_eta(n);
    let state = DualState::new(&inst, y0, eta).expect("fixture start is feasible");
    (inst, state)
}

/// Positive definite matrix with condition number 10, for kernel benches.
pub fn fixture_spd(n: usize, seed: u64) -> DenseMatrix {
    let (_, state) = fixture_state(n, 2, seed);
    state.slack
}

/// Inverse of [`fixture_spd`], for Hessian assembly benches.
pub fn fixture_spd_inverse(n: usize, seed: u64) -> DenseMatrix {
    psd_power(&fixture_spd(n, seed), -1.0).expect("fixture is invertible")
}
