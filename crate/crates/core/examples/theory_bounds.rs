//! System constants and the three error bounds for a given configuration.

use robust_sysid::analysis::{c_a, c_w, g_scalar, gramian, lambda_min};
use robust_sysid::prelude::*;

pub fn main() {
    let scalar = LtiSystem::new(Mat::from_rows(&[[0.9]]).unwrap()).unwrap();
    let vector = LtiSystem::new(Mat::from_rows(&[[0.5, 1.0], [0.0, 0.5]]).unwrap()).unwrap();
    let noise = NoiseSpec::spike(0.2, 1.0).unwrap();
    let consts = BoundConstants::default();

    for (sys, theorems) in [
        (scalar, &[Theorem::ScalarThm1][..]),
        (vector, &[Theorem::VectorThm2, Theorem::CorruptedThm3][..]),
    ] {
        let horizon = 10;
        let g = gramian(sys.a(), horizon);
        let ca = c_a(sys.a(), horizon).unwrap();
        let cw = c_w(noise.variance(), noise.fourth_moment()).unwrap();
        println!("A = {:?}", sys.a().to_rows());
        if sys.dim() == 1 {
            println!("  g_T = {:.4}", g_scalar(sys.a()[(0, 0)], horizon));
        }
        println!("  lambda_min(G_T) = {:.4}, C_A = {ca:.3}, C_w = {cw:.3}", lambda_min(&g).unwrap());
        let eta_limit = consts.eta_limit(sys.dim(), ca, cw);
        println!("  eta limit = {eta_limit:.3e}");
        for &which in theorems {
            let inputs = BoundInputs {
                system: sys.clone(),
                horizon,
                sigma2: noise.variance(),
                sigma4t: noise.fourth_moment(),
                n: 100_000,
                delta: 0.01,
                eta: if which == Theorem::CorruptedThm3 { 0.5 * eta_limit } else { 0.0 },
                big_c: 1.0,
            };
            let b = theorem_bound(&inputs, which, &consts).unwrap();
            println!(
                "  {which:?}: bound {:.4} (C = 1), needs K >= {}, M >= {}",
                b.error_bound, b.k_required, b.m_required
            );
            assert!(b.error_bound > 0.0 && b.k_required >= 1);
        }
    }
}
