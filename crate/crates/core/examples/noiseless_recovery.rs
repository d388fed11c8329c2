//! Without noise on the final transition every bucket's least-squares fit is
//! exact, so the median recovers `A` to machine precision.

use robust_sysid::noise::ExcitationOnly;
use robust_sysid::prelude::*;
use robust_sysid::sim::random_stable_matrix;

pub fn main() {
    let a = random_stable_matrix(3, 0.9, &mut SeededRng::new(1));
    let sys = LtiSystem::new(a).unwrap();
    let excitation = ExcitationOnly(NoiseSpec::gaussian(1.0).unwrap());
    let data = collect(&sys, &excitation, 5, 30, 42);

    let est = robust_sysid(&data, &EstimatorConfig::with_buckets(3)).unwrap();
    let err = spectral_norm(&(&est.a_hat - sys.a()), 1e-14).unwrap();
    println!("K = {}, M = {}, error = {err:.3e}", est.plan.k, est.plan.m);
    assert!(err < 1e-9 * spectral_norm(sys.a(), 1e-14).unwrap().max(1.0));
}
