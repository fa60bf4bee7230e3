use specgrad_core::synth::{features_with_spectrum, geometric_spectrum, seeded_rng};
use specgrad_core::*;

#[test]
fn every_legal_pair_passes_grad_check_when_well_conditioned() {
    let mut rng = seeded_rng(42);
    let x = features_with_spectrum(&[1.0, 0.6, 0.35, 0.2], 12, &mut rng).unwrap();
    for cfg in GcpLayerConfig::legal_pairs(4) {
        let exact = matches!(cfg.backward, BackwardScheme::Ordinary);
        let r = grad_check(&cfg, &x, LossKind::RandomLinear(7)).unwrap();
        assert_eq!(r.n_nonfinite, 0, "{}", cfg.describe());
        if exact {
            assert!(r.passed(), "{}: {}", cfg.describe(), r.max_rel_error);
        }
    }
}

#[test]
fn eig_and_ns_forward_agree_once_converged() {
    let mut rng = seeded_rng(3);
    let x = features_with_spectrum(&geometric_spectrum(5, 50.0), 20, &mut rng).unwrap();
    let (qe, _) = gcp_forward(&x, &GcpLayerConfig::eig(BackwardScheme::Ordinary).unwrap()).unwrap();
    let (qn, _) = gcp_forward(&x, &GcpLayerConfig::newton_schulz(25).unwrap()).unwrap();
    assert!(qe.as_matrix().max_abs_diff(qn.as_matrix()) < 1e-9);
}

#[test]
fn square_root_squares_back() {
    let mut rng = seeded_rng(8);
    let x = features_with_spectrum(&[4.0, 1.0, 0.25], 9, &mut rng).unwrap();
    let (q, cache) = gcp_forward(&x, &GcpLayerConfig::eig(BackwardScheme::Ordinary).unwrap()).unwrap();
    let q2 = q.as_matrix().matmul(q.as_matrix());
    assert!(q2.max_abs_diff(cache.covariance().as_matrix()) < 1e-12);
}

#[test]
fn pade_and_ordinary_gradients_agree_on_separated_spectrum() {
    let mut rng = seeded_rng(19);
    let x = features_with_spectrum(&[1.0, 0.5, 0.2], 8, &mut rng).unwrap();
    let g = LossKind::Sum.grad_q(3);
    let ord = GcpLayerConfig::eig(BackwardScheme::Ordinary).unwrap();
    let pade = GcpLayerConfig::eig(BackwardScheme::Pade(100)).unwrap();
    let (_, cache) = gcp_forward(&x, &ord).unwrap();
    let a = gcp_backward(&cache, &g, &ord).unwrap();
    let b = gcp_backward(&cache, &g, &pade).unwrap();
    assert!(a.max_abs_diff(&b) <= 1e-8 * a.max_abs());
}
