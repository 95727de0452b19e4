use holomera::ascension::{build_superoperator, Variant};
use holomera::engine::Engine;
use holomera::fitting::{fit_single_particle, fit_tail, fit_w, fit_w_groups, mean_stderr};
use holomera::gravity::{self, AdSParams};
use holomera::hologron::interaction;
use holomera::lattice;
use holomera::mera::{analytic_gates, gauge_transform, BulkCoordinate, HologronGauge, MeraNetwork};
use holomera::noise::{sample_control_gate, NoiseKind, NoiseModel};
use holomera::ops::{self, CMat};
use holomera::tensor::{contract, Tensor};
use holomera::C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(r, i)| C64::new(r, i)), len)
}

fn tensor(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let len = shape.iter().product();
    complex_vec(len).prop_map(move |data| Tensor::new(shape.clone(), data).unwrap())
}

fn hermitian(dim: usize) -> impl Strategy<Value = CMat> {
    complex_vec(dim * dim).prop_map(move |v| {
        let m = CMat::from_fn(dim, dim, |i, j| v[i * dim + j]);
        let h = &m + m.adjoint();
        ops::scale(&h, C64::new(0.5, 0.0))
    })
}

fn gauge() -> impl Strategy<Value = HologronGauge> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, 0.0f64..6.3).prop_map(|(a, b, c, p)| HologronGauge::new([a, b, c], p))
}

fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<C64> {
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    for i in 0..m {
        for j in 0..n {
            for l in 0..k {
                out[i * n + j] += a.get(&[i, l]) * b.get(&[l, j]);
            }
        }
    }
    out
}

fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
    let scale = a.iter().chain(b).map(|x| x.norm()).fold(1.0, f64::max);
    a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn contraction_matches_nested_loops(a in tensor(vec![3, 4]), b in tensor(vec![4, 2])) {
        let c = contract(&a, &b, &[(1, 0)]).unwrap();
        prop_assert!(close(c.data(), &naive_matmul(&a, &b), 1e-12));
    }

    #[test]
    fn contraction_is_bilinear(a in tensor(vec![2, 3, 2]), b in tensor(vec![3, 2]), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let alpha = C64::new(re, im);
        let lhs = contract(&a.scale(alpha), &b, &[(1, 0)]).unwrap();
        let rhs = contract(&a, &b, &[(1, 0)]).unwrap().scale(alpha);
        prop_assert!(close(lhs.data(), rhs.data(), 1e-12));
    }

    #[test]
    fn contraction_is_associative(a in tensor(vec![2, 3]), b in tensor(vec![3, 4]), c in tensor(vec![4, 2])) {
        let left = contract(&contract(&a, &b, &[(1, 0)]).unwrap(), &c, &[(1, 0)]).unwrap();
        let right = contract(&a, &contract(&b, &c, &[(1, 0)]).unwrap(), &[(1, 0)]).unwrap();
        prop_assert!(close(left.data(), right.data(), 1e-12));
    }

    #[test]
    fn sampled_control_gates_are_unitary(eps in 0.0f64..0.2, seed in any::<u64>(), centered in any::<bool>()) {
        let g = analytic_gates();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_control_gate(g.u(), eps, centered, &mut rng);
        prop_assert!(ops::max_abs_diff(&(s.adjoint() * &s), &ops::identity(4)) < 1e-12);
    }

    #[test]
    fn gauge_transforms_keep_gate_identities(gauge in gauge()) {
        let g = gauge_transform(&analytic_gates(), &gauge);
        prop_assert!(g.defects().max() < 1e-12);
        prop_assert!(ops::max_abs_diff(g.v(), analytic_gates().v()) < 1e-12);
    }

    #[test]
    fn ascension_preserves_hermiticity(op in hermitian(8)) {
        let s = build_superoperator(3, Variant::Average, &analytic_gates()).unwrap();
        let out = s.apply(&op);
        prop_assert!(ops::hermiticity_defect(&out) < 1e-12);
        let adj = s.apply(&ops::dagger(&op));
        prop_assert!(ops::max_abs_diff(&adj, &ops::dagger(&out)) < 1e-12);
    }

    #[test]
    fn btz_reduces_to_global_ads(rho in 0.1f64..5.0, pr in -1.0f64..1.0, pt in -1.0f64..1.0, m in 0.0f64..3.0, ell in 0.5f64..3.0) {
        let p = AdSParams::new(ell, m, 0.0, 2.0 * std::f64::consts::PI, 1.0).unwrap();
        let a = gravity::btz_energy(&p, rho, pr, pt).unwrap();
        let b = gravity::one_particle_energy(&p, rho, pr, pt).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn single_particle_fit_recovers_exponentials(inv_ell in 0.3f64..1.2, mc2 in 0.5f64..5.0) {
        let pts: Vec<(f64, f64)> = (2..12).map(|r| (r as f64, 0.5 * mc2 * (inv_ell * r as f64).exp())).collect();
        let f = fit_single_particle(&pts, 2.0, 11.0).unwrap();
        prop_assert!((f.get("inv_ell").unwrap().0 - inv_ell).abs() < 1e-10);
        prop_assert!((f.get("mc2").unwrap().0 - mc2).abs() < 1e-10 * mc2);
    }

    #[test]
    fn tail_and_w_fits_recover_their_models(c1 in -1.0f64..1.0, c2 in 0.0f64..20.0, a in -1.0f64..1.0, b in -5.0f64..5.0, c in -30.0f64..30.0, d in -10.0f64..10.0) {
        let ell = 1.0 / std::f64::consts::LN_2;
        let ds: Vec<f64> = (1..10).map(|x| x as f64).collect();
        let tail: Vec<(f64, f64)> = ds.iter().map(|&x| (x, c1 - c2 * (-x / ell).exp())).collect();
        let t = fit_tail(&tail, ell, 1.0, 9.0).unwrap();
        prop_assert!((t.params[0] - c1).abs() < 1e-10 && (t.params[1] - c2).abs() < 1e-9);
        let w: Vec<(f64, f64)> = ds
            .iter()
            .map(|&x| (x, a + 4.0 * b * (-x / ell).exp() + 2.0 * c * (-1.5 * x / ell).exp() + 6.0 * d * (-2.0 * x / ell).exp()))
            .collect();
        let f = fit_w(&w, ell, 1.0, 9.0).unwrap();
        for (got, want) in f.params.iter().zip([a, b, c, d]) {
            prop_assert!((got - want).abs() < 1e-7 * want.abs().max(1.0), "{got} {want}");
        }
    }
}

#[test]
fn dense_chain_is_hermitian_and_parity_symmetric() {
    for n in [4, 8] {
        let h = lattice::build_dense(n).unwrap();
        assert!(ops::hermiticity_defect(&h) < 1e-12);
        let z = lattice::z_string(n);
        assert!(ops::max_abs(&ops::commutator(&h, &z)) < 1e-12);
    }
}

#[test]
fn dense_chain_is_translation_covariant() {
    let n = 8;
    let h = lattice::build_dense(n).unwrap();
    let shift = |b: usize| ((b << 1) | (b >> (n - 1))) & ((1 << n) - 1);
    for r in 0..1usize << n {
        for c in 0..1usize << n {
            assert_eq!(h[(shift(r), shift(c))], h[(r, c)]);
        }
    }
}

#[test]
fn ed_density_approaches_the_critical_value() {
    let d8 = lattice::ed_ground(8).unwrap().density();
    let d16 = lattice::ed_ground(16).unwrap().density();
    let limit = -4.0 / std::f64::consts::PI;
    assert!(d8 < d16 && d16 < limit, "{d8} {d16}");
}

#[test]
fn random_gauges_leave_the_ground_state_unchanged() {
    let reference = MeraNetwork::new(3).unwrap().statevector(&Default::default()).unwrap();
    for seed in 0..20 {
        let net = MeraNetwork::with_gauge(3, HologronGauge::random(seed)).unwrap();
        let psi = net.statevector(&Default::default()).unwrap();
        let overlap = ops::inner(&reference, &psi);
        let phase = overlap / overlap.norm();
        let diff = reference.iter().zip(&psi).map(|(a, b)| (a * phase - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "seed {seed}: {diff}");
    }
}

#[test]
fn ground_expectations_are_gauge_invariant() {
    let base = Engine::new(MeraNetwork::new(6).unwrap().circuit()).ground_energy();
    for seed in 0..5 {
        let net = MeraNetwork::with_gauge(6, HologronGauge::random(seed)).unwrap();
        assert!((Engine::new(net.circuit()).ground_energy() - base).abs() < 1e-10);
    }
}

#[test]
fn core_optimization_is_idempotent() {
    let net = MeraNetwork::new(5).unwrap();
    let a = net.optimize_core().unwrap();
    let again = MeraNetwork::from_parts(5, analytic_gates(), HologronGauge::symmetric(), Some(a.state.clone())).unwrap();
    let b = again.optimize_core().unwrap();
    assert!((a.energy - b.energy).abs() < 1e-12);
}

#[test]
fn interaction_is_swap_symmetric_and_local() {
    let net = MeraNetwork::new(7).unwrap();
    let engine = Engine::new(net.circuit());
    let x = |rho, s| BulkCoordinate::new(rho, s, 7).unwrap();
    for (a, b) in [(x(3, 2), x(5, 9)), (x(4, 0), x(4, 1)), (x(2, 1), x(6, 40))] {
        let ab = interaction(&engine, a, b).unwrap();
        assert!((ab - interaction(&engine, b, a).unwrap()).abs() < 1e-12);
    }
    assert_eq!(interaction(&engine, x(6, 0), x(6, 32)).unwrap(), 0.0);
}

#[test]
fn superoperators_are_unital_graded_and_contractive() {
    let g = analytic_gates();
    for (k, v) in [(3, Variant::Average), (4, Variant::EvenSelective), (4, Variant::OddSelective), (3, Variant::Single(0))] {
        let s = build_superoperator(k, v, &g).unwrap();
        let id = ops::identity(1 << k);
        assert!(ops::max_abs_diff(&s.apply(&id), &id) < 1e-12);
        assert!(s.sector_leakage() < 1e-10);
        for l in s.eigenvalues().unwrap() {
            assert!(l.norm() <= 1.0 + 1e-8);
        }
    }
}

#[test]
fn truncated_w_model_fits_worse() {
    let ell = 1.0 / std::f64::consts::LN_2;
    let pts: Vec<(f64, f64)> = (1..10)
        .map(|x| {
            let x = x as f64;
            (x, 0.1 - 12.0 * (-x / ell).exp() + 40.0 * (-1.5 * x / ell).exp() - 20.0 * (-2.0 * x / ell).exp())
        })
        .collect();
    let full = fit_w(&pts, ell, 1.0, 9.0).unwrap();
    let constant = fit_w_groups(&pts, ell, 1.0, 9.0, 1).unwrap();
    assert!(constant.residual > full.residual + 1e-3);
}

#[test]
fn standard_errors_shrink_with_sample_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draw = |n: usize, rng: &mut ChaCha8Rng| -> f64 {
        let xs: Vec<f64> = (0..n).map(|_| rand::Rng::gen::<f64>(rng)).collect();
        mean_stderr(&xs).1
    };
    let small = draw(400, &mut rng);
    let large = draw(40_000, &mut rng);
    let ratio = small / large;
    assert!((ratio - 10.0).abs() < 1.0, "{ratio}");
}

#[test]
fn noise_models_validate_strength() {
    assert!(NoiseModel::new(NoiseKind::ControlError { centered: false }, -1e-3, 0).is_err());
    assert!(NoiseModel::new(NoiseKind::Dephasing, 1.01, 0).is_err());
    assert!(NoiseModel::new(NoiseKind::Dephasing, 1.0, 0).is_ok());
}
