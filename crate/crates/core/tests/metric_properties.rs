use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weilkit_core::weighted_metric::{MetricMode, Weights};
use weilkit_core::{AlgebraElement, APoint, BundleMetric, Manifold, MetricConfig, WeilAlgebra};

fn setup(name: &str, k: u32) -> (Arc<Manifold>, Arc<WeilAlgebra>) {
    let m = Arc::new(Manifold::builtin(name).unwrap());
    let a = if name == "T2" {
        Arc::new(WeilAlgebra::truncated(&["e1".to_string(), "e2".to_string()], k).unwrap())
    } else {
        Arc::new(WeilAlgebra::jets(k).unwrap())
    };
    (m, a)
}

fn circle_point(m: &Arc<Manifold>, a: &Arc<WeilAlgebra>, coeffs: Vec<f64>) -> APoint {
    APoint::new(m.clone(), a.clone(), "U", &[AlgebraElement::new(a.clone(), coeffs).unwrap()]).unwrap()
}

#[test]
fn triangle_inequality_and_symmetry() {
    for name in ["S1", "T2"] {
        let (m, a) = setup(name, 2);
        let metric = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let p = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
            let q = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
            let r = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
            let (pq, qr, pr) =
                (metric.distance(&p, &q).unwrap(), metric.distance(&q, &r).unwrap(), metric.distance(&p, &r).unwrap());
            assert_eq!(pq, metric.distance(&q, &p).unwrap());
            assert!(pr <= pq + qr + 1e-9, "{name}: {pr} > {pq} + {qr}");
            assert_eq!(metric.distance(&p, &p).unwrap(), 0.0);
        }
    }
}

#[test]
fn default_probes_separate_jets() {
    for (name, k) in [("S1", 3), ("T2", 2), ("S2", 2), ("R^2", 3)] {
        let (m, a) = setup(name, k);
        let metric = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
            // perturb a single coefficient of the same fiber
            let mut rows = p.to_real_coords().to_rows();
            let i = rng.random_range(0..rows.len());
            let j = rng.random_range(1..rows[0].len());
            rows[i][j] += 1e-3;
            let q = APoint::from_real_coords(m.clone(), a.clone(), p.chart_id(), &weilkit_core::RealCoords::from_rows(&rows).unwrap())
                .unwrap();
            assert!(metric.distance(&p, &q).unwrap() > 1e-12, "{name}");
        }
    }
}

#[test]
fn projection_is_one_lipschitz() {
    let (m, a) = setup("S2", 2);
    let metric = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let p = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
        let q = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
        let base = m.base_distance(&p.project(), &q.project()).unwrap();
        assert!(base <= metric.distance(&p, &q).unwrap());
    }
}

#[test]
fn explicit_and_factorial_weights_are_equivalent() {
    for name in ["S1", "T2"] {
        let (m, a) = setup(name, 2);
        let plain = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default()).unwrap();
        let fact = BundleMetric::new(m.clone(), a.clone(), MetricConfig::factorial()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..1000 {
            let p = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
            let q = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
            let ratio = fact.distance(&p, &q).unwrap() / plain.distance(&p, &q).unwrap();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        // weights lie in [1/k!, 1], so the ratio does too
        assert!(lo >= 0.5 - 1e-12 && hi <= 1.0 + 1e-12, "{name}: [{lo}, {hi}]");
    }
}

#[test]
fn convergence_examples() {
    let (m, a) = setup("S1", 2);
    let metric = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default()).unwrap();
    let limit = circle_point(&m, &a, vec![1.0, 0.0, 0.0]);
    let seq: Vec<APoint> = (1..=200).map(|n| circle_point(&m, &a, vec![1.0, 1.0 / n as f64, 0.0])).collect();
    let rep = metric.convergence_check(&seq, &limit, 1e-2).unwrap();
    assert!(rep.monotone && rep.converged);

    let constant = vec![limit.clone(); 10];
    let rep = metric.convergence_check(&constant, &limit, 0.0).unwrap();
    assert!(rep.distances.iter().all(|d| *d == 0.0) && rep.converged);

    // bases converge across the seam while the jets converge in A
    let limit = circle_point(&m, &a, vec![0.0, 0.5, -0.25]);
    let seq: Vec<APoint> = (1..=1000)
        .map(|n| {
            let h = (n as f64).powi(-3);
            let t = if n % 2 == 0 { h } else { -h };
            circle_point(&m, &a, vec![t, 0.5 + h, -0.25 - h])
        })
        .collect();
    let rep = metric.convergence_check(&seq, &limit, 1e-6).unwrap();
    assert!(rep.converged);
    assert!(rep.cauchy[500] < 1e-6);
}

#[test]
fn box_mode_is_exact_on_first_order_jets() {
    // for A = R[e]/(e^2) the box sup is sum_i w |v_i - v'_i| in l1
    let (m, a) = setup("R^2", 1);
    let cfg = MetricConfig::default().with_mode(MetricMode::Box).with_weights(Weights::Explicit(vec![2.0]));
    let metric = BundleMetric::new(m.clone(), a.clone(), cfg).unwrap();
    let el = |c: &[f64]| AlgebraElement::new(a.clone(), c.to_vec()).unwrap();
    let p = APoint::new(m.clone(), a.clone(), "U", &[el(&[0.1, 1.0]), el(&[0.2, -1.0])]).unwrap();
    let q = APoint::new(m.clone(), a.clone(), "U", &[el(&[0.1, 0.5]), el(&[0.2, 0.0])]).unwrap();
    assert!((metric.distance(&p, &q).unwrap() - 3.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_dominates_probe_mode(seed in any::<u64>(), k in 1u32..=3) {
        let (m, a) = setup("S1", k);
        let probe = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default()).unwrap();
        let boxed = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default().with_mode(MetricMode::Box)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
        let q = APoint::sample_over(m.clone(), a.clone(), &p.project(), 1.0, &mut rng);
        prop_assert!(boxed.distance(&p, &q).unwrap() >= probe.distance(&p, &q).unwrap() - 1e-12);
    }

    #[test]
    fn distances_are_symmetric_on_the_sphere(seed in any::<u64>()) {
        let (m, a) = setup("S2", 2);
        let metric = BundleMetric::new(m.clone(), a.clone(), MetricConfig::factorial()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
        let q = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
        prop_assert_eq!(metric.distance(&p, &q).unwrap(), metric.distance(&q, &p).unwrap());
        // the same point seen from the other chart is at distance ~0
        let other = if p.chart_id() == "N" { "S" } else { "N" };
        if let Ok(p2) = p.in_chart(other) {
            prop_assert!(metric.distance(&p, &p2).unwrap() < 1e-9);
        }
    }
}
