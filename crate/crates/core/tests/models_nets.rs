use densel_core::density::{l2_dist, l2_dist_sq, make_stheta, sample, sup_norm};
use densel_core::harness::config::spiky;
use densel_core::models::{
    check_weights, default_weights, haar_basis, histogram, histogram_risk_exact, project_model,
    projection_coefficients, projection_estimator,
};
use densel_core::net::build_net;
use densel_core::{Partition, PartitionModel, PiecewiseDensity, RngStream, Sample, WeightScheme};
use proptest::prelude::*;
use rand::Rng;

/// Risk of the histogram by direct expansion over cells:
/// bias on each cell plus multinomial variance `p(1 − p)/(n l)`.
fn risk_oracle(s: &PiecewiseDensity, p: &Partition, n: usize) -> f64 {
    let bp = p.breakpoints();
    let mut total = 0.0;
    for w in bp.windows(2) {
        let (a, b) = (w[0], w[1]);
        let l = b - a;
        let mass = s.integral_between(a, b);
        let mean = mass / l;
        // ∫_cell (s − mean)² = ∫_cell s² − l·mean²
        let sq = s.map(|v| v * v).integral_between(a, b);
        total += (sq - l * mean * mean).max(0.0);
        total += mass * (1.0 - mass) / (n as f64 * l);
    }
    total
}

fn mc_histogram_risk(s: &PiecewiseDensity, p: &Partition, n: usize, reps: u64, seed: u64) -> (f64, f64) {
    let losses: Vec<f64> = (0..reps)
        .map(|r| {
            let x = sample(s, n, &mut RngStream::for_replicate(seed, r));
            l2_dist_sq(&histogram(&x, p).unwrap(), s)
        })
        .collect();
    let k = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / k;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn scenarios() -> Vec<(&'static str, PiecewiseDensity, Partition, usize)> {
    let (sp, sp_cells) = spiky(2, 10.0, 100).unwrap();
    vec![
        ("uniform-k4", PiecewiseDensity::uniform(), Partition::regular(4).unwrap(), 100),
        ("spiky", sp, sp_cells, 100),
        (
            "four-step-k2",
            PiecewiseDensity::new(vec![0.0, 0.25, 0.5, 0.75, 1.0], vec![2.0, 0.5, 1.0, 0.5]).unwrap(),
            Partition::regular(2).unwrap(),
            50,
        ),
        ("stheta-k3", make_stheta(1.0 / 3.0).unwrap(), Partition::regular(3).unwrap(), 30),
        (
            "block-dyadic3",
            PiecewiseDensity::new(vec![0.0, 0.3, 0.35, 1.0], vec![0.5, 10.5, 0.5]).unwrap(),
            Partition::dyadic(3).unwrap(),
            200,
        ),
    ]
}

#[test]
fn exact_risk_matches_direct_expansion() {
    for (name, s, p, n) in scenarios() {
        let a = histogram_risk_exact(&s, &p, n);
        let b = risk_oracle(&s, &p, n);
        assert!((a - b).abs() < 1e-12 * b.max(1.0), "{name}: {a} vs {b}");
    }
    assert!((histogram_risk_exact(&PiecewiseDensity::uniform(), &Partition::regular(4).unwrap(), 100) - 0.03).abs() < 1e-15);
}

#[test]
fn spiky_exact_risk_value() {
    let (s, p) = spiky(2, 10.0, 100).unwrap();
    let r = histogram_risk_exact(&s, &p, 100);
    // (2/100)[0.001·0.999/0.0001 + 0.499·0.501/0.4999]
    let hand = 0.02 * (0.001 * 0.999 / 0.0001 + 0.499 * 0.501 / 0.4999);
    assert!((r - hand).abs() < 1e-12);
    assert!((r - 0.209_801_960_392_078_4).abs() < 1e-9);
    assert!(r >= 0.9 * 2.0 * 10.0 / 100.0);
}

#[test]
fn mc_histogram_risk_within_three_se() {
    for (i, (name, s, p, n)) in scenarios().into_iter().enumerate() {
        let exact = histogram_risk_exact(&s, &p, n);
        let (mean, se) = mc_histogram_risk(&s, &p, n, 2000, 100 + i as u64);
        assert!((mean - exact).abs() <= 3.0 * se, "{name}: mean {mean} exact {exact} se {se}");
    }
}

#[test]
fn histogram_examples() {
    let x = Sample::from_observations(vec![0.1, 0.2, 0.6, 0.9]).unwrap();
    let h = histogram(&x, &Partition::regular(2).unwrap()).unwrap();
    assert_eq!(h.values(), &[1.0, 1.0]);
    let x = Sample::from_observations(vec![0.3, 0.31, 0.4]).unwrap();
    let h = histogram(&x, &Partition::regular(4).unwrap()).unwrap();
    assert_eq!(h.values(), &[0.0, 4.0, 0.0, 0.0]);
}

#[test]
fn project_model_examples() {
    let half = PiecewiseDensity::block(0.5).unwrap();
    let u = project_model(&half, &Partition::trivial());
    assert_eq!(u.values(), &[1.0]);
    let s = make_stheta(1.0 / 3.0).unwrap();
    let p = Partition::new(vec![0.0, 1.0 / 27.0, 1.0]).unwrap();
    let m = project_model(&s, &p);
    assert!((m.values()[0] - 9.0).abs() < 1e-12);
    assert!((m.values()[1] - 9.0 / 13.0).abs() < 1e-12);
}

#[test]
fn indicator_basis_reproduces_histogram() {
    let p = Partition::new(vec![0.0, 0.2, 0.7, 1.0]).unwrap();
    let basis = p.indicator_basis();
    let x = sample(&PiecewiseDensity::uniform(), 57, &mut RngStream::new(5, 5));
    let est = projection_estimator(&projection_coefficients(&x, &basis).unwrap(), &basis);
    let h = histogram(&x, &p).unwrap();
    assert!(l2_dist(&est, &h) < 1e-12);
}

#[test]
fn haar_coefficients_mean_zero_under_uniform() {
    let basis = haar_basis(2);
    let reps = 10_000u64;
    let k = basis.len();
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    for r in 0..reps {
        let x = sample(&PiecewiseDensity::uniform(), 40, &mut RngStream::for_replicate(77, r));
        let c = projection_coefficients(&x, &basis).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12);
        for j in 0..k {
            sum[j] += c[j];
            sum_sq[j] += c[j] * c[j];
        }
    }
    for j in 1..k {
        let mean = sum[j] / reps as f64;
        let var = (sum_sq[j] - reps as f64 * mean * mean) / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "coefficient {j}: mean {mean} se {se}");
    }
}

#[test]
fn weight_schemes() {
    let models: Vec<PartitionModel> = [1, 2, 4, 8]
        .iter()
        .map(|&k| PartitionModel::new(Partition::regular(k).unwrap()))
        .collect();
    let fam = default_weights(models.clone(), WeightScheme::Nested).unwrap();
    assert_eq!(fam.weights, vec![0.5, 1.0, 2.0, 4.0]);
    let direct: f64 = [0.5f64, 1.0, 2.0, 4.0].iter().map(|d| (-d).exp()).sum();
    assert!((fam.sigma - direct).abs() < 1e-15);
    let fam = default_weights(vec![models[1].clone()], WeightScheme::BinarySplits).unwrap();
    assert_eq!(fam.weights, vec![4.0]);
    assert!(check_weights(&[0.05]).is_err());
}

fn random_model_density(k: usize, gamma: f64, rng: &mut RngStream) -> PiecewiseDensity {
    loop {
        let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = w.iter().sum();
        let values: Vec<f64> = w.iter().map(|v| v / total * k as f64).collect();
        if values.iter().all(|&v| v <= gamma) {
            let p = Partition::regular(k).unwrap();
            return PiecewiseDensity::validate(p.step(values).unwrap()).unwrap();
        }
    }
}

#[test]
fn net_covers_bounded_model_points() {
    for (k, eta, gamma) in [(2, 0.2, 3.0), (4, 0.2, 4.0), (3, 0.1, 3.0)] {
        let model = PartitionModel::new(Partition::regular(k).unwrap());
        let net = build_net(&model, eta, gamma, gamma).unwrap();
        let mut rng = RngStream::new(k as u64, 9);
        for _ in 0..100 {
            let t = random_model_density(k, gamma, &mut rng);
            let d = net.points.iter().map(|p| l2_dist(p, &t)).fold(f64::INFINITY, f64::min);
            assert!(d <= 3.1 * eta, "k = {k}: distance {d} > 3.1η");
        }
    }
}

#[test]
fn net_points_are_bounded_and_distinct() {
    let model = PartitionModel::new(Partition::regular(4).unwrap());
    let net = build_net(&model, 0.2, 4.0, 4.0).unwrap();
    assert!(!net.is_empty());
    for (i, p) in net.points.iter().enumerate() {
        assert!(sup_norm(p) <= 4.0 + 1e-12);
        assert!((p.integral() - 1.0).abs() < 1e-12);
        for q in &net.points[i + 1..] {
            assert!(l2_dist(p, q) > 1e-9);
        }
    }
    let trivial = build_net(&PartitionModel::new(Partition::trivial()), 0.1, 3.0, 3.0).unwrap();
    assert_eq!(trivial.points, vec![PiecewiseDensity::uniform()]);
}

#[test]
fn net_ball_counts_within_envelope() {
    for k in [2usize, 4] {
        let model = PartitionModel::new(Partition::regular(k).unwrap());
        let eta = 0.2;
        let net = build_net(&model, eta, 3.0, 3.0).unwrap();
        let mut rng = RngStream::new(21, k as u64);
        for _ in 0..20 {
            let t = random_model_density(k, 3.0, &mut rng);
            for x in [2.0f64, 3.0, 4.0] {
                let count = net.points.iter().filter(|p| l2_dist(p, &t) <= x * eta).count();
                assert!((count as f64) <= (9.0 * (k as f64 / 2.0) * x * x).exp());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pythagoras_holds_per_sample(seed in 0u64..10_000, n in 1usize..200, k in 1usize..9) {
        let s = PiecewiseDensity::new(vec![0.0, 0.1, 0.5, 1.0], vec![3.0, 0.5, 1.0]).unwrap();
        let p = Partition::regular(k).unwrap();
        let x = sample(&s, n, &mut RngStream::new(seed, 0));
        let h = histogram(&x, &p).unwrap();
        let bar = project_model(&s, &p);
        let lhs = l2_dist_sq(&s, &h);
        let rhs = l2_dist_sq(&s, &bar) + l2_dist_sq(&bar, &h);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn project_model_idempotent_non_expansive(
        a in prop::collection::vec(0.01f64..10.0, 5),
        b in prop::collection::vec(0.01f64..10.0, 5),
        k in 1usize..7,
    ) {
        let grid = Partition::new(vec![0.0, 0.13, 0.4, 0.41, 0.77, 1.0]).unwrap();
        let s = grid.step(a).unwrap();
        let t = grid.step(b).unwrap();
        let p = Partition::regular(k).unwrap();
        let ps = project_model(&s, &p);
        prop_assert!(l2_dist(&project_model(&ps, &p), &ps) < 1e-12);
        prop_assert!(l2_dist(&ps, &project_model(&t, &p)) <= l2_dist(&s, &t) + 1e-12);
    }
}
