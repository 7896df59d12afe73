use subgauss::adversarial::coupled_scaled_bernoulli;
use subgauss::combiner::{
    adaptive_family, combine, fixed_sigma_family, multiple_delta_estimate, FamilyBuilder,
};
use subgauss::distributions::parse_distribution;
use subgauss::estimators::{k_regular_constant, mom_variance};
use subgauss::kurtosis::{kurtosis_diagnostics, KurtosisConfig};
use subgauss::numeric::sub_gaussian_scale;
use subgauss::rng::trial_rng;

#[test]
fn mom_variance_is_accurate_for_gaussians() {
    let dist = parse_distribution("gaussian:0,1").unwrap();
    let trials = 1000;
    let total: f64 = (0..trials)
        .map(|t| {
            let s = dist.sample_with(&mut trial_rng(11, t), 100_000).unwrap();
            mom_variance(&s, 10).unwrap()
        })
        .sum();
    let avg = total / trials as f64;
    assert!((avg - 1.0).abs() < 0.02, "{avg}");
}

#[test]
fn adaptive_intervals_cover_at_each_level() {
    let dist = parse_distribution("gaussian:0,1").unwrap();
    let (n, trials) = (4096, 2000u64);
    let delta_min = 2f64.powi(-10);
    let mut misses = [0usize; 9];
    for t in 0..trials {
        let s = dist.sample_with(&mut trial_rng(12, t), n).unwrap();
        let family = adaptive_family(&s, delta_min).unwrap();
        assert_eq!(family.m(), 9);
        for (k, ci) in family.intervals().iter().enumerate() {
            misses[k] += usize::from(!ci.contains(0.0));
        }
    }
    for (i, &m) in misses.iter().enumerate() {
        let k = i as i32 + 1;
        let p = 2.0 * 2f64.powi(-k);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            m as f64 / trials as f64 <= p + 3.0 * se,
            "k={k}: {m} misses"
        );
    }
}

#[test]
fn quantile_kreg_on_laplace_stays_within_radius() {
    let dist = parse_distribution("laplace:0").unwrap();
    let (n, trials) = (10_000, 2000u64);
    let radius = k_regular_constant() * dist.std_dev() * sub_gaussian_scale(0.01, n);
    let builder = FamilyBuilder::QuantileKreg {
        k: 1,
        delta_min: None,
    };
    let exceed = (0..trials)
        .filter(|&t| {
            let s = dist.sample_with(&mut trial_rng(13, t), n).unwrap();
            multiple_delta_estimate(&s, &builder).unwrap().abs() > radius
        })
        .count();
    assert!(exceed as f64 / trials as f64 <= 0.01, "{exceed}");
}

#[test]
fn fixed_sigma_estimate_lies_in_first_interval() {
    let dist = parse_distribution("student:6").unwrap();
    for t in 0..200 {
        let s = dist.sample_with(&mut trial_rng(14, t), 500).unwrap();
        let family = fixed_sigma_family(&s, dist.variance(), 1e-3).unwrap();
        let est = combine(&family).estimate;
        assert!(family.get(1).unwrap().contains(est));
    }
}

#[test]
fn kurtosis_pipeline_is_translation_equivariant() {
    let dist = parse_distribution("student:6").unwrap();
    let cfg = KurtosisConfig::new(8, 6.0).unwrap();
    for t in 0..50 {
        let x = dist.sample_with(&mut trial_rng(15, t), 2000).unwrap();
        let y = x.affine(1.0, 5.0).unwrap();
        let a = kurtosis_diagnostics(&x, &cfg).unwrap();
        let b = kurtosis_diagnostics(&y, &cfg).unwrap();
        assert!((b.estimate - a.estimate - 5.0).abs() <= 1e-9 * b.estimate.abs().max(1.0));
        assert!((b.mu_hat - a.mu_hat - 5.0).abs() <= 1e-9 * b.mu_hat.abs().max(1.0));
        assert!((b.nu2_hat - a.nu2_hat).abs() <= 1e-9 * a.nu2_hat.max(1.0));
    }
}

#[test]
fn coupling_match_frequency() {
    let (p, n, trials) = (0.01, 100, 100_000u64);
    let matches = (0..trials)
        .filter(|&seed| {
            coupled_scaled_bernoulli(1.0, p, n, seed)
                .unwrap()
                .coincide()
        })
        .count();
    let rate = matches as f64 / trials as f64;
    let expected = (1.0f64 - p).powi(n as i32);
    assert!((expected - 0.3660).abs() < 1e-4);
    assert!((rate - expected).abs() < 0.01, "{rate}");
}

#[test]
fn coupling_marginal_means() {
    let (c, p) = (2.0, 0.3);
    let z = coupled_scaled_bernoulli(c, p, 1_000_000, 16).unwrap();
    let se = c * (p * (1.0 - p) / 1e6f64).sqrt();
    assert!((z.x.mean() - p * c).abs() <= 5.0 * se);
    assert!((z.y.mean() + p * c).abs() <= 5.0 * se);
}
