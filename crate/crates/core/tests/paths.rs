use std::f64::consts::PI;

use mmlab::heat::SpectralKernel;
use mmlab::numeric::{chi_square_sf, ks_pvalue, ks_statistic, mean, normal_cdf, std_dev};
use mmlab::paths::*;
use mmlab::spaces::{collapse_map_torus, ConvexDomain, FiniteMms, PmmSpace, Potential};
use mmlab::transport::{wasserstein_exact, DiscreteMeasure};

fn circle() -> PmmSpace {
    PmmSpace::circle(2.0 * PI).unwrap()
}

fn uniform_grid(step: f64, end: f64) -> Vec<f64> {
    let n = (end / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

#[test]
fn single_atom_paths_are_constant() {
    let space = PmmSpace::finite(FiniteMms::new(vec![0.0], vec![1.0], 0).unwrap()).unwrap();
    let kernel = SpectralKernel::new(&space).unwrap();
    let e = sample_kernel_chain(
        &kernel,
        &InitialLaw::Point(vec![0.0]),
        &[0.0, 0.5, 1.0],
        10,
        1,
    )
    .unwrap();
    assert!(e.paths().iter().all(|p| p.states.iter().all(|&s| s == 0.0)));
    let fdd = extract_fdd(&e, &[0.5], None).unwrap();
    assert_eq!(fdd.len(), 1);
}

#[test]
fn long_circle_steps_are_uniform() {
    let kernel = SpectralKernel::new(&circle()).unwrap();
    let e = sample_kernel_chain(&kernel, &InitialLaw::Point(vec![0.0]), &[8.0], 10_000, 2).unwrap();
    let bins = 20;
    let mut counts = vec![0.0; bins];
    for x in e.marginal(8.0).unwrap() {
        counts[((x[0] / (2.0 * PI)) * bins as f64) as usize % bins] += 1.0;
    }
    let expected = 10_000.0 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|c| (c - expected).powi(2) / expected)
        .sum();
    assert!(chi_square_sf(stat, bins - 1) > 0.01, "chi2 {stat}");
}

#[test]
fn two_state_occupation_matches_matrix_exponential() {
    let (a, b) = (1.5, 0.5);
    let space = PmmSpace::finite(FiniteMms::two_state(a, b).unwrap()).unwrap();
    let kernel = SpectralKernel::new(&space).unwrap();
    let times = [0.3, 1.0];
    let n = 100_000;
    let e = sample_kernel_chain(&kernel, &InitialLaw::Point(vec![0.0]), &times, n, 3).unwrap();
    for &t in &times {
        let p = a / (a + b) * (1.0 - (-(a + b) * t).exp());
        let freq = e
            .marginal(t)
            .unwrap()
            .iter()
            .filter(|x| x[0] == 1.0)
            .count() as f64
            / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * sigma, "t {t}: {freq} vs {p}");
    }
}

#[test]
fn chain_marginal_matches_semigroup() {
    let kernel = SpectralKernel::new(&circle()).unwrap();
    let e = sample_kernel_chain(
        &kernel,
        &InitialLaw::Point(vec![0.4]),
        &[0.25, 0.7],
        10_000,
        4,
    )
    .unwrap();
    // P_t cos(· − 0.4)(0.4) = e^{−t}
    let values: Vec<f64> = e
        .marginal(0.7)
        .unwrap()
        .iter()
        .map(|x| (x[0] - 0.4).cos())
        .collect();
    let se = std_dev(&values) / 100.0;
    assert!((mean(&values) - (-0.7f64).exp()).abs() <= 3.0 * se);
}

#[test]
fn brownian_increment_has_variance_two_dt() {
    let dt = 0.01;
    let e = euler_maruyama(
        &Potential::Zero,
        &[0.0, 0.0],
        &SdeConfig::new(dt, dt),
        100_000,
        5,
    )
    .unwrap();
    for coord in 0..2 {
        let xs: Vec<f64> = e.marginal(dt).unwrap().iter().map(|x| x[coord]).collect();
        let var = std_dev(&xs).powi(2);
        let sigma = 2.0 * dt * (2.0 / xs.len() as f64).sqrt();
        assert!((var - 2.0 * dt).abs() <= 3.0 * sigma, "{var}");
    }
}

#[test]
fn ou_moments_within_bias_and_noise() {
    let dt = 1e-3;
    let steps = 1000;
    let config = SdeConfig::new(dt, 1.0).record_every(100);
    let e = euler_maruyama(&Potential::quadratic(1.0), &[2.0], &config, 10_000, 6).unwrap();
    assert!(e.diverged().is_empty());
    let xs: Vec<f64> = e.marginal(1.0).unwrap().iter().map(|x| x[0]).collect();
    let (m, v) = (mean(&xs), std_dev(&xs).powi(2));
    let q = 1.0 - dt;
    let em_mean = 2.0 * q.powi(steps);
    let em_var = 2.0 * dt * (1.0 - q.powi(2 * steps)) / (1.0 - q * q);
    let exact_mean = 2.0 * (-1.0f64).exp();
    let exact_var = 1.0 - (-2.0f64).exp();
    let n = xs.len() as f64;
    assert!((m - exact_mean).abs() <= (em_mean - exact_mean).abs() + 3.0 * (v / n).sqrt());
    assert!(
        (v - exact_var).abs() <= (em_var - exact_var).abs() + 3.0 * exact_var * (2.0 / n).sqrt()
    );
}

#[test]
fn zero_noise_is_the_gradient_flow() {
    let dt = 1e-3;
    let e = euler_maruyama(
        &Potential::quadratic(1.0),
        &[2.0],
        &SdeConfig::new(dt, 1.0).without_noise(),
        3,
        7,
    )
    .unwrap();
    let x = e.marginal(1.0).unwrap()[0][0];
    assert!((x - 2.0 * (-1.0f64).exp()).abs() <= 2.0 * dt);
}

#[test]
fn halving_dt_halves_the_weak_error() {
    let exact = 2.0 * (-1.0f64).exp();
    let errors: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&dt| {
            let e = euler_maruyama(
                &Potential::quadratic(1.0),
                &[2.0],
                &SdeConfig::new(dt, 1.0),
                100_000,
                8,
            )
            .unwrap();
            let xs: Vec<f64> = e.marginal(1.0).unwrap().iter().map(|x| x[0]).collect();
            (mean(&xs) - exact).abs()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.3..=3.0).contains(&ratio), "{errors:?}");
    }
}

#[test]
fn divergent_paths_are_flagged() {
    // V = -x²·5: the explicit scheme blows up
    let v = Potential::custom(
        "repulsive",
        0.0,
        |x: &[f64]| -5.0 * x[0] * x[0],
        |x: &[f64]| vec![-10.0 * x[0]],
    );
    let e = euler_maruyama(&v, &[1.0], &SdeConfig::new(0.1, 10.0), 4, 9).unwrap();
    assert_eq!(e.len() + e.diverged().len(), 4);
    assert_eq!(e.diverged().len(), 4);
    assert!(e.diverged().iter().all(|d| d.norm > DIVERGENCE_BOUND || d.norm.is_nan()));
}

#[test]
fn reflected_half_line_is_folded_normal() {
    let domain = ConvexDomain::half_line(0.0);
    let config = SdeConfig::new(1e-3, 1.0).record_every(1000);
    let e = reflected_em(
        &domain,
        &Potential::Zero,
        &[0.0],
        &config,
        Boundary::Reflect,
        10_000,
        10,
    )
    .unwrap();
    let xs: Vec<f64> = e.marginal(1.0).unwrap().iter().map(|x| x[0]).collect();
    let d = ks_statistic(&xs, |x| 2.0 * normal_cdf(x / 2f64.sqrt()) - 1.0);
    assert!(ks_pvalue(d, xs.len()) > 0.01, "D = {d}");
}

#[test]
fn reflected_unit_interval_equilibrates_to_uniform() {
    let domain = ConvexDomain::interval(0.0, 1.0);
    let config = SdeConfig::new(1e-3, 3.0).record_every(1000);
    let e = reflected_em(
        &domain,
        &Potential::Zero,
        &[0.2],
        &config,
        Boundary::Reflect,
        10_000,
        11,
    )
    .unwrap();
    let xs: Vec<f64> = e.marginal(3.0).unwrap().iter().map(|x| x[0]).collect();
    let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
    assert!(ks_pvalue(d, xs.len()) > 0.01, "D = {d}");
}

#[test]
fn reflected_states_stay_in_the_domain() {
    let config = SdeConfig::new(0.01, 2.0);
    let ball = ConvexDomain::Ball {
        center: vec![0.0, 0.0],
        radius: 0.5,
    };
    for boundary in [Boundary::Reflect, Boundary::Project] {
        for (domain, x0) in [
            (ConvexDomain::interval(0.0, 0.3), vec![0.1]),
            (ball.clone(), vec![0.2, 0.0]),
        ] {
            let e = reflected_em(
                &domain,
                &Potential::quadratic(2.0),
                &x0,
                &config,
                boundary,
                200,
                12,
            )
            .unwrap();
            assert!(e.diverged().is_empty());
            for p in 0..e.len() {
                for k in 0..e.times().len() {
                    assert!(domain.contains(e.state(p, k)));
                }
            }
        }
    }
}

#[test]
fn interior_paths_ignore_the_boundary() {
    let config = SdeConfig::new(1e-3, 0.05);
    let free = euler_maruyama(&Potential::Zero, &[0.0], &config, 50, 13).unwrap();
    let boxed = reflected_em(
        &ConvexDomain::interval(-10.0, 10.0),
        &Potential::Zero,
        &[0.0],
        &config,
        Boundary::Reflect,
        50,
        13,
    )
    .unwrap();
    assert_eq!(free.paths(), boxed.paths());
}

#[test]
fn fdd_pushforward_is_functorial() {
    let map = collapse_map_torus(4).unwrap();
    let kernel = SpectralKernel::new(map.source()).unwrap();
    let e = sample_kernel_chain(
        &kernel,
        &InitialLaw::Weighted { c: 1.0 },
        &[0.25, 0.75],
        200,
        14,
    )
    .unwrap();
    let mapped = extract_fdd(&e, &[0.25, 0.75], Some(&map)).unwrap();
    let raw = extract_fdd(&e, &[0.25, 0.75], None).unwrap();
    let then_mapped = raw
        .push_forward(2, |x| [map.apply(&x[0..2]), map.apply(&x[2..4])].concat())
        .unwrap();
    assert_eq!(
        mapped.atoms().collect::<Vec<_>>(),
        then_mapped.atoms().collect::<Vec<_>>()
    );
    assert!(mapped
        .weights()
        .iter()
        .zip(then_mapped.weights())
        .all(|(a, b)| (a - b).abs() < 1e-15));
    assert!(matches!(
        extract_fdd(&e, &[0.3], None),
        Err(mmlab::Error::MissingTime(_))
    ));
}

#[test]
fn mapped_fdd_distance_within_fibre_budget() {
    let map = collapse_map_torus(8).unwrap();
    let torus = SpectralKernel::new(map.source()).unwrap();
    let limit = SpectralKernel::new(map.target()).unwrap();
    let times = [0.25, 0.75];
    let start = InitialLaw::Point(vec![0.0, 0.0]);
    let mu = extract_fdd(
        &sample_kernel_chain(&torus, &start, &times, 300, 15).unwrap(),
        &times,
        None,
    )
    .unwrap();
    let nu = extract_fdd(
        &sample_kernel_chain(&limit, &InitialLaw::Point(vec![0.0]), &times, 300, 16).unwrap(),
        &times,
        None,
    )
    .unwrap();
    let mapped = mu
        .push_forward(2, |x| [map.apply(&x[0..2]), map.apply(&x[2..4])].concat())
        .unwrap();
    let section = nu.push_forward(4, |y| vec![y[0], 0.0, y[1], 0.0]).unwrap();
    let on_circle = wasserstein_exact(1.0, &mapped, &nu, fdd_metric(map.target()))
        .unwrap()
        .0;
    let on_torus = wasserstein_exact(1.0, &mu, &section, fdd_metric(map.source()))
        .unwrap()
        .0;
    assert!(on_circle <= on_torus + 1e-9);
    assert!(on_torus <= on_circle + 2.0 * map.fiber_diameter_bound() + 1e-9);
}

#[test]
fn modulus_trivial_cases_and_trend() {
    let space = circle();
    let times = uniform_grid(0.0125, 1.0);
    let constant: Vec<PathSample> = (0..5)
        .map(|id| PathSample {
            id,
            states: vec![1.0; times.len()],
        })
        .collect();
    let e = PathEnsemble::from_paths(
        space.clone(),
        times.clone(),
        constant,
        0,
        InitialLaw::Point(vec![1.0]),
    )
    .unwrap();
    assert_eq!(modulus_statistic(&e, 1.0, 0.4, 0.5).unwrap().value, 0.0);

    let kernel = SpectralKernel::new(&space).unwrap();
    let bm = sample_kernel_chain(&kernel, &InitialLaw::Point(vec![0.0]), &times, 4000, 17).unwrap();
    assert_eq!(modulus_statistic(&bm, 1.0, 0.05, 0.0).unwrap().value, 1.0);
    let values: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&eta| modulus_statistic(&bm, 1.0, eta, 1.2).unwrap().value)
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    // the grid must resolve eta/4
    assert!(modulus_statistic(&bm, 1.0, 0.04, 0.5).is_err());
}

#[test]
fn kolmogorov_moment_on_circle_and_two_state_chain() {
    let kernel = SpectralKernel::new(&circle()).unwrap();
    let times = uniform_grid(0.005, 0.6);
    let bm =
        sample_kernel_chain(&kernel, &InitialLaw::Point(vec![0.0]), &times, 10_000, 18).unwrap();
    let hs = [0.005, 0.01, 0.02, 0.04];
    let table = kolmogorov_moment(&bm, 4.0, &[0.1, 0.3, 0.5], &hs).unwrap();
    assert!((1.7..=2.3).contains(&table.theta), "theta {}", table.theta);
    for &(h, m, se) in &table.by_h {
        // Gaussian fourth moment of an increment with variance 2h
        assert!(
            (m - 12.0 * h * h).abs() <= 4.0 * se + 0.05 * 12.0 * h * h,
            "h {h}: {m}"
        );
    }
    let zero = kolmogorov_moment(&bm, 4.0, &[0.1], &[0.0]).unwrap();
    assert_eq!(zero.by_h[0].1, 0.0);

    let (a, b) = (1.0, 2.0);
    let space = PmmSpace::finite(FiniteMms::two_state(a, b).unwrap()).unwrap();
    let chain = SpectralKernel::new(&space).unwrap();
    let n = 50_000;
    let e =
        sample_kernel_chain(&chain, &InitialLaw::Point(vec![0.0]), &[0.5, 0.75], n, 19).unwrap();
    let t = kolmogorov_moment(&e, 2.0, &[0.5], &[0.25]).unwrap();
    let s = a + b;
    let p01 = |t: f64| a / s * (1.0 - (-s * t).exp());
    let p10 = |t: f64| b / s * (1.0 - (-s * t).exp());
    let exact = (1.0 - p01(0.5)) * p01(0.25) + p01(0.5) * p10(0.25);
    assert!((t.by_h[0].1 - exact).abs() <= 3.0 * (exact * (1.0 - exact) / n as f64).sqrt());
}

#[test]
fn ensembles_are_reproducible_across_thread_counts() {
    let kernel = SpectralKernel::new(&circle()).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let e =
                sample_kernel_chain(&kernel, &InitialLaw::Point(vec![0.0]), &[0.1, 0.2], 500, 20)
                    .unwrap();
            let mut out = Vec::new();
            e.write_csv(&mut out).unwrap();
            out
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    let text = String::from_utf8(one).unwrap();
    assert!(text.starts_with("path_id,t,coord_0\n0,0.1,"));
    let em = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            euler_maruyama(
                &Potential::quadratic(1.0),
                &[1.0],
                &SdeConfig::new(0.01, 0.1),
                300,
                21,
            )
            .unwrap()
        })
    };
    assert_eq!(em(1).paths(), em(3).paths());
}

#[test]
fn weighted_start_on_the_ou_space_is_gaussian() {
    // m̃ = z⁻¹e^{-C|x|²} e^{-|x|²/2}: centred Gaussian with precision 1 + 2C
    let space = PmmSpace::euclidean(1, Potential::quadratic(1.0)).unwrap();
    let kernel = SpectralKernel::new(&space).unwrap();
    let e = sample_kernel_chain(
        &kernel,
        &InitialLaw::Weighted { c: 1.5 },
        &[0.0],
        20_000,
        22,
    )
    .unwrap();
    let xs: Vec<f64> = e.marginal(0.0).unwrap().iter().map(|x| x[0]).collect();
    let d = ks_statistic(&xs, |x| normal_cdf(x * 2.0));
    assert!(ks_pvalue(d, xs.len()) > 0.01);
    let measure = DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let line = PmmSpace::euclidean(1, Potential::Zero).unwrap();
    let g = SpectralKernel::new(&line).unwrap();
    let e = sample_kernel_chain(&g, &InitialLaw::Measure(measure), &[0.0], 2000, 23).unwrap();
    let ones = e
        .marginal(0.0)
        .unwrap()
        .iter()
        .filter(|x| x[0] == 1.0)
        .count() as f64;
    assert!((ones / 2000.0 - 0.5).abs() < 3.0 * (0.25f64 / 2000.0).sqrt());
}
