use std::f64::consts::PI;

use mmlab::convergence::*;
use mmlab::heat::{semigroup_apply, SpectralKernel};
use mmlab::numeric::normal_cdf;
use mmlab::paths::{sample_kernel_chain, InitialLaw};
use mmlab::spaces::{CollapseMap, FiniteMms, PmmSpace};
use mmlab::transport::{wasserstein_1d, DiscreteMeasure};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type RealFn = Box<dyn Fn(&[f64]) -> f64>;

#[test]
fn fdd_operator_identities() {
    let circle = PmmSpace::circle(2.0 * PI).unwrap();
    let one = |_: &[f64]| 1.0;
    assert!(
        (fdd_operator(&circle, &[0.2, 0.5], &[&one, &one], &[1.0]).unwrap() - 1.0).abs() < 1e-12
    );
    let f = |x: &[f64]| (x[0] - 1.0).abs().min(1.0);
    let single = fdd_operator(&circle, &[0.3], &[&f], &[0.4]).unwrap();
    let direct = semigroup_apply(&circle, 0.3, f, &[0.4]).unwrap();
    assert!((single - direct).abs() < 1e-4, "{single} vs {direct}");
    let cos = |x: &[f64]| x[0].cos();
    let exact = (-0.3f64).exp() * 0.4f64.cos();
    assert!((fdd_operator(&circle, &[0.3], &[&cos], &[0.4]).unwrap() - exact).abs() < 1e-10);
    let bad = fdd_operator(&circle, &[0.5, 0.5], &[&one, &one], &[0.0]);
    assert!(bad.is_err());
}

#[test]
fn two_state_fdd_is_a_matrix_product() {
    let (a, b) = (0.7, 1.9);
    let space = PmmSpace::finite(FiniteMms::two_state(a, b).unwrap()).unwrap();
    let s = a + b;
    let p = |t: f64| {
        let e = (-s * t).exp();
        [
            [1.0 - a / s * (1.0 - e), a / s * (1.0 - e)],
            [b / s * (1.0 - e), 1.0 - b / s * (1.0 - e)],
        ]
    };
    let f1 = [0.3, -1.2];
    let f2 = [2.0, 0.5];
    let (t1, t2) = (0.4, 1.1);
    let inner = p(t2 - t1);
    let g: Vec<f64> = (0..2)
        .map(|i| f1[i] * (inner[i][0] * f2[0] + inner[i][1] * f2[1]))
        .collect();
    let outer = p(t1);
    let g1 = |x: &[f64]| f1[x[0] as usize];
    let g2 = |x: &[f64]| f2[x[0] as usize];
    for (x, row) in outer.iter().enumerate() {
        let exact = row[0] * g[0] + row[1] * g[1];
        let value = fdd_operator(&space, &[t1, t2], &[&g1, &g2], &[x as f64]).unwrap();
        assert!((value - exact).abs() < 1e-12, "{value} vs {exact}");
    }
}

fn torus_probes() -> Vec<(FddProbe, f64, f64)> {
    // (probe, circle mean of the base function, fibre weight)
    let limit = SpaceFamily::torus(&[1]).unwrap().limit().clone();
    vec![
        (
            FddProbe::repeated(
                LipschitzTestFunction::cosine(1.0, 0.0)
                    .scaled(0.5, 1.0)
                    .with_fiber_weight(0.5),
                2,
            ),
            1.0,
            0.5,
        ),
        (
            FddProbe::repeated(
                LipschitzTestFunction::hat(&limit, vec![PI], 1.0, 1.0).with_fiber_weight(0.5),
                2,
            ),
            1.0 / (2.0 * PI),
            0.5,
        ),
        (
            FddProbe::repeated(
                LipschitzTestFunction::constant(1.0).with_fiber_weight(1.0),
                2,
            ),
            1.0,
            1.0,
        ),
    ]
}

#[test]
fn torus_weighted_fdd_gaps_match_the_product_oracle() {
    let ns = [1, 2, 4, 8, 16];
    let family = SpaceFamily::torus(&ns).unwrap();
    let times = [0.25, 0.75];
    let cases = torus_probes();
    let probes: Vec<FddProbe> = cases.iter().map(|c| c.0.clone()).collect();
    let report = fdd_convergence_report(
        &family,
        &times,
        &probes,
        StartMode::Weighted { c: 1.0 },
        &GridSettings::default(),
    )
    .unwrap();
    for (probe, mean, w) in &cases {
        for &n in &ns {
            let row = report
                .rows
                .iter()
                .find(|r| r.n == n && r.probe == probe.label)
                .unwrap();
            // offset o = (1 − cos nφ)/n; E o = 1/n, E o(φ₁)o(φ₂) = (1 + e^{−n²Δt}/2)/n²
            let nf = n as f64;
            let cross = (1.0 + 0.5 * (-nf * nf * 0.5).exp()) / (nf * nf);
            let exact = 2.0 * w * mean / nf + w * w * cross;
            // the hat's kinks cost a few 1e-6 of midpoint quadrature
            assert!(
                (row.gap - exact).abs() < 2e-5,
                "{} n={n}: {} vs {exact}",
                probe.label,
                row.gap
            );
            assert!(row.within_budget && row.bounded);
            assert!(
                row.budget
                    <= probe.functions[0].lipschitz()
                        * 2.0
                        * (probe.functions[0].sup() + w * PI)
                        * PI
                        / nf
                        + 2e-6
            );
        }
    }
    assert!(
        report
            .trends
            .iter()
            .all(|(_, t)| *t == Trend::StrictlyDecreasing),
        "{:?}",
        report.trends
    );
}

#[test]
fn pulled_back_functions_do_not_see_the_fibre() {
    let family = SpaceFamily::torus(&[1, 3, 8]).unwrap();
    let probe = FddProbe::repeated(LipschitzTestFunction::cosine(1.0, 0.0), 1);
    let report = fdd_convergence_report(
        &family,
        &[0.5],
        &[probe],
        StartMode::Point,
        &GridSettings::default(),
    )
    .unwrap();
    for row in &report.rows {
        assert!((row.value - (-0.5f64).exp()).abs() < 1e-12);
        assert!(row.gap < 1e-12);
    }
    let ones = FddProbe::repeated(LipschitzTestFunction::constant(1.0), 1);
    let report = fdd_convergence_report(
        &family,
        &[0.5],
        &[ones],
        StartMode::Point,
        &GridSettings::default(),
    )
    .unwrap();
    assert!(report.rows.iter().all(|r| r.gap < 1e-12));
}

fn expected_capped_abs(sd: f64) -> f64 {
    // E min(|X|, 1) for X ~ N(0, sd²)
    2.0 * sd / (2.0 * PI).sqrt() * (1.0 - (-0.5 / (sd * sd)).exp())
        + 2.0 * (1.0 - normal_cdf(1.0 / sd))
}

#[test]
fn ou_fdd_gaps_follow_the_gaussian_formula() {
    let ns = [1, 2, 4, 8];
    let family = SpaceFamily::ou(&ns).unwrap();
    let f = LipschitzTestFunction::distance_cap(family.limit(), vec![0.0], 1.0);
    let t = 0.5;
    let report = fdd_convergence_report(
        &family,
        &[t],
        &[FddProbe::repeated(f, 1)],
        StartMode::Point,
        &GridSettings {
            resolution: 2048,
            ..GridSettings::default()
        },
    )
    .unwrap();
    let sd = |alpha: f64| ((1.0 - (-2.0 * alpha * t).exp()) / alpha).sqrt();
    let limit = expected_capped_abs(sd(1.0));
    let mut gaps = Vec::new();
    for (row, &n) in report.rows.iter().zip(&ns) {
        let exact = expected_capped_abs(sd(1.0 + 1.0 / n as f64));
        assert!(
            (row.value - exact).abs() < 1e-4,
            "n={n}: {} vs {exact}",
            row.value
        );
        assert!((row.limit_value - limit).abs() < 1e-4);
        gaps.push(row.gap);
    }
    for w in gaps.windows(2) {
        assert!((1.6..=2.4).contains(&(w[0] / w[1])), "{gaps:?}");
    }
    assert_eq!(report.trends[0].1, Trend::StrictlyDecreasing);
}

#[test]
fn pmg_integrals_on_the_torus_family() {
    let ns = [1, 2, 4, 8];
    let family = SpaceFamily::torus(&ns).unwrap();
    let functions = vec![
        LipschitzTestFunction::constant(2.0),
        LipschitzTestFunction::cosine(1.0, 0.3),
        LipschitzTestFunction::constant(0.0).with_fiber_weight(1.0),
    ];
    let report = pmg_test(&family, &functions, &GridSettings::default()).unwrap();
    assert!((report.limit_mass - 1.0).abs() < 1e-12);
    for &(_, m) in &report.masses {
        assert!((m - 1.0).abs() < 1e-12);
    }
    assert!(report.base_distances.iter().all(|&(_, d)| d == 0.0));
    for row in &report.rows {
        let expected = if row.function.starts_with("0*") || row.function == functions[2].label() {
            1.0 / row.n as f64
        } else {
            0.0
        };
        assert!((row.gap - expected).abs() < 1e-12, "{row:?}");
        assert!(row.within_budget);
    }
}

#[test]
fn pmg_function_supported_off_the_image() {
    let family = SpaceFamily::reflected(&[2]).unwrap();
    let f = LipschitzTestFunction::hat(family.limit(), vec![0.9], 0.1, 1.0);
    let report = pmg_test(&family, &[f], &GridSettings::default()).unwrap();
    assert_eq!(report.rows[0].integral, 0.0);
    assert_eq!(report.trends[0].1, Trend::InsufficientPoints);
}

#[test]
fn initial_law_w1_oracles() {
    let torus = SpaceFamily::torus(&[1, 4, 16]).unwrap();
    for row in initial_law_w1(&torus, 1.0, &GridSettings::default()).unwrap() {
        assert!(row.w1 <= PI / row.n as f64 + 1e-9, "{row:?}");
    }
    let ou = SpaceFamily::ou(&[1, 2, 4, 8]).unwrap();
    for row in initial_law_w1(
        &ou,
        1.0,
        &GridSettings {
            resolution: 2048,
            ..GridSettings::default()
        },
    )
    .unwrap()
    {
        // centred Gaussians: W₁ = |σ_n − σ_∞| E|Z|
        let sigma = (1.0 + 1.0 / row.n as f64).powf(-0.5);
        let exact = (1.0 - sigma) * (2.0 / PI).sqrt();
        assert!((row.w1 - exact).abs() < 1e-4, "{row:?} vs {exact}");
    }
    let same = SpaceFamily::new(
        "identity",
        torus.limit().clone(),
        vec![FamilyMember {
            n: 1,
            map: CollapseMap::identity(torus.limit().clone()),
        }],
    )
    .unwrap();
    assert_eq!(
        initial_law_w1(&same, 1.0, &GridSettings::default()).unwrap()[0].w1,
        0.0
    );
}

#[test]
fn kr_inequality_on_discretized_initial_laws() {
    let family = SpaceFamily::ou(&[1, 3]).unwrap();
    let rows = initial_law_w1(&family, 1.0, &GridSettings::default()).unwrap();
    let grid = |alpha: f64| {
        let sd = alpha.powf(-0.5);
        let atoms: Vec<Vec<f64>> = (0..400)
            .map(|i| vec![-6.0 + 12.0 * (i as f64 + 0.5) / 400.0])
            .collect();
        let w: Vec<f64> = atoms
            .iter()
            .map(|x| (-0.5 * (x[0] / sd).powi(2)).exp())
            .collect();
        DiscreteMeasure::normalized(1, atoms, w).unwrap()
    };
    let limit = grid(1.0);
    for (row, alpha) in rows.iter().zip([2.0, 4.0 / 3.0]) {
        let mu = grid(alpha);
        let w1 = wasserstein_1d(1.0, &mu, &limit).unwrap();
        for f in [
            LipschitzTestFunction::distance_cap(family.limit(), vec![0.0], 1.0),
            LipschitzTestFunction::clamp(-0.5, 2.0),
        ] {
            let gap = (mu.integrate(|x| f.eval(x)) - limit.integrate(|x| f.eval(x))).abs();
            assert!(gap <= f.lipschitz() * w1 + 1e-12);
        }
        assert!((w1 - row.w1).abs() < 2e-3);
    }
}

#[test]
fn entropy_tightness_over_the_torus_family() {
    let family = SpaceFamily::torus(&[1, 2, 4, 8]).unwrap();
    let report = entropy_tightness(&family, 0.1, 1.0, 1.5, &GridSettings::default()).unwrap();
    assert!(report.bounded, "{report:?}");
    // fibre kernels equilibrate as n grows, so the entropy tends to the circle's
    let last = report.rows.last().unwrap().entropy;
    assert!((last - report.limit_entropy).abs() < 1e-3);
    assert!(report
        .rows
        .iter()
        .all(|r| r.entropy >= report.limit_entropy - 1e-9));
    let late = entropy_tightness(
        &SpaceFamily::torus(&[2]).unwrap(),
        20.0,
        1.0,
        0.5,
        &GridSettings::default(),
    )
    .unwrap();
    assert!(late.rows[0].entropy.abs() < 1e-9 && late.limit_entropy.abs() < 1e-9);
    assert!(entropy_tightness(&family, 0.0, 1.0, 0.5, &GridSettings::default()).is_err());
}

#[test]
fn pathlaw_self_distance_and_fibre_budget() {
    let times = [0.25, 0.75];
    let settings = PathLawSettings {
        bins: 32,
        bootstrap: 10,
        seed: 5,
    };
    let map = collapse(8);
    let circle = SpectralKernel::new(map.target()).unwrap();
    let torus = SpectralKernel::new(map.source()).unwrap();
    let limit_a =
        sample_kernel_chain(&circle, &InitialLaw::Point(vec![0.0]), &times, 2000, 1).unwrap();
    let limit_b =
        sample_kernel_chain(&circle, &InitialLaw::Point(vec![0.0]), &times, 2000, 2).unwrap();
    let member =
        sample_kernel_chain(&torus, &InitialLaw::Point(vec![0.0, 0.0]), &times, 2000, 3).unwrap();
    let identity = CollapseMap::identity(map.target().clone());

    let zero = pathlaw_w1(&limit_a, &limit_a, &times, &identity, &settings).unwrap();
    assert_eq!(zero.value, 0.0);
    let baseline = pathlaw_w1(&limit_b, &limit_a, &times, &identity, &settings).unwrap();
    let value = pathlaw_w1(&member, &limit_a, &times, &map, &settings).unwrap();
    assert!((value.fiber_budget - 2.0 * PI / 8.0).abs() < 1e-15);
    assert!((value.binning_slack - 2.0 * 2.0 * PI / 32.0).abs() < 1e-12);
    let allowance = value.fiber_budget
        + value.binning_slack
        + baseline.binning_slack
        + 3.0 * value.standard_error;
    assert!(
        value.value <= baseline.value + allowance,
        "{value:?} vs {baseline:?}"
    );
    assert!(value.standard_error > 0.0);

    let other = sample_kernel_chain(
        &circle,
        &InitialLaw::Point(vec![0.0]),
        &[0.25, 0.5, 0.75],
        50,
        4,
    )
    .unwrap();
    assert!(matches!(
        pathlaw_w1(&other, &limit_a, &times, &identity, &settings),
        Err(mmlab::Error::GridMismatch)
    ));
}

fn collapse(n: usize) -> CollapseMap {
    SpaceFamily::torus(&[n]).unwrap().members()[0].map.clone()
}

#[test]
fn test_functions_verify_their_constants() {
    let circle = SpaceFamily::torus(&[1]).unwrap().limit().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for f in [
        LipschitzTestFunction::cosine(2.0, 0.1),
        LipschitzTestFunction::hat(&circle, vec![1.0], 0.5, 2.0),
        LipschitzTestFunction::distance_cap(&circle, vec![0.0], 1.5),
        LipschitzTestFunction::cosine(1.0, 0.0).scaled(-3.0, 0.5),
    ] {
        let worst = f.verify(&circle, 2000, &mut rng).unwrap();
        assert!(worst <= f.lipschitz() + 1e-6);
    }
    let liar = LipschitzTestFunction::new("liar", 0.5, 1.0, false, |x: &[f64]| x[0].sin());
    assert!(matches!(
        liar.verify(&circle, 2000, &mut rng),
        Err(mmlab::Error::NotLipschitz { .. })
    ));
}

#[test]
fn trend_classification() {
    assert_eq!(trend(&[0.3], &[0.0]), Trend::InsufficientPoints);
    assert_eq!(
        trend(&[0.3, 0.2, 0.1], &[0.0; 3]),
        Trend::StrictlyDecreasing
    );
    assert_eq!(
        trend(&[0.3, 0.31, 0.1], &[0.0, 0.02, 0.0]),
        Trend::DecreasingWithinBudget
    );
    assert_eq!(trend(&[0.3, 0.4], &[0.0, 0.01]), Trend::NotDecreasing);
}

#[test]
fn mcshane_random_domains() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let m = rng.random_range(1..12);
        let h = rng.random_range(0.1..3.0);
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        // values of an H-Lipschitz function restricted to the points
        let (c, phase) = (rng.random_range(-1.0..1.0), rng.random_range(0.0..6.0));
        let g = |x: &[f64]| {
            c + h * (0.5 * ((x[0] + phase).sin() + x[1].cos()) / 2f64.sqrt()).clamp(-1.0, 1.0)
        };
        let values: Vec<f64> = points.iter().map(|p| g(p)).collect();
        let euclid = |a: &[f64], b: &[f64]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let ext = mcshane_extend(points.clone(), values.clone(), h, euclid).unwrap();
        for (p, v) in points.iter().zip(&values) {
            assert_eq!(ext.eval(p), *v);
        }
        let (lo, hi) = ext.bounds();
        for _ in 0..1000 {
            let x = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let y = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let (fx, fy) = (ext.eval(&x), ext.eval(&y));
            assert!((fx - fy).abs() <= (h + 1e-9) * euclid(&x, &y));
            assert!(fx >= lo && fx <= hi);
        }
    }
}

proptest! {
    #[test]
    fn mcshane_is_lipschitz_and_bounded(
        pts in prop::collection::vec(-5.0f64..5.0, 1..8),
        seeds in prop::collection::vec(-1.0f64..1.0, 8),
        h in 0.1f64..2.0,
        probes in prop::collection::vec(-10.0f64..10.0, 20),
    ) {
        let points: Vec<Vec<f64>> = pts.iter().map(|&x| vec![x]).collect();
        // |s| < 1, so h·sin(s x) + c is h-Lipschitz
        let values: Vec<f64> = pts.iter().map(|x| h * (seeds[0] * x).sin() + seeds[1]).collect();
        let line = |a: &[f64], b: &[f64]| (a[0] - b[0]).abs();
        let ext = mcshane_extend(points.clone(), values.clone(), h, line).unwrap();
        let (lo, hi) = ext.bounds();
        for w in probes.windows(2) {
            let (fx, fy) = (ext.eval(&[w[0]]), ext.eval(&[w[1]]));
            prop_assert!((fx - fy).abs() <= (h + 1e-9) * (w[0] - w[1]).abs());
            prop_assert!(fx >= lo && fx <= hi);
        }
        for (p, v) in points.iter().zip(&values) {
            prop_assert_eq!(ext.eval(p), *v);
        }
    }

    #[test]
    fn fdd_operator_respects_the_sup_bound(
        amps in prop::collection::vec(-2.0f64..2.0, 3),
        freqs in prop::collection::vec(1u32..4, 3),
        x in 0.0f64..std::f64::consts::TAU,
    ) {
        let circle = PmmSpace::circle(2.0 * PI).unwrap();
        let fs: Vec<RealFn> = amps
            .iter()
            .zip(&freqs)
            .map(|(&a, &k)| Box::new(move |y: &[f64]| a * (k as f64 * y[0]).cos()) as RealFn)
            .collect();
        let refs: Vec<_> = fs.iter().map(|f| f.as_ref()).collect();
        let v = fdd_operator(&circle, &[0.1, 0.3, 0.6], &refs, &[x]).unwrap();
        let bound: f64 = amps.iter().map(|a| a.abs()).product();
        prop_assert!(v.abs() <= bound + 1e-9);
    }
}

#[test]
fn pathlaw_on_a_finite_space_is_exact() {
    let (a, b) = (0.8, 1.3);
    let space = PmmSpace::finite(FiniteMms::two_state(a, b).unwrap()).unwrap();
    let kernel = SpectralKernel::new(&space).unwrap();
    let times = [0.5, 1.0];
    let x = sample_kernel_chain(&kernel, &InitialLaw::Point(vec![0.0]), &times, 3000, 1).unwrap();
    let y = sample_kernel_chain(&kernel, &InitialLaw::Point(vec![0.0]), &times, 2000, 2).unwrap();
    let identity = CollapseMap::identity(space.clone());
    let settings = PathLawSettings {
        bins: 8,
        bootstrap: 5,
        seed: 1,
    };
    let single = pathlaw_w1(&x, &y, &[1.0], &identity, &settings).unwrap();
    let share = |e: &mmlab::paths::PathEnsemble| {
        let k = e.time_index(1.0).unwrap();
        (0..e.len()).filter(|&p| e.state(p, k)[0] == 1.0).count() as f64 / e.len() as f64
    };
    let d = space.distance(&[0.0], &[1.0]);
    assert!((single.value - d * (share(&x) - share(&y)).abs()).abs() < 1e-12);
    assert_eq!(single.binning_slack, 0.0);
    let joint = pathlaw_w1(&x, &y, &times, &identity, &settings).unwrap();
    assert!(joint.value >= single.value - 1e-12 && joint.value < 0.1);
    assert_eq!(
        pathlaw_w1(&x, &x, &times, &identity, &settings)
            .unwrap()
            .value,
        0.0
    );
}
