use std::f64::consts::{E, PI};

use mmlab::spaces::Potential;
use mmlab::transport::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn abs(x: &[f64], y: &[f64]) -> f64 {
    (x[0] - y[0]).abs()
}

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn random_measure(rng: &mut ChaCha8Rng, atoms: usize, dim: usize) -> DiscreteMeasure {
    let points: Vec<Vec<f64>> = (0..atoms)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let weights: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.05..1.0)).collect();
    DiscreteMeasure::normalized(dim, points, weights).unwrap()
}

/// Minimum of `Σ q_ij c_ij` over the vertices of the transportation
/// polytope, enumerated as all basic solutions on `m + n − 1` cells.
fn brute_force_transport(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let total = cells.len();
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        if let Some(value) = basic_solution(
            a,
            b,
            cost,
            &chosen.iter().map(|&c| cells[c]).collect::<Vec<_>>(),
        ) {
            best = best.min(value);
        }
        // next k-combination
        let mut pos = k;
        while pos > 0 && chosen[pos - 1] == total - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        chosen[pos - 1] += 1;
        for q in pos..k {
            chosen[q] = chosen[q - 1] + 1;
        }
    }
    best
}

/// Solves the marginal equations on a candidate basis by peeling rows and
/// columns with a single unknown; `None` if the basis is singular or the
/// solution is negative.
fn basic_solution(
    a: &[f64],
    b: &[f64],
    cost: &[Vec<f64>],
    basis: &[(usize, usize)],
) -> Option<f64> {
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let mut open: Vec<bool> = vec![true; basis.len()];
    let mut value = 0.0;
    for _ in 0..basis.len() {
        let mut progressed = false;
        for (idx, &(i, j)) in basis.iter().enumerate() {
            if !open[idx] {
                continue;
            }
            let row_unknowns = basis
                .iter()
                .enumerate()
                .filter(|(q, c)| open[*q] && c.0 == i)
                .count();
            let col_unknowns = basis
                .iter()
                .enumerate()
                .filter(|(q, c)| open[*q] && c.1 == j)
                .count();
            let x = if row_unknowns == 1 {
                ra[i]
            } else if col_unknowns == 1 {
                rb[j]
            } else {
                continue;
            };
            if x < -1e-12 {
                return None;
            }
            ra[i] -= x;
            rb[j] -= x;
            value += x * cost[i][j];
            open[idx] = false;
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
    if open.iter().any(|&o| o) || ra.iter().chain(&rb).any(|r| r.abs() > 1e-12) {
        return None;
    }
    Some(value)
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..60 {
        let m = 2 + trial % 3;
        let n = 2 + (trial / 3) % 3;
        let mu = random_measure(&mut rng, m, 2);
        let nu = random_measure(&mut rng, n, 2);
        for p in [1.0, 2.0] {
            let cost: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    (0..n)
                        .map(|j| euclid(mu.atom(i), nu.atom(j)).powf(p))
                        .collect()
                })
                .collect();
            let oracle = brute_force_transport(mu.weights(), nu.weights(), &cost).powf(1.0 / p);
            let (w, plan) = wasserstein_exact(p, &mu, &nu, euclid).unwrap();
            assert!(
                (w - oracle).abs() < 1e-9,
                "trial {trial} p {p}: {w} vs {oracle}"
            );
            assert!(plan.marginal_error(&mu, &nu) < 1e-9);
            assert!(plan.dual_violation > -1e-9);
            assert!(plan.duality_gap.abs() < 1e-9);
        }
    }
}

#[test]
fn quantile_formula_matches_lp_on_50_atoms() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let mu = random_measure(&mut rng, 50, 1);
        let nu = random_measure(&mut rng, 50, 1);
        for p in [1.0, 2.0] {
            let lp = wasserstein_exact(p, &mu, &nu, abs).unwrap().0;
            let q = wasserstein_1d(p, &mu, &nu).unwrap();
            assert!((lp - q).abs() < 1e-9, "{lp} vs {q}");
        }
    }
}

#[test]
fn translation_costs_the_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mu = random_measure(&mut rng, 20, 1);
    let nu = mu.push_forward(1, |x| vec![x[0] - 0.7]).unwrap();
    for p in [1.0, 2.0] {
        assert!((wasserstein_1d(p, &mu, &nu).unwrap() - 0.7).abs() < 1e-12);
    }
}

#[test]
fn circle_lifting_matches_geodesic_lp() {
    let l = 2.0 * PI;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..20 {
        let m = 1 + trial % 9;
        let n = 1 + (trial * 7) % 11;
        let pts = |rng: &mut ChaCha8Rng, k| {
            (0..k)
                .map(|_| vec![rng.random_range(0.0..l)])
                .collect::<Vec<_>>()
        };
        let wts = |rng: &mut ChaCha8Rng, k| {
            (0..k)
                .map(|_| rng.random_range(0.1..1.0))
                .collect::<Vec<f64>>()
        };
        let mu = DiscreteMeasure::normalized(1, pts(&mut rng, m), wts(&mut rng, m)).unwrap();
        let nu = DiscreteMeasure::normalized(1, pts(&mut rng, n), wts(&mut rng, n)).unwrap();
        for p in [1.0, 2.0] {
            let geodesic = |x: &[f64], y: &[f64]| {
                let d = (x[0] - y[0]).rem_euclid(l);
                d.min(l - d)
            };
            let lp = wasserstein_exact(p, &mu, &nu, geodesic).unwrap().0;
            let lift = wasserstein_circle(p, &mu, &nu, l).unwrap();
            assert!(
                (lp - lift).abs() < 1e-9,
                "trial {trial} p {p}: {lp} vs {lift}"
            );
        }
    }
}

#[test]
fn circle_w1_closed_form_on_large_supports() {
    let l = 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..3 {
        let pts = |rng: &mut ChaCha8Rng| {
            (0..150)
                .map(|_| vec![rng.random_range(0.0..l)])
                .collect::<Vec<_>>()
        };
        let mu = DiscreteMeasure::uniform(1, pts(&mut rng)).unwrap();
        let nu = DiscreteMeasure::uniform(1, pts(&mut rng)).unwrap();
        let geodesic = |x: &[f64], y: &[f64]| {
            let d = (x[0] - y[0]).rem_euclid(l);
            d.min(l - d)
        };
        let lp = wasserstein_exact(1.0, &mu, &nu, geodesic).unwrap().0;
        let closed = wasserstein_circle(1.0, &mu, &nu, l).unwrap();
        assert!((lp - closed).abs() < 1e-9, "{lp} vs {closed}");
    }
}

fn sorted_atoms(mu: &DiscreteMeasure) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = mu
        .atoms()
        .map(|x| x[0])
        .zip(mu.weights().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

#[test]
fn interpolation_is_a_constant_speed_geodesic() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mu0 = random_measure(&mut rng, 7, 1);
    let mu1 = random_measure(&mut rng, 5, 1);
    let total = wasserstein_exact(2.0, &mu0, &mu1, abs).unwrap().0;
    let at_zero = displacement_interpolation_1d(&mu0, &mu1, 0.0).unwrap();
    for (x, y) in sorted_atoms(&at_zero).iter().zip(sorted_atoms(&mu0)) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() < 1e-14);
    }
    assert_eq!(at_zero.len(), mu0.len());
    let at_one = displacement_interpolation_1d(&mu0, &mu1, 1.0).unwrap();
    assert!(wasserstein_1d(2.0, &at_one, &mu1).unwrap() < 1e-12);
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for &s in &grid {
        for &t in &grid {
            let ms = displacement_interpolation_1d(&mu0, &mu1, s).unwrap();
            let mt = displacement_interpolation_1d(&mu0, &mu1, t).unwrap();
            let w = wasserstein_exact(2.0, &ms, &mt, abs).unwrap().0;
            assert!((w - (t - s).abs() * total).abs() < 1e-8, "s {s} t {t}: {w}");
        }
    }
}

#[test]
fn gaussian_midpoint_averages_quantiles() {
    let n = 200;
    let quantiles = |m: f64, s: f64| -> DiscreteMeasure {
        let pts = (0..n)
            .map(|k| vec![m + s * mmlab::numeric::normal_quantile((k as f64 + 0.5) / n as f64)])
            .collect();
        DiscreteMeasure::uniform(1, pts).unwrap()
    };
    let mid =
        displacement_interpolation_1d(&quantiles(-1.0, 0.5), &quantiles(3.0, 2.0), 0.5).unwrap();
    let expected = quantiles(1.0, 1.25);
    let w = wasserstein_1d(2.0, &mid, &expected).unwrap();
    assert!(w < 1e-12, "{w}");
}

#[test]
fn dual_bound_never_exceeds_primal() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..30 {
        let mu = random_measure(&mut rng, 8, 1);
        let nu = random_measure(&mut rng, 6, 1);
        let knots: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let family = hat_ramp_family(&knots, rng.random_range(0.1..1.5));
        let dual = kr_dual_bound(&mu, &nu, &family).unwrap();
        let primal = wasserstein_exact(1.0, &mu, &nu, abs).unwrap().0;
        assert!(dual <= primal + 1e-9, "{dual} > {primal}");
    }
    let mu = random_measure(&mut rng, 5, 2);
    let nu = random_measure(&mut rng, 5, 2);
    let probes: Vec<Vec<f64>> = (0..4)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let dual = kr_dual_bound(&mu, &nu, &distance_family(euclid, &probes, &[0.5, 1.0])).unwrap();
    assert!(dual <= wasserstein_exact(1.0, &mu, &nu, euclid).unwrap().0 + 1e-9);
}

#[test]
fn grid_w1_equals_lp_between_bin_centres() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let shape = [5usize, 4];
    let spacing = [0.3, 0.7];
    for periodic in [[false, false], [true, true]] {
        let a: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let a: Vec<f64> = a.iter().map(|x| x / sa).collect();
        let b: Vec<f64> = b.iter().map(|x| x / sb).collect();
        let centres: Vec<Vec<f64>> = (0..20)
            .map(|k| vec![(k / 4) as f64, (k % 4) as f64])
            .collect();
        let metric = move |x: &[f64], y: &[f64]| {
            (0..2)
                .map(|ax| {
                    let d = (x[ax] - y[ax]).abs();
                    let d = if periodic[ax] {
                        d.min(shape[ax] as f64 - d)
                    } else {
                        d
                    };
                    d * spacing[ax]
                })
                .sum::<f64>()
        };
        let mu = DiscreteMeasure::normalized(2, centres.clone(), a).unwrap();
        let nu = DiscreteMeasure::normalized(2, centres, b).unwrap();
        let lp = wasserstein_exact(1.0, &mu, &nu, metric).unwrap().0;
        let grid = grid_w1(mu.weights(), nu.weights(), &shape, &spacing, &periodic).unwrap();
        assert!((lp - grid).abs() < 1e-9, "{lp} vs {grid}");
    }
}

#[test]
fn large_grid_problem_solves() {
    let n = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
    let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let a: Vec<f64> = a.iter().map(|x| x / sa).collect();
    let b: Vec<f64> = b.iter().map(|x| x / sb).collect();
    let h = 2.0 * PI / n as f64;
    let w = grid_w1(&a, &b, &[n, n], &[h, h], &[true, true]).unwrap();
    assert!(w > 0.0 && w < 2.0 * PI);
    // each coordinate's 1-D marginal problem is a lower bound
    let marginal = |v: &[f64]| {
        (0..n)
            .map(|i| (0..n).map(|j| v[i * n + j]).sum())
            .collect::<Vec<f64>>()
    };
    let w_first = grid_w1(&marginal(&a), &marginal(&b), &[n], &[h], &[true]).unwrap();
    assert!(w_first <= w + 1e-12);
}

fn gaussian_entropy_lebesgue(s: f64) -> f64 {
    -0.5 * (2.0 * PI * E * s * s).ln()
}

#[test]
fn lebesgue_convexity_between_gaussians() {
    let (m0, s0, m1, s1) = (-1.0, 0.5, 2.0, 1.5);
    let mu0 = CellMeasure::gaussian(m0, s0, 400).unwrap();
    let mu1 = CellMeasure::gaussian(m1, s1, 400).unwrap();
    let exact = |t: f64| gaussian_entropy_lebesgue((1.0 - t) * s0 + t * s1);
    let times: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let report =
        entropy_convexity_check(&Potential::Zero, &mu0, &mu1, 0.0, &times, Some(&exact)).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(report.margin < 1e-3, "{}", report.margin);
    let w2 = (m1 - m0).powi(2) + (s1 - s0).powi(2);
    assert!((report.w2_squared - w2).abs() < 5e-3 * w2);
}

#[test]
fn gaussian_reference_gives_the_stronger_inequality() {
    let (m0, s0, m1, s1) = (-1.0, 0.5, 2.0, 1.5);
    let mu0 = CellMeasure::gaussian(m0, s0, 400).unwrap();
    let mu1 = CellMeasure::gaussian(m1, s1, 400).unwrap();
    // m = e^{-x²/2} dx: Ent_m(N(a, s²)) = Ent_Leb + (a² + s²)/2
    let exact = |t: f64| {
        let (a, s) = ((1.0 - t) * m0 + t * m1, (1.0 - t) * s0 + t * s1);
        gaussian_entropy_lebesgue(s) + 0.5 * (a * a + s * s)
    };
    let times: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let report = entropy_convexity_check(
        &Potential::quadratic(1.0),
        &mu0,
        &mu1,
        1.0,
        &times,
        Some(&exact),
    )
    .unwrap();
    assert!(report.pass, "{report:?}");
    // with K = 2 the inequality must fail somewhere in the interior
    let too_strong = entropy_convexity_check(
        &Potential::quadratic(1.0),
        &mu0,
        &mu1,
        2.0,
        &times,
        Some(&exact),
    )
    .unwrap();
    assert!(!too_strong.pass);
}

#[test]
fn equal_endpoints_give_equality() {
    let mu = CellMeasure::new(vec![0.0, 0.5, 2.0, 2.5], vec![0.2, 0.5, 0.3]).unwrap();
    let report = entropy_convexity_check(
        &Potential::quadratic(1.0),
        &mu,
        &mu,
        1.0,
        &[0.0, 0.3, 0.5, 1.0],
        None,
    )
    .unwrap();
    assert!(report.pass);
    assert!(report.max_excess.abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wasserstein_is_a_metric(seed in any::<u64>(), p in prop::sample::select(vec![1.0, 2.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_measure(&mut rng, 4, 2);
        let b = random_measure(&mut rng, 5, 2);
        let c = random_measure(&mut rng, 3, 2);
        let ab = wasserstein_exact(p, &a, &b, euclid).unwrap().0;
        let ba = wasserstein_exact(p, &b, &a, euclid).unwrap().0;
        let bc = wasserstein_exact(p, &b, &c, euclid).unwrap().0;
        let ac = wasserstein_exact(p, &a, &c, euclid).unwrap().0;
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!(ac <= ab + bc + 1e-8);
    }

    #[test]
    fn plans_have_the_right_marginals(seed in any::<u64>(), m in 1usize..12, n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_measure(&mut rng, m, 1);
        let nu = random_measure(&mut rng, n, 1);
        let (w, plan) = wasserstein_exact(2.0, &mu, &nu, abs).unwrap();
        prop_assert!(plan.marginal_error(&mu, &nu) < 1e-9);
        prop_assert!(plan.entries.iter().all(|e| e.2 >= 0.0));
        prop_assert!((w - wasserstein_1d(2.0, &mu, &nu).unwrap()).abs() < 1e-9);
    }
}
