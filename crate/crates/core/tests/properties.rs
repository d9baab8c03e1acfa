use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use replicator_sphere::graph::{gnp, maximal_clique_vectors, payoff_from_graph, Graph};
use replicator_sphere::metastability::{
    estimate_separatrix_max, exit_time_runs, theoretical_exit_rate, ExitConfig, FlowParams,
};
use replicator_sphere::potential::{potential, projected_gradient, sphere_potential, PayoffMatrix, SpherePoint};
use replicator_sphere::sde::{step, to_simplex};
use replicator_sphere::stationary::{circle_gibbs_density, gibbs_log_density_sphere, ExponentScale};

fn unit_vector(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r > 1e-2 {
            return v.into_iter().map(|a| a / r).collect();
        }
    }
}

fn random_graph(seed: u64, n: usize, p: f64) -> Graph {
    gnp(n, p, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steps_stay_on_sphere_and_simplex(
        seed in any::<u64>(),
        n in 2usize..30,
        eps in 0.0f64..0.5,
        dt in 1e-4f64..0.1,
    ) {
        let g = random_graph(seed, n, 0.4);
        let m = payoff_from_graph(&g).unwrap();
        let mut y = SpherePoint::new(unit_vector(seed, n)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..20 {
            let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            y = step(&y, &m, dt, eps, &noise).unwrap();
            let r = y.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((r - 1.0).abs() <= 1e-12);
            let x = to_simplex(&y);
            prop_assert!(x.coords().iter().all(|&v| v >= 0.0));
            prop_assert!((x.coords().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn graph_payoff_is_symmetric_with_half_diagonal(seed in any::<u64>(), n in 2usize..25, p in 0.0f64..=1.0) {
        let m = payoff_from_graph(&random_graph(seed, n, p)).unwrap();
        for i in 0..n {
            prop_assert_eq!(m.get(i, i), 0.5);
            for j in 0..n {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn sphere_potential_composes_with_squaring(seed in any::<u64>(), n in 2usize..20) {
        let m = payoff_from_graph(&random_graph(seed, n, 0.5)).unwrap();
        let y = SpherePoint::new(unit_vector(seed, n)).unwrap();
        prop_assert_eq!(sphere_potential(&m, &y).unwrap(), potential(&m, &to_simplex(&y)).unwrap());
    }

    #[test]
    fn gibbs_density_is_even_in_each_coordinate(seed in any::<u64>(), n in 2usize..12, flips in any::<u16>(), eps in 0.05f64..1.0) {
        let m = payoff_from_graph(&random_graph(seed, n, 0.5)).unwrap();
        let y = unit_vector(seed, n);
        let flipped: Vec<f64> = y.iter().enumerate().map(|(i, v)| if flips >> (i % 16) & 1 == 1 { -v } else { *v }).collect();
        for scale in ExponentScale::ALL {
            let a = gibbs_log_density_sphere(&m, eps, &SpherePoint::new(y.clone()).unwrap(), scale).unwrap();
            let b = gibbs_log_density_sphere(&m, eps, &SpherePoint::new(flipped.clone()).unwrap(), scale).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn circle_densities_are_normalized(d0 in 0.1f64..2.0, d1 in 0.1f64..2.0, off in -1.0f64..1.0, eps in 0.1f64..1.0, k in 6u32..11) {
        let m = PayoffMatrix::from_rows(&[[d0, off], [off, d1]]).unwrap();
        for scale in ExponentScale::ALL {
            let d = circle_gibbs_density(&m, eps, 1 << k, scale).unwrap();
            prop_assert!(d.normalized);
            prop_assert!((d.integral() - 1.0).abs() < 1e-8);
        }
    }
}

/// Every maximal-clique lift is a critical point of F̃ on the sphere, and
/// F̃ drops under small tangent perturbations, on random graphs with n ≤ 20.
#[test]
fn clique_lifts_are_local_maxima() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..30u64 {
        let n = 4 + (trial as usize % 17);
        let g = random_graph(trial, n, 0.45);
        let m = payoff_from_graph(&g).unwrap();
        for c in maximal_clique_vectors(&g, 100_000).unwrap() {
            let y: Vec<f64> = c.point.coords().iter().map(|v| v.sqrt()).collect();
            let ys = SpherePoint::new(y.clone()).unwrap();
            let grad = projected_gradient(&m, &ys).unwrap();
            assert!(grad.iter().all(|v| v.abs() < 1e-12), "clique {} is not critical", c.label());
            let f0 = sphere_potential(&m, &ys).unwrap();
            for _ in 0..20 {
                let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let moved: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + 1e-3 * d).collect();
                let f = sphere_potential(&m, &SpherePoint::normalize(moved).unwrap()).unwrap();
                assert!(f < f0 + 1e-15, "clique {} on n = {n}: {f} > {f0}", c.label());
            }
        }
    }
}

#[test]
fn separatrix_reproduces_two_edge_rate() {
    let g = Graph::path(3).unwrap();
    let m = payoff_from_graph(&g).unwrap();
    let cliques = maximal_clique_vectors(&g, 10).unwrap();
    let est = estimate_separatrix_max(&m, &cliques, 200, FlowParams::default()).unwrap().unwrap();
    let f_star = potential(&m, &cliques[0].point).unwrap();
    let rate = theoretical_exit_rate(f_star, est.value).unwrap();
    assert!((rate - 0.0125).abs() < 1e-3, "{rate}");
}

/// Split-half comparison: the two halves of a run set have means within
/// three combined standard errors.
#[test]
fn exit_samples_are_exchangeable() {
    let g = Graph::path(3).unwrap();
    let m = payoff_from_graph(&g).unwrap();
    let cliques = maximal_clique_vectors(&g, 10).unwrap();
    let cfg = ExitConfig { eps: 0.12, seed: 4242, ..ExitConfig::default() };
    let samples = exit_time_runs(&m, &cliques[0], &cliques, &cfg, 400).unwrap();
    assert!(samples.iter().all(|s| !s.censored));
    let stats = |it: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = it.collect();
        let k = v.len() as f64;
        let mean = v.iter().sum::<f64>() / k;
        let var = v.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (mean, var / k)
    };
    for (a, b) in [
        (stats(&mut samples[..200].iter().map(|s| s.tau)), stats(&mut samples[200..].iter().map(|s| s.tau))),
        (
            stats(&mut samples.iter().filter(|s| s.run % 2 == 0).map(|s| s.tau)),
            stats(&mut samples.iter().filter(|s| s.run % 2 == 1).map(|s| s.tau)),
        ),
    ] {
        let z = (a.0 - b.0).abs() / (a.1 + b.1).sqrt();
        assert!(z < 3.0, "halves differ: {} vs {} (z = {z})", a.0, b.0);
    }
}
