mod common;

use common::*;
use metasub::diffcore::{self, Batch, LossKind, Targets};
use metasub::meta::{
    adapt, meta_gradient, train, AdamConfig, MetaMethod, MetaState, MethodKind, TrainConfig,
};
use metasub::numerics::{all_pairs_shortest_paths, sym_eig, DenseMatrix, SeededRng, WeightedGraph};
use metasub::reconstruct::{fit_amplitude_regressor, EmbeddedTaskSet, ProbeConfig, ProbeTargets, Split};
use metasub::subspace::{isomap, mean_abs_param_diff, pca, spectrum, AnalysisMethod, IsomapFit};
use metasub::taskgen::{PrototypeFamilySpec, SineFamilySpec, TaskFamily};
use proptest::prelude::*;

fn cases() -> ProptestConfig {
    ProptestConfig::with_cases(100)
}

fn cloud(m: usize, d: usize, rng: &mut SeededRng) -> DenseMatrix {
    // anisotropic so the spectrum has distinct values
    DenseMatrix::from_fn(m, d, |_, j| rng.normal(0.0, 1.0 + j as f64).unwrap())
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn eigen_reconstructs_and_preserves_trace(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = SeededRng::new(seed);
        let a = random_symmetric(n, &mut rng);
        let e = sym_eig(&a).unwrap();
        let vd = DenseMatrix::from_fn(n, n, |i, j| e.vectors.get(i, j) * e.values[j]);
        let back = vd.matmul(&e.vectors.transpose()).unwrap();
        prop_assert!(back.sub(&a).unwrap().frobenius_norm() <= 1e-7 * a.frobenius_norm().max(1e-300));
        prop_assert!((e.values.iter().sum::<f64>() - a.trace()).abs() < 1e-8);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn shortest_paths_match_floyd_warshall(seed in any::<u64>(), n in 2usize..16, p in 0.05f64..0.6) {
        let mut rng = SeededRng::new(seed);
        let (g, edges) = random_graph(n, p, &mut rng);
        let fw = floyd_warshall(n, &edges);
        let d = metasub::numerics::shortest_path_distances(&g);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (d.get(i, j), fw[i][j]);
                prop_assert!(a == b || (a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shortest_paths_are_permutation_equivariant(seed in any::<u64>(), n in 2usize..14) {
        let mut rng = SeededRng::new(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            edges.push((u, (u + 1) % n, rng.uniform(0.1, 3.0).unwrap()));
            edges.push((u, (rng.next_u64() % n as u64) as usize, rng.uniform(0.1, 3.0).unwrap()));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let mut g = WeightedGraph::new(n);
        let mut h = WeightedGraph::new(n);
        for &(u, v, w) in &edges {
            g.add_undirected_edge(u, v, w).unwrap();
            h.add_undirected_edge(perm[u], perm[v], w).unwrap();
        }
        let dg = all_pairs_shortest_paths(&g).unwrap();
        let dh = all_pairs_shortest_paths(&h).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((dg.get(i, j) - dh.get(perm[i], perm[j])).abs() < 1e-12);
                prop_assert!(dg.get(i, j) <= dg.get(i, (i + 1) % n) + dg.get((i + 1) % n, j) + 1e-12);
            }
        }
    }

    #[test]
    fn rng_is_deterministic(seed in any::<u64>()) {
        let mut a = SeededRng::new(seed);
        let mut b = SeededRng::new(seed);
        for _ in 0..20 {
            let x = a.uniform(-3.0, 7.0).unwrap();
            prop_assert_eq!(x, b.uniform(-3.0, 7.0).unwrap());
            prop_assert!((-3.0..7.0).contains(&x));
            prop_assert_eq!(a.normal(1.0, 2.0).unwrap(), b.normal(1.0, 2.0).unwrap());
        }
    }

    #[test]
    fn grad_is_mean_of_per_example_grads(seed in any::<u64>(), classify in any::<bool>()) {
        let mut rng = SeededRng::new(seed);
        let (kind, d_out) = if classify { (LossKind::SoftmaxCrossEntropy, 3) } else { (LossKind::Mse, 2) };
        let params = random_net(3, d_out, &mut rng);
        let batch = random_batch(kind, 6, 3, d_out, &mut rng);
        let full = diffcore::grad(&params, &batch, kind).unwrap();
        let mut mean = vec![0.0; params.len()];
        for i in 0..6 {
            let x = batch.inputs.select_rows(&[i]);
            let one = match &batch.targets {
                Targets::Values(y) => Batch::regression(x, y.select_rows(&[i])).unwrap(),
                Targets::Labels(l) => Batch::classification(x, vec![l[i]]).unwrap(),
            };
            for (m, g) in mean.iter_mut().zip(diffcore::grad(&params, &one, kind).unwrap()) {
                *m += g / 6.0;
            }
        }
        prop_assert!(rel_err(&full, &mean) < 1e-12);
    }

    #[test]
    fn hvp_is_linear_and_symmetric(seed in any::<u64>(), classify in any::<bool>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = SeededRng::new(seed);
        let (kind, d_out) = if classify { (LossKind::SoftmaxCrossEntropy, 3) } else { (LossKind::Mse, 1) };
        let params = random_net(2, d_out, &mut rng);
        let batch = random_batch(kind, 5, 2, d_out, &mut rng);
        let p = params.len();
        let u: Vec<f64> = (0..p).map(|_| rng.normal(0.0, 1.0).unwrap()).collect();
        let w: Vec<f64> = (0..p).map(|_| rng.normal(0.0, 1.0).unwrap()).collect();
        let hu = diffcore::hvp(&params, &batch, kind, &u).unwrap();
        let hw = diffcore::hvp(&params, &batch, kind, &w).unwrap();
        let mix: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let hmix = diffcore::hvp(&params, &batch, kind, &mix).unwrap();
        let expect: Vec<f64> = hu.iter().zip(&hw).map(|(x, y)| a * x + b * y).collect();
        let scale = expect.iter().chain(&hmix).fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in hmix.iter().zip(&expect) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
        let uhw: f64 = u.iter().zip(&hw).map(|(x, y)| x * y).sum();
        let whu: f64 = w.iter().zip(&hu).map(|(x, y)| x * y).sum();
        prop_assert!((uhw - whu).abs() <= 1e-8 * uhw.abs().max(whu.abs()).max(1.0));
    }

    #[test]
    fn meta_gradient_at_zero_alpha_is_mean_query_grad(seed in any::<u64>(), mc in any::<bool>(), classify in any::<bool>()) {
        let mut rng = SeededRng::new(seed);
        let (loss, d_out) = if classify { (LossKind::SoftmaxCrossEntropy, 3) } else { (LossKind::Mse, 1) };
        let kind = if mc { MethodKind::MetaCurvature } else { MethodKind::Maml };
        let state = MetaState::new(random_net(2, d_out, &mut rng), kind, AdamConfig::default());
        let tasks: Vec<_> = (0..3).map(|_| random_task(loss, 2, d_out, &mut rng)).collect();
        let g = meta_gradient(&state, &tasks, &MetaMethod { kind, inner_lr: 0.0 }).unwrap();
        let mut mean = vec![0.0; state.params.len()];
        for t in &tasks {
            for (m, q) in mean.iter_mut().zip(diffcore::grad(&state.params, &t.query, loss).unwrap()) {
                *m += q / 3.0;
            }
        }
        for (a, b) in g.d_theta.iter().zip(&mean) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn identity_curvature_reproduces_maml_bitwise(seed in any::<u64>(), alpha in 0.0f64..0.5) {
        let mut rng = SeededRng::new(seed);
        let params = random_net(2, 1, &mut rng);
        let tasks: Vec<_> = (0..4).map(|_| random_task(LossKind::Mse, 2, 1, &mut rng)).collect();
        let maml = MetaState::new(params.clone(), MethodKind::Maml, AdamConfig::default());
        let mc = MetaState::new(params, MethodKind::MetaCurvature, AdamConfig::default());
        let a = meta_gradient(&maml, &tasks, &MetaMethod::maml(alpha)).unwrap();
        let b = meta_gradient(&mc, &tasks, &MetaMethod::meta_curvature(alpha)).unwrap();
        prop_assert_eq!(a.d_theta, b.d_theta);
        prop_assert_eq!(
            adapt(&maml, &tasks[0], &MetaMethod::maml(alpha)).unwrap(),
            adapt(&mc, &tasks[0], &MetaMethod::meta_curvature(alpha)).unwrap()
        );
    }

    #[test]
    fn training_is_deterministic_under_seed(seed in any::<u64>(), mc in any::<bool>()) {
        let kind = if mc { MethodKind::MetaCurvature } else { MethodKind::Maml };
        let family = TaskFamily::Sine(SineFamilySpec::new(1));
        let cfg = TrainConfig {
            method: MetaMethod { kind, inner_lr: 0.01 },
            outer: AdamConfig::default(),
            curvature_lr: None,
            epochs: 1,
            batches_per_epoch: 2,
            meta_batch_size: 3,
        };
        let run = || {
            let mut rng = SeededRng::new(seed);
            let layers = metasub::diffcore::mlp_layers(1, &[5], 1);
            let state = MetaState::init(layers, kind, AdamConfig::default(), &mut rng).unwrap();
            let f = family.clone();
            train(&cfg, state, move |r| f.sample(r), &mut rng).unwrap()
        };
        let (a, ha) = run();
        let (b, hb) = run();
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.curvature, b.curvature);
        prop_assert_eq!(ha, hb);
    }

    #[test]
    fn task_sampling_is_reproducible_and_balanced(seed in any::<u64>(), n in 1usize..6, shots in 1usize..4) {
        let mut spec = PrototypeFamilySpec::new(n);
        spec.shots = shots;
        spec.query_per_class = 3;
        let family = TaskFamily::Prototypes(spec);
        let a = family.sample(&mut SeededRng::new(seed)).unwrap();
        let b = family.sample(&mut SeededRng::new(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        for (batch, per) in [(&a.support, shots), (&a.query, 3)] {
            let labels = batch.labels().unwrap();
            for c in 0..n {
                prop_assert_eq!(labels.iter().filter(|&&l| l == c).count(), per);
            }
        }
        let sine = TaskFamily::Sine(SineFamilySpec::new(n));
        let s1 = sine.sample(&mut SeededRng::new(seed)).unwrap();
        let s2 = sine.sample(&mut SeededRng::new(seed.wrapping_add(1))).unwrap();
        prop_assert_ne!(s1.descriptor, s2.descriptor);
    }

    #[test]
    fn pca_ratios_are_rotation_invariant(seed in any::<u64>(), m in 5usize..30, d in 2usize..8) {
        let mut rng = SeededRng::new(seed);
        let x = cloud(m, d, &mut rng);
        let q = random_orthogonal(d, &mut rng);
        let rotated = x.matmul(&q).unwrap();
        let a = pca(&x, d).unwrap();
        let b = pca(&rotated, d).unwrap();
        for (r, s) in a.explained_variance_ratios.iter().zip(&b.explained_variance_ratios) {
            prop_assert!((r - s).abs() < 1e-8);
        }
        prop_assert!((a.explained_variance_ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(a.explained_variance_ratios.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn pca_full_rank_round_trip_and_orthonormal(seed in any::<u64>(), m in 3usize..25, d in 1usize..30) {
        let mut rng = SeededRng::new(seed);
        let x = cloud(m, d, &mut rng);
        let p = pca(&x, d).unwrap();
        let k = p.n_components();
        let back = p.back_project(&p.project(&x, k).unwrap()).unwrap();
        for (a, b) in back.data().iter().zip(x.data()) {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
        }
        let c = &p.components;
        let g = c.matmul(&c.transpose()).unwrap();
        prop_assert!(g.sub(&DenseMatrix::identity(k)).unwrap().frobenius_norm() < 1e-8);
    }

    #[test]
    fn isomap_error_non_increasing_in_k(seed in any::<u64>(), m in 15usize..35, d in 2usize..5) {
        let mut rng = SeededRng::new(seed);
        let x = cloud(m, d, &mut rng);
        let fit = IsomapFit::new(&x, 6);
        prop_assume!(fit.is_ok());
        let fit = fit.unwrap();
        let errs: Vec<f64> = (1..=8).map(|k| fit.embed(k).unwrap().reconstruction_error).collect();
        for w in errs.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{errs:?}");
        }
        let rep = spectrum(&x, AnalysisMethod::Isomap, &[2, 3, 5], 6, 0.1).unwrap();
        prop_assert_eq!(rep.normalized_scores[0], 1.0);
    }

    #[test]
    fn isomap_error_is_translation_invariant(seed in any::<u64>(), m in 15usize..30, shift in -50.0f64..50.0) {
        let mut rng = SeededRng::new(seed);
        let x = cloud(m, 3, &mut rng);
        let moved = DenseMatrix::from_fn(m, 3, |i, j| x.get(i, j) + shift * (j as f64 + 1.0));
        let a = isomap(&x, 7, 2);
        prop_assume!(a.is_ok());
        let b = isomap(&moved, 7, 2).unwrap();
        prop_assert!((a.unwrap().reconstruction_error - b.reconstruction_error).abs() < 1e-8);
    }

    #[test]
    fn param_diff_is_brute_force_and_permutation_invariant(seed in any::<u64>(), m in 2usize..20) {
        let mut rng = SeededRng::new(seed);
        let layers = metasub::diffcore::mlp_layers(2, &[3], 2);
        let d = metasub::diffcore::param_count(&layers);
        let x = DenseMatrix::from_fn(m, d, |_, _| rng.normal(0.0, 1.0).unwrap());
        let got = mean_abs_param_diff(&x, &layers).unwrap();
        for (a, b) in got.per_param.iter().zip(brute_param_diff(&x)) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        let mut order: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut order);
        let permuted = mean_abs_param_diff(&x.select_rows(&order), &layers).unwrap();
        for (a, b) in got.per_param.iter().zip(&permuted.per_param) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn split_partitions_rows(seed in any::<u64>(), m in 5usize..200, frac in 0.1f64..0.9) {
        let s = Split::random(m, frac, &mut SeededRng::new(seed));
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn probe_is_reproducible_under_seed(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let amps = DenseMatrix::from_fn(20, 2, |_, _| rng.uniform(0.1, 5.0).unwrap());
        let z = DenseMatrix::from_fn(20, 2, |i, j| amps.get(i, j) + rng.normal(0.0, 0.1).unwrap());
        let split = Split::random(20, 0.2, &mut rng).unwrap();
        let set = EmbeddedTaskSet { z, targets: ProbeTargets::Amplitudes(amps), split };
        let cfg = ProbeConfig { hidden: 8, epochs: 20, ..ProbeConfig::default() };
        let a = fit_amplitude_regressor(&set, &cfg, seed).unwrap();
        let b = fit_amplitude_regressor(&set, &cfg, seed).unwrap();
        prop_assert_eq!(a.test_metric, b.test_metric);
        prop_assert_eq!(a.model, b.model);
    }
}
