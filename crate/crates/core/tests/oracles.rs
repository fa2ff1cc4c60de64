mod common;

use std::f64::consts::PI;

use common::*;
use metasub::diffcore::{self, mlp_layers, Batch, LossKind, MlpParams};
use metasub::meta::{
    collect_adapted, meta_gradient, meta_objective, AdamConfig, MetaMethod, MetaState, MethodKind,
};
use metasub::numerics::{all_pairs_shortest_paths, sym_eig, DenseMatrix, SeededRng};
use metasub::subspace::{
    isomap, mean_abs_param_diff, pca, spectrum, AnalysisMethod, DEFAULT_ISOMAP_THRESHOLD,
};
use metasub::taskgen::{
    grid_prototypes, sample_prototype_task, sample_sine_task, PrototypeFamilySpec, SineFamilySpec,
};

#[test]
fn eigenvalues_match_characteristic_polynomial_roots() {
    let mut rng = SeededRng::new(100);
    for n in 2..=6 {
        for _ in 0..5 {
            let a = random_symmetric(n, &mut rng);
            let oracle = charpoly_eigenvalues(&a);
            assert_eq!(oracle.len(), n, "oracle lost a root for n={n}");
            let e = sym_eig(&a).unwrap();
            for (x, y) in e.values.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn eigen_reconstruction_and_trace_up_to_50() {
    let mut rng = SeededRng::new(101);
    for n in [5, 17, 50] {
        let a = random_symmetric(n, &mut rng);
        let e = sym_eig(&a).unwrap();
        let v = &e.vectors;
        let vd = DenseMatrix::from_fn(n, n, |i, j| v.get(i, j) * e.values[j]);
        let back = vd.matmul(&v.transpose()).unwrap();
        let err = back.sub(&a).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(err < 1e-7, "n={n} reconstruction {err}");
        let vtv = v.transpose().matmul(v).unwrap();
        let ortho = vtv.sub(&DenseMatrix::identity(n)).unwrap().frobenius_norm();
        assert!(ortho < 1e-8, "n={n} orthonormality {ortho}");
        let tr: f64 = e.values.iter().sum();
        assert!((tr - a.trace()).abs() < 1e-8);
        for i in 0..n {
            let av = a.matvec(&e.vector(i)).unwrap();
            let lv: Vec<f64> = e.vector(i).iter().map(|x| x * e.values[i]).collect();
            assert!(rel_err(&av, &lv) < 1e-8 || e.values[i].abs() < 1e-12);
        }
    }
}

#[test]
fn dijkstra_matches_floyd_warshall() {
    let mut rng = SeededRng::new(102);
    for _ in 0..20 {
        let (g, edges) = random_graph(20, 0.15, &mut rng);
        let fw = floyd_warshall(20, &edges);
        let d = metasub::numerics::shortest_path_distances(&g);
        for i in 0..20 {
            for j in 0..20 {
                let (a, b) = (d.get(i, j), fw[i][j]);
                assert!(a == b || (a - b).abs() < 1e-9, "({i},{j}) {a} vs {b}");
            }
        }
    }
}

#[test]
fn shortest_paths_are_permutation_equivariant() {
    let mut rng = SeededRng::new(103);
    let n = 15;
    let mut g = metasub::numerics::WeightedGraph::new(n);
    let mut edges = Vec::new();
    for u in 0..n {
        // ring keeps the graph connected
        let w = rng.uniform(0.5, 2.0).unwrap();
        edges.push((u, (u + 1) % n, w));
        let v = (rng.next_u64() % n as u64) as usize;
        if v != u {
            edges.push((u, v, rng.uniform(0.5, 2.0).unwrap()));
        }
    }
    for &(u, v, w) in &edges {
        g.add_undirected_edge(u, v, w).unwrap();
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut h = metasub::numerics::WeightedGraph::new(n);
    for &(u, v, w) in &edges {
        h.add_undirected_edge(perm[u], perm[v], w).unwrap();
    }
    let dg = all_pairs_shortest_paths(&g).unwrap();
    let dh = all_pairs_shortest_paths(&h).unwrap();
    for i in 0..n {
        for j in 0..n {
            assert!((dg.get(i, j) - dh.get(perm[i], perm[j])).abs() < 1e-12);
            assert!((dg.get(i, j) - dg.get(j, i)).abs() < 1e-12);
        }
    }
}

#[test]
fn uniform_and_normal_moments() {
    let mut rng = SeededRng::new(104);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| rng.uniform(0.1, 5.0).unwrap()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (4.9f64).powi(2).sqrt() / 12f64.sqrt();
    assert!((mean - 2.55).abs() < 3.0 * sd / (n as f64).sqrt());
    let zs: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0).unwrap()).collect();
    let zm = zs.iter().sum::<f64>() / n as f64;
    let var = zs.iter().map(|z| (z - zm).powi(2)).sum::<f64>() / (n - 1) as f64;
    // variance of the sample variance of a standard normal is 2 / (n - 1)
    assert!((var - 1.0).abs() < 3.0 * (2.0 / (n - 1) as f64).sqrt());
}

#[test]
fn forward_and_loss_match_scalar_loops() {
    let mut rng = SeededRng::new(105);
    let params = MlpParams::init(mlp_layers(3, &[6], 2), &mut rng).unwrap();
    let x = random_inputs(5, 3, &mut rng);
    let out = diffcore::forward(&params, &x).unwrap();
    for i in 0..5 {
        let o = scalar_forward(&params, x.row(i));
        for j in 0..2 {
            assert!((out.get(i, j) - o[j]).abs() < 1e-14);
        }
    }
    let y = random_inputs(5, 2, &mut rng);
    let batch = Batch::regression(x.clone(), y.clone()).unwrap();
    let mut mse = 0.0;
    for i in 0..5 {
        let o = scalar_forward(&params, x.row(i));
        for j in 0..2 {
            mse += (o[j] - y.get(i, j)).powi(2);
        }
    }
    mse /= 10.0;
    assert!((diffcore::loss(&params, &batch, LossKind::Mse).unwrap() - mse).abs() < 1e-14);

    let labels = vec![0, 1, 1, 0, 1];
    let batch = Batch::classification(x.clone(), labels.clone()).unwrap();
    let mut ce = 0.0;
    for (i, &c) in labels.iter().enumerate() {
        let o = scalar_forward(&params, x.row(i));
        let z: f64 = o.iter().map(|v| v.exp()).sum();
        ce += z.ln() - o[c];
    }
    ce /= 5.0;
    let got = diffcore::loss(&params, &batch, LossKind::SoftmaxCrossEntropy).unwrap();
    assert!((got - ce).abs() < 1e-13);
}

#[test]
fn grad_and_hvp_match_finite_differences() {
    let mut rng = SeededRng::new(106);
    for (kind, d_out) in [(LossKind::Mse, 2), (LossKind::SoftmaxCrossEntropy, 3)] {
        for _ in 0..5 {
            let params = random_net(3, d_out, &mut rng);
            let batch = random_batch(kind, 7, 3, d_out, &mut rng);
            let f = |t: &[f64]| diffcore::loss(&params.with_theta(t.to_vec()).unwrap(), &batch, kind).unwrap();
            let fd = central_diff(f, params.theta(), 1e-5);
            let g = diffcore::grad(&params, &batch, kind).unwrap();
            assert!(rel_err(&g, &fd) < 1e-5, "grad {}", rel_err(&g, &fd));

            let v: Vec<f64> = (0..params.len()).map(|_| rng.normal(0.0, 1.0).unwrap()).collect();
            let hv = diffcore::hvp(&params, &batch, kind, &v).unwrap();
            let h = 1e-5;
            let shifted = |s: f64| {
                let t: Vec<f64> = params.theta().iter().zip(&v).map(|(a, b)| a + s * b).collect();
                diffcore::grad(&params.with_theta(t).unwrap(), &batch, kind).unwrap()
            };
            let (gp, gm) = (shifted(h), shifted(-h));
            let fd_hv: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            assert!(rel_err(&hv, &fd_hv) < 1e-4, "hvp {}", rel_err(&hv, &fd_hv));
        }
    }
}

#[test]
fn meta_gradient_matches_finite_differences_of_objective() {
    let mut rng = SeededRng::new(107);
    for kind in [MethodKind::Maml, MethodKind::MetaCurvature] {
        for loss in [LossKind::Mse, LossKind::SoftmaxCrossEntropy] {
            let d_out = if loss == LossKind::Mse { 1 } else { 3 };
            let params = random_net(2, d_out, &mut rng);
            let mut state = MetaState::new(params, kind, AdamConfig::default());
            if let Some(blocks) = state.curvature.as_mut() {
                // move G away from the identity
                for b in blocks.iter_mut() {
                    for x in b.data_mut() {
                        *x += rng.normal(0.0, 0.05).unwrap();
                    }
                }
            }
            let tasks: Vec<_> = (0..3).map(|_| random_task(loss, 2, d_out, &mut rng)).collect();
            let method = MetaMethod { kind, inner_lr: 0.1 };
            let mg = meta_gradient(&state, &tasks, &method).unwrap();
            let f = |t: &[f64]| {
                let mut s = state.clone();
                s.params = s.params.with_theta(t.to_vec()).unwrap();
                meta_objective(&s, &tasks, &method).unwrap()
            };
            let fd = central_diff(f, state.params.theta(), 1e-5);
            assert!(rel_err(&mg.d_theta, &fd) < 1e-4, "{kind} {loss:?} dθ {}", rel_err(&mg.d_theta, &fd));
            if let Some(dg) = &mg.d_curvature {
                for (l, block) in dg.iter().enumerate() {
                    let g0 = state.curvature.as_ref().unwrap()[l].data().to_vec();
                    let f = |g: &[f64]| {
                        let mut s = state.clone();
                        s.curvature.as_mut().unwrap()[l].data_mut().copy_from_slice(g);
                        meta_objective(&s, &tasks, &method).unwrap()
                    };
                    let fd = central_diff(f, &g0, 1e-5);
                    assert!(rel_err(block.data(), &fd) < 1e-4, "dG_{l} {}", rel_err(block.data(), &fd));
                }
            }
        }
    }
}

#[test]
fn sine_targets_reproduce_from_descriptor() {
    let mut rng = SeededRng::new(108);
    let spec = SineFamilySpec::new(3);
    let mut sums = [0.0; 3];
    let n = 10_000;
    for _ in 0..n {
        let t = sample_sine_task(&spec, &mut rng).unwrap();
        let metasub::meta::TaskDescriptor::Amplitudes(a) = &t.descriptor else { panic!() };
        for (s, v) in sums.iter_mut().zip(a) {
            *s += v;
        }
        let metasub::diffcore::Targets::Values(y) = &t.support.targets else { panic!() };
        for i in 0..t.support.len() {
            let x = t.support.inputs.get(i, 0);
            assert_eq!(y.get(i, 0), metasub::taskgen::sine_sum(a, x));
        }
    }
    let sd = 4.9 / 12f64.sqrt();
    for s in sums {
        assert!((s / n as f64 - 2.55).abs() < 3.0 * sd / (n as f64).sqrt());
    }
    assert!((metasub::taskgen::sine_sum(&[1.0, 1.0], PI / 2.0) - 1.0).abs() < 1e-15);
}

#[test]
fn prototype_grid_and_noise_moments() {
    let mut spec = PrototypeFamilySpec::new(2);
    spec.grid_points_per_axis = 3;
    spec.input_dim = 3;
    spec.grid_spacing = 1.5;
    let grid = grid_prototypes(&spec).unwrap();
    assert_eq!(grid.rows(), 27);
    for i in 0..27 {
        for j in 0..27 {
            let linf = (0..3).map(|c| (grid.get(i, c) - grid.get(j, c)).abs()).fold(0.0, f64::max);
            let steps = linf / 1.5;
            assert!((steps - steps.round()).abs() < 1e-12);
        }
    }

    let mut spec = PrototypeFamilySpec::new(1);
    spec.noise_std = 0.5;
    spec.shots = 10_000;
    let mut rng = SeededRng::new(109);
    let t = sample_prototype_task(&spec, &mut rng).unwrap();
    let x = &t.support.inputs;
    let n = x.rows() as f64;
    for c in 0..x.cols() {
        let col = x.column(c);
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        // std of the sample std is about σ / sqrt(2n)
        assert!((var.sqrt() - 0.5).abs() < 3.0 * 0.5 / (2.0 * n).sqrt());
    }
}

#[test]
fn pca_sampling_experiments() {
    let mut rng = SeededRng::new(110);
    let iso = DenseMatrix::from_fn(10_000, 3, |_, _| rng.normal(0.0, 1.0).unwrap());
    let r = pca(&iso, 3).unwrap();
    for ratio in &r.explained_variance_ratios {
        assert!((ratio - 1.0 / 3.0).abs() < 0.02);
    }
    let ellipse = DenseMatrix::from_fn(10_000, 2, |_, j| rng.normal(0.0, if j == 0 { 2.0 } else { 1.0 }).unwrap());
    let r = pca(&ellipse, 2).unwrap();
    assert!((r.explained_variance_ratios[0] - 0.8).abs() < 0.02);
    assert!((r.explained_variance_ratios[1] - 0.2).abs() < 0.02);
}

fn circle(n: usize, arc: f64, rng: Option<&mut SeededRng>) -> DenseMatrix {
    let mut noise = rng;
    DenseMatrix::from_fn(n, 3, |i, j| {
        let t = arc * i as f64 / n as f64;
        let base = match j {
            0 => t.cos(),
            1 => t.sin(),
            _ => 0.3,
        };
        base + noise.as_mut().map_or(0.0, |r| r.normal(0.0, 0.002).unwrap())
    })
}

/// Relative kernel error of the top-`k` MDS embedding of the geodesic metric
/// of a unit circle. The kernel is circulant; its eigenvalues are the Fourier
/// coefficients of `-θ²/2`, proportional to `(-1)^(m+1) / m²`, each twice.
fn circle_kernel_error(k: usize) -> f64 {
    let coeff = |m: usize| -(-1f64).powi(m as i32) / (m * m) as f64;
    let mut eig: Vec<f64> = (1..20_000).flat_map(|m| [coeff(m), coeff(m)]).collect();
    let total: f64 = eig.iter().map(|v| v * v).sum();
    eig.sort_by(|a, b| b.total_cmp(a));
    let captured: f64 = eig[..k].iter().filter(|v| **v > 0.0).map(|v| v * v).sum();
    ((total - captured) / total).sqrt()
}

#[test]
fn isomap_circle_matches_fourier_oracle() {
    let pts = circle(400, 2.0 * PI, None);
    let e1 = isomap(&pts, 4, 1).unwrap().reconstruction_error;
    let e2 = isomap(&pts, 4, 2).unwrap().reconstruction_error;
    assert!((e1 - circle_kernel_error(1)).abs() < 0.01, "k=1 {e1} vs {}", circle_kernel_error(1));
    assert!((e2 - circle_kernel_error(2)).abs() < 0.01, "k=2 {e2} vs {}", circle_kernel_error(2));
    assert!(e2 < 0.5 * e1);
    let rep = spectrum(&pts, AnalysisMethod::Isomap, &[1, 2, 3, 4, 5], 4, DEFAULT_ISOMAP_THRESHOLD).unwrap();
    assert_eq!(rep.normalized_scores[0], 1.0);
    // the largest drop is from k=1 to k=2
    let drops: Vec<f64> = rep.normalized_scores.windows(2).map(|w| w[0] - w[1]).collect();
    assert!(drops[1..].iter().all(|&d| d < drops[0]));
}

#[test]
fn isomap_arc_is_one_dimensional() {
    let mut rng = SeededRng::new(111);
    let arc = circle(150, PI / 2.0, Some(&mut rng));
    let e = isomap(&arc, 10, 1).unwrap().reconstruction_error;
    assert!(e < 0.1, "arc k=1 error {e}");
}

#[test]
fn isomap_recovers_euclidean_data_exactly() {
    let mut rng = SeededRng::new(112);
    for k in 1..=3 {
        let pts = random_inputs(25, k, &mut rng);
        let r = isomap(&pts, 24, k).unwrap();
        assert!(r.reconstruction_error < 1e-8, "k={k}: {}", r.reconstruction_error);
    }
}

#[test]
fn isometry_of_rank_two_embedding() {
    let mut rng = SeededRng::new(113);
    let a: Vec<f64> = (0..8).map(|_| rng.normal(0.0, 1.0).unwrap()).collect();
    let b: Vec<f64> = (0..8).map(|_| rng.normal(0.0, 1.0).unwrap()).collect();
    let c: Vec<(f64, f64)> = (0..30).map(|_| (rng.normal(0.0, 1.0).unwrap(), rng.normal(0.0, 1.0).unwrap())).collect();
    let pts = DenseMatrix::from_fn(30, 8, |i, j| c[i].0 * a[j] + c[i].1 * b[j] + 1.0);
    let p = pca(&pts, 8).unwrap();
    let z = p.project(&pts, 2).unwrap();
    for i in 0..30 {
        for j in 0..30 {
            let dx: f64 = (0..8).map(|c| (pts.get(i, c) - pts.get(j, c)).powi(2)).sum::<f64>().sqrt();
            let dz: f64 = (0..2).map(|c| (z.get(i, c) - z.get(j, c)).powi(2)).sum::<f64>().sqrt();
            assert!((dx - dz).abs() < 1e-6);
        }
    }
}

#[test]
fn param_diff_matches_brute_force() {
    let mut rng = SeededRng::new(114);
    let layers = mlp_layers(2, &[3], 1);
    let d = metasub::diffcore::param_count(&layers);
    let m = random_inputs(5, d, &mut rng);
    let got = mean_abs_param_diff(&m, &layers).unwrap();
    let want = brute_param_diff(&m);
    for (a, b) in got.per_param.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn collected_sine_matrix_is_low_rank() {
    let mut rng = SeededRng::new(115);
    let mut spec = SineFamilySpec::new(2);
    spec.support_x = metasub::taskgen::XSampling::Grid;
    let state = MetaState::init(mlp_layers(1, &[40, 40], 1), MethodKind::Maml, AdamConfig::default(), &mut rng).unwrap();
    let tasks: Vec<_> = (0..200).map(|_| sample_sine_task(&spec, &mut rng).unwrap()).collect();
    let m = collect_adapted(&state, &tasks, &MetaMethod::maml(0.01)).unwrap();
    let p = pca(&m.matrix, 10).unwrap();
    let top = p.explained_variances[0];
    let rank = p.explained_variances.iter().filter(|&&v| v.sqrt() > 1e-6 * top.sqrt()).count();
    assert!(rank <= 2, "numerical rank {rank}");
}
