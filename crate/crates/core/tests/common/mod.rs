//! Independent reference implementations and random instance generators
//! shared by the integration suites.
#![allow(dead_code)]

use metasub::diffcore::{mlp_layers, Activation, Batch, LossKind, MlpParams};
use metasub::meta::{Task, TaskDescriptor};
use metasub::numerics::{DenseMatrix, SeededRng, WeightedGraph};

/// `det(A - λI)` by Gaussian elimination with partial pivoting.
pub fn shifted_det(a: &DenseMatrix, lambda: f64) -> f64 {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j) - if i == j { lambda } else { 0.0 }).collect())
        .collect();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in (c + 1)..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// Roots of the characteristic polynomial of a symmetric matrix with
/// distinct eigenvalues: sign changes on a fine grid over the Gershgorin
/// interval, refined by bisection. Descending order.
pub fn charpoly_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.rows();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r: f64 = (0..n).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
        lo = lo.min(a.get(i, i) - r);
        hi = hi.max(a.get(i, i) + r);
    }
    lo -= 1e-3;
    hi += 1e-3;
    let steps = 20_000;
    let mut roots = Vec::new();
    let mut prev_x = lo;
    let mut prev_f = shifted_det(a, lo);
    for s in 1..=steps {
        let x = lo + (hi - lo) * s as f64 / steps as f64;
        let f = shifted_det(a, x);
        if f == 0.0 {
            roots.push(x);
        } else if prev_f != 0.0 && (f > 0.0) != (prev_f > 0.0) {
            let (mut l, mut r, fl) = (prev_x, x, prev_f);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                let fm = shifted_det(a, mid);
                if (fm > 0.0) == (fl > 0.0) {
                    l = mid;
                } else {
                    r = mid;
                }
            }
            roots.push(0.5 * (l + r));
        }
        prev_x = x;
        prev_f = f;
    }
    roots.sort_by(|x, y| y.total_cmp(x));
    roots
}

pub fn random_symmetric(n: usize, rng: &mut SeededRng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.uniform(-1.0, 1.0).unwrap();
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

pub type Edge = (usize, usize, f64);

pub fn floyd_warshall(n: usize, edges: &[Edge]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(u, v, w) in edges {
        d[u][v] = d[u][v].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Random directed graph where each ordered pair is an edge with probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut SeededRng) -> (WeightedGraph, Vec<Edge>) {
    let mut g = WeightedGraph::new(n);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.uniform(0.0, 1.0).unwrap() < p {
                let w = rng.uniform(0.0, 10.0).unwrap();
                g.add_edge(u, v, w).unwrap();
                edges.push((u, v, w));
            }
        }
    }
    (g, edges)
}

/// Central differences of a scalar function.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Mean over all unordered row pairs of the absolute column difference.
pub fn brute_param_diff(m: &DenseMatrix) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let pairs = (rows * (rows - 1) / 2) as f64;
    (0..cols)
        .map(|j| {
            let mut s = 0.0;
            for a in 0..rows {
                for b in (a + 1)..rows {
                    s += (m.get(a, j) - m.get(b, j)).abs();
                }
            }
            s / pairs
        })
        .collect()
}

/// Scalar-loop forward pass following the documented parameter layout.
pub fn scalar_forward(params: &MlpParams, x: &[f64]) -> Vec<f64> {
    let theta = params.theta();
    let mut act = x.to_vec();
    let mut off = 0;
    for l in params.layers() {
        let mut next = vec![0.0; l.out_dim];
        for (o, out) in next.iter_mut().enumerate() {
            let mut s = theta[off + l.in_dim * l.out_dim + o];
            for (i, a) in act.iter().enumerate() {
                s += theta[off + o * l.in_dim + i] * a;
            }
            *out = match l.activation {
                Activation::Relu => s.max(0.0),
                Activation::Identity => s,
            };
        }
        off += l.param_count();
        act = next;
    }
    act
}

/// Random MLP with one or two hidden layers and at most 200 parameters.
pub fn random_net(input: usize, output: usize, rng: &mut SeededRng) -> MlpParams {
    loop {
        let h1 = 3 + (rng.next_u64() % 6) as usize;
        let hidden = if rng.next_u64() % 2 == 0 {
            vec![h1]
        } else {
            vec![h1, 3 + (rng.next_u64() % 4) as usize]
        };
        let layers = mlp_layers(input, &hidden, output);
        let mut p = MlpParams::init(layers, rng).unwrap();
        if p.len() > 200 {
            continue;
        }
        // non-zero biases so the origin is not special
        let len = p.len();
        for i in 0..len {
            p.theta_mut()[i] += rng.normal(0.0, 0.1).unwrap();
        }
        return p;
    }
}

pub fn random_inputs(n: usize, d: usize, rng: &mut SeededRng) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |_, _| rng.normal(0.0, 1.0).unwrap())
}

pub fn random_batch(kind: LossKind, n: usize, d_in: usize, d_out: usize, rng: &mut SeededRng) -> Batch {
    let x = random_inputs(n, d_in, rng);
    match kind {
        LossKind::Mse => Batch::regression(x, random_inputs(n, d_out, rng)).unwrap(),
        LossKind::SoftmaxCrossEntropy => {
            let labels = (0..n).map(|_| (rng.next_u64() % d_out as u64) as usize).collect();
            Batch::classification(x, labels).unwrap()
        }
    }
}

pub fn random_task(kind: LossKind, d_in: usize, d_out: usize, rng: &mut SeededRng) -> Task {
    Task {
        support: random_batch(kind, 6, d_in, d_out, rng),
        query: random_batch(kind, 8, d_in, d_out, rng),
        descriptor: TaskDescriptor::None,
    }
}

/// Random orthogonal matrix: Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> DenseMatrix {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0).unwrap()).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    DenseMatrix::from_rows(&q).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
