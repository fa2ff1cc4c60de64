//! Intrinsic-dimension analysis of a point cloud of adapted parameters:
//! PCA spectra, Isomap reconstruction errors, the threshold rule that turns
//! either into a dimension estimate, and per-parameter change statistics.

use serde::{Deserialize, Serialize};

use crate::diffcore::{layer_ranges, LayerSpec};
use crate::error::{Error, Result};
use crate::numerics::{
    all_pairs_shortest_paths, dot, gemm, sym_eig, DenseMatrix, SymEigen, WeightedGraph,
};

pub const DEFAULT_PCA_THRESHOLD: f64 = 0.95;
pub const DEFAULT_ISOMAP_THRESHOLD: f64 = 0.10;
pub const DEFAULT_N_NEIGHBORS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Descending, non-negative, summing to 1.
    pub explained_variance_ratios: Vec<f64>,
    /// Eigenvalues of the sample covariance (divisor `M - 1`), clamped at 0.
    pub explained_variances: Vec<f64>,
    /// Running sums of the ratios.
    pub cumulative: Vec<f64>,
    /// Orthonormal principal directions, one per row, strongest first.
    pub components: DenseMatrix,
    pub mean: Vec<f64>,
}

impl PcaResult {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    /// Cumulative explained variance of the first `k` components (1 once `k`
    /// exceeds the spectrum).
    pub fn cumulative_at(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            k if k <= self.cumulative.len() => self.cumulative[k - 1],
            _ => 1.0,
        }
    }

    /// `(points - mean) · componentsᵀ`, keeping the first `k` components.
    pub fn project(&self, points: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
        if k > self.n_components() {
            return Err(Error::Argument(format!(
                "asked for {k} components, only {} available",
                self.n_components()
            )));
        }
        if points.cols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "points have {} columns, PCA was fit on {}",
                points.cols(),
                self.mean.len()
            )));
        }
        let centered = center_with(points, &self.mean);
        let comps = DenseMatrix::from_fn(k, self.components.cols(), |i, j| {
            self.components.get(i, j)
        });
        let mut z = DenseMatrix::zeros(points.rows(), k);
        gemm(1.0, centered.view(), comps.view().t(), 0.0, z.data_mut());
        Ok(z)
    }

    /// Maps `k`-dimensional codes back to the ambient space.
    pub fn back_project(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        let k = z.cols();
        if k > self.n_components() {
            return Err(Error::Dimension(format!(
                "codes have {k} columns, only {} components",
                self.n_components()
            )));
        }
        let comps = DenseMatrix::from_fn(k, self.components.cols(), |i, j| {
            self.components.get(i, j)
        });
        let mut x = DenseMatrix::zeros(z.rows(), comps.cols());
        gemm(1.0, z.view(), comps.view(), 0.0, x.data_mut());
        for i in 0..x.rows() {
            for (v, m) in x.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(x)
    }
}

fn column_means(points: &DenseMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; points.cols()];
    for r in points.row_iter() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    let n = points.rows() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

fn center_with(points: &DenseMatrix, mean: &[f64]) -> DenseMatrix {
    let mut c = points.clone();
    for i in 0..c.rows() {
        for (v, m) in c.row_mut(i).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    c
}

/// Flips the sign so the largest-magnitude entry is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Principal component analysis of the rows of `points`.
///
/// Works on the `D x D` covariance when `D <= M` and on the `M x M` Gram
/// matrix otherwise; both share the same non-zero spectrum. At most
/// `max_components` directions are kept, but the ratio list always covers the
/// whole spectrum.
pub fn pca(points: &DenseMatrix, max_components: usize) -> Result<PcaResult> {
    let (m, d) = points.shape();
    if m < 2 {
        return Err(Error::Argument(format!("PCA needs at least 2 rows, got {m}")));
    }
    if points.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("points contain non-finite values".into()));
    }
    let mean = column_means(points);
    let centered = center_with(points, &mean);
    let total: f64 = centered.data().iter().map(|x| x * x).sum::<f64>() / (m - 1) as f64;
    let scale: f64 = points.data().iter().map(|x| x * x).sum::<f64>() / (m - 1) as f64;
    if total <= 1e-28 * scale.max(f64::MIN_POSITIVE) || total == 0.0 {
        return Err(Error::DegenerateData(
            "all rows are identical (zero total variance)".into(),
        ));
    }

    let denom = (m - 1) as f64;
    let (variances, mut components) = if d <= m {
        let mut cov = DenseMatrix::zeros(d, d);
        gemm(1.0 / denom, centered.view().t(), centered.view(), 0.0, cov.data_mut());
        let cov = cov.symmetrized()?;
        let SymEigen { values, vectors } = sym_eig(&cov)?;
        let keep = max_components.min(d);
        let comps = DenseMatrix::from_fn(keep, d, |i, j| vectors.get(j, i));
        (values, comps)
    } else {
        let mut gram = DenseMatrix::zeros(m, m);
        gemm(1.0, centered.view(), centered.view().t(), 0.0, gram.data_mut());
        let gram = gram.symmetrized()?;
        let SymEigen { values, vectors } = sym_eig(&gram)?;
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        let rank = values.iter().take_while(|&&v| v > 1e-10 * top).count();
        let keep = max_components.min(rank);
        let mut comps = DenseMatrix::zeros(keep, d);
        for i in 0..keep {
            let u = vectors.column(i);
            // v = Xcᵀ u / sqrt(μ)
            let scale = 1.0 / values[i].sqrt();
            let row = comps.row_mut(i);
            for (r, &ui) in centered.row_iter().zip(&u) {
                for (o, x) in row.iter_mut().zip(r) {
                    *o += scale * ui * x;
                }
            }
        }
        orthonormalize_rows(&mut comps);
        (values.iter().map(|v| v / denom).collect(), comps)
    };
    for i in 0..components.rows() {
        canonical_sign(components.row_mut(i));
    }

    let explained_variances: Vec<f64> = variances.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = explained_variances.iter().sum();
    let explained_variance_ratios: Vec<f64> =
        explained_variances.iter().map(|v| v / sum).collect();
    let cumulative = explained_variance_ratios
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(acc.min(1.0))
        })
        .collect();
    Ok(PcaResult {
        explained_variance_ratios,
        explained_variances,
        cumulative,
        components,
        mean,
    })
}

/// Modified Gram-Schmidt over the rows.
fn orthonormalize_rows(m: &mut DenseMatrix) {
    for i in 0..m.rows() {
        for j in 0..i {
            let proj = dot(m.row(i), m.row(j));
            let cols = m.cols();
            let (head, tail) = m.data_mut().split_at_mut(i * cols);
            let prev = &head[j * cols..(j + 1) * cols];
            for (x, p) in tail[..cols].iter_mut().zip(prev) {
                *x -= proj * p;
            }
        }
        let n = dot(m.row(i), m.row(i)).sqrt();
        if n > 0.0 {
            m.row_mut(i).iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// Euclidean distances between all pairs of rows.
pub fn pairwise_distances(points: &DenseMatrix) -> DenseMatrix {
    let m = points.rows();
    let mut out = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let d = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            out.set(i, j, d);
            out.set(j, i, d);
        }
    }
    out
}

/// Symmetric k-nearest-neighbour graph: an edge joins `i` and `j` when either
/// lists the other among its `n_neighbors` nearest (ties broken by index).
pub fn knn_graph(distances: &DenseMatrix, n_neighbors: usize) -> Result<WeightedGraph> {
    let m = distances.rows();
    if n_neighbors == 0 || n_neighbors >= m {
        return Err(Error::Argument(format!(
            "n_neighbors must be in 1..{m} for {m} points, got {n_neighbors}"
        )));
    }
    let mut adjacent = vec![false; m * m];
    for i in 0..m {
        let mut order: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            distances
                .get(i, a)
                .total_cmp(&distances.get(i, b))
                .then(a.cmp(&b))
        });
        for &j in &order[..n_neighbors] {
            adjacent[i * m + j] = true;
            adjacent[j * m + i] = true;
        }
    }
    let mut g = WeightedGraph::new(m);
    for i in 0..m {
        for j in 0..m {
            if adjacent[i * m + j] {
                g.add_edge(i, j, distances.get(i, j))?;
            }
        }
    }
    Ok(g)
}

/// `-½ H D² H` with `H` the centering projector.
pub fn double_centered_kernel(distances: &DenseMatrix) -> DenseMatrix {
    let m = distances.rows();
    let sq = DenseMatrix::from_fn(m, m, |i, j| distances.get(i, j).powi(2));
    let row_means: Vec<f64> = sq.row_iter().map(|r| r.iter().sum::<f64>() / m as f64).collect();
    let grand = row_means.iter().sum::<f64>() / m as f64;
    // D² is symmetric, so column means equal row means
    DenseMatrix::from_fn(m, m, |i, j| {
        -0.5 * (sq.get(i, j) - row_means[i] - row_means[j] + grand)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsomapResult {
    pub k: usize,
    /// `M x k`, columns in decreasing eigenvalue order.
    pub embedding: DenseMatrix,
    /// `‖K - Z Zᵀ‖_F / ‖K‖_F`.
    pub reconstruction_error: f64,
}

/// Geodesic kernel and its eigendecomposition, shared by embeddings of every size.
#[derive(Debug, Clone)]
pub struct IsomapFit {
    pub n_neighbors: usize,
    pub geodesics: DenseMatrix,
    pub kernel: DenseMatrix,
    kernel_norm: f64,
    eigen: SymEigen,
}

impl IsomapFit {
    pub fn new(points: &DenseMatrix, n_neighbors: usize) -> Result<Self> {
        let m = points.rows();
        if m <= n_neighbors {
            return Err(Error::Argument(format!(
                "Isomap needs more points ({m}) than neighbours ({n_neighbors})"
            )));
        }
        if n_neighbors == 0 {
            return Err(Error::Argument("n_neighbors must be >= 1".into()));
        }
        let distances = pairwise_distances(points);
        let graph = knn_graph(&distances, n_neighbors)?;
        let geodesics = all_pairs_shortest_paths(&graph).map_err(|e| match e {
            Error::Disconnected { components, .. } => Error::Disconnected {
                components,
                hint: Some(format!(
                    "the {n_neighbors}-nearest-neighbour graph is disconnected; increase n_neighbors"
                )),
            },
            other => other,
        })?;
        let kernel = double_centered_kernel(&geodesics);
        let kernel_norm = kernel.frobenius_norm();
        if kernel_norm == 0.0 {
            return Err(Error::DegenerateData(
                "all geodesic distances are zero".into(),
            ));
        }
        let eigen = sym_eig(&kernel.symmetrized()?)?;
        Ok(Self {
            n_neighbors,
            geodesics,
            kernel,
            kernel_norm,
            eigen,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    /// Top-`k` classical-MDS embedding; non-positive eigenvalues give zero columns.
    pub fn embed(&self, k: usize) -> Result<IsomapResult> {
        let m = self.kernel.rows();
        if k == 0 || k > m {
            return Err(Error::Argument(format!(
                "embedding dimension must be in 1..={m}, got {k}"
            )));
        }
        let mut z = DenseMatrix::zeros(m, k);
        for c in 0..k {
            let lambda = self.eigen.values[c];
            if lambda <= 0.0 {
                continue;
            }
            let s = lambda.sqrt();
            for i in 0..m {
                z.set(i, c, s * self.eigen.vectors.get(i, c));
            }
        }
        let mut gram = DenseMatrix::zeros(m, m);
        gemm(1.0, z.view(), z.view().t(), 0.0, gram.data_mut());
        let resid = self.kernel.sub(&gram)?.frobenius_norm();
        Ok(IsomapResult {
            k,
            embedding: z,
            reconstruction_error: resid / self.kernel_norm,
        })
    }
}

pub fn isomap(points: &DenseMatrix, n_neighbors: usize, k: usize) -> Result<IsomapResult> {
    IsomapFit::new(points, n_neighbors)?.embed(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMethod {
    Pca,
    Isomap,
}

impl std::fmt::Display for AnalysisMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnalysisMethod::Pca => "pca",
            AnalysisMethod::Isomap => "isomap",
        })
    }
}

impl AnalysisMethod {
    pub fn default_threshold(self) -> f64 {
        match self {
            AnalysisMethod::Pca => DEFAULT_PCA_THRESHOLD,
            AnalysisMethod::Isomap => DEFAULT_ISOMAP_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub dim: usize,
    /// The threshold was never reached; `dim` is the largest scanned k.
    pub saturated: bool,
}

/// PCA: smallest `k` whose cumulative explained variance reaches `threshold`.
/// Isomap: smallest `k` whose normalized reconstruction error is at most `threshold`.
pub fn estimate_intrinsic_dim(
    k_values: &[usize],
    normalized_scores: &[f64],
    method: AnalysisMethod,
    threshold: f64,
) -> DimEstimate {
    let hit = k_values
        .iter()
        .zip(normalized_scores)
        .find(|&(_, &s)| match method {
            AnalysisMethod::Pca => s >= threshold,
            AnalysisMethod::Isomap => s <= threshold,
        });
    match hit {
        Some((&k, _)) => DimEstimate {
            dim: k,
            saturated: false,
        },
        None => DimEstimate {
            dim: k_values.last().copied().unwrap_or(0),
            saturated: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub method: AnalysisMethod,
    pub k_values: Vec<usize>,
    /// PCA: `1 - cumulative`; Isomap: reconstruction error.
    pub raw_scores: Vec<f64>,
    /// PCA: cumulative explained variance; Isomap: error divided by the error at the first k.
    pub normalized_scores: Vec<f64>,
    pub estimated_dim: usize,
    pub saturated: bool,
    pub threshold: f64,
    pub n_neighbors: Option<usize>,
    /// Seed of the run the points came from, when known.
    #[serde(default)]
    pub seed: Option<u64>,
}

pub fn spectrum(
    points: &DenseMatrix,
    method: AnalysisMethod,
    k_values: &[usize],
    n_neighbors: usize,
    threshold: f64,
) -> Result<SpectrumReport> {
    if k_values.is_empty() {
        return Err(Error::Argument("k range is empty".into()));
    }
    if k_values[0] == 0 || k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(format!(
            "k values must be >= 1 and strictly ascending, got {k_values:?}"
        )));
    }
    let (raw, normalized) = match method {
        AnalysisMethod::Pca => {
            let max_k = *k_values.last().expect("non-empty");
            let fit = pca(points, max_k)?;
            let cum: Vec<f64> = k_values.iter().map(|&k| fit.cumulative_at(k)).collect();
            (cum.iter().map(|c| (1.0 - c).max(0.0)).collect(), cum)
        }
        AnalysisMethod::Isomap => {
            let fit = IsomapFit::new(points, n_neighbors)?;
            let raw = k_values
                .iter()
                .map(|&k| fit.embed(k).map(|r| r.reconstruction_error))
                .collect::<Result<Vec<f64>>>()?;
            let first = raw[0];
            let normalized = raw
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    if i == 0 {
                        1.0
                    } else if first > 0.0 {
                        r / first
                    } else {
                        0.0
                    }
                })
                .collect();
            (raw, normalized)
        }
    };
    let est = estimate_intrinsic_dim(k_values, &normalized, method, threshold);
    Ok(SpectrumReport {
        method,
        k_values: k_values.to_vec(),
        raw_scores: raw,
        normalized_scores: normalized,
        estimated_dim: est.dim,
        saturated: est.saturated,
        threshold,
        n_neighbors: (method == AnalysisMethod::Isomap).then_some(n_neighbors),
        seed: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDiff {
    pub layer: usize,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiff {
    /// Mean over unordered row pairs of `|θ_i,j - θ_i',j|`, per parameter `j`.
    pub per_param: Vec<f64>,
    pub per_layer: Vec<LayerDiff>,
}

/// Mean absolute pairwise difference of every parameter across the rows.
pub fn mean_abs_param_diff(points: &DenseMatrix, layers: &[LayerSpec]) -> Result<ParamDiff> {
    let (m, d) = points.shape();
    if m < 2 {
        return Err(Error::Argument(format!(
            "parameter differences need at least 2 rows, got {m}"
        )));
    }
    let ranges = layer_ranges(layers);
    if ranges.last().map_or(0, |r| r.end) != d {
        return Err(Error::Dimension(format!(
            "layers describe {} parameters, matrix has {d} columns",
            ranges.last().map_or(0, |r| r.end)
        )));
    }
    let pairs = (m * (m - 1) / 2) as f64;
    let t = points.transpose();
    let per_param: Vec<f64> = (0..d)
        .map(|j| {
            let mut col = t.row(j).to_vec();
            col.sort_by(f64::total_cmp);
            // in sorted order x_(k) is larger than k items and smaller than m-1-k
            let s: f64 = col
                .iter()
                .enumerate()
                .map(|(k, x)| x * (2.0 * k as f64 - (m - 1) as f64))
                .sum();
            s / pairs
        })
        .collect();
    let per_layer = ranges
        .iter()
        .enumerate()
        .map(|(layer, r)| {
            let vals = &per_param[r.clone()];
            LayerDiff {
                layer,
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                max: vals.iter().copied().fold(0.0, f64::max),
            }
        })
        .collect();
    Ok(ParamDiff {
        per_param,
        per_layer,
    })
}
