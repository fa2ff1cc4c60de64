//! Dense linear algebra, shortest paths and seeded randomness.

pub mod eigen;
pub mod graph;
pub mod matrix;
pub mod rng;

pub use eigen::{sym_eig, SymEigen};
pub use graph::{all_pairs_shortest_paths, shortest_path_distances, WeightedGraph};
pub use matrix::{dot, gemm, DenseMatrix, View};
pub use rng::SeededRng;
