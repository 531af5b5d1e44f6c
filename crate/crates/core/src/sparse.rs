//! Sparse symmetric matrices and adjacency powers.
//!
//! Adjacency matrices and their hop powers are kept in CSR form; dense
//! matrices only appear inside model forward/backward passes. Unweighted
//! graphs produce exact integer-valued powers (walk counts), which stay
//! exact in f64 well past any graph size handled here.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Square sparse matrix in CSR layout with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets. Duplicate coordinates are
    /// summed; explicit zeros are dropped.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::Bounds {
                    index: r.max(c),
                    n_nodes: n,
                });
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut i = 0;
        for r in 0..n {
            while i < entries.len() && entries[i].0 == r {
                let c = entries[i].1;
                let mut v = entries[i].2;
                i += 1;
                while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                    v += entries[i].2;
                    i += 1;
                }
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Binary adjacency matrix of an unweighted graph.
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.n_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(2 * g.edge_count());
        row_ptr.push(0);
        for node in 0..n {
            col_idx.extend_from_slice(g.neighbors(node).expect("node in range"));
            row_ptr.push(col_idx.len());
        }
        let values = vec![1.0; col_idx.len()];
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sparsify a dense symmetric matrix, keeping nonzero off-diagonal
    /// entries (the diagonal is required to be zero).
    pub fn from_dense_symmetric(dense: ArrayView2<f64>) -> Result<Self> {
        let (rows, cols) = dense.dim();
        if rows != cols {
            return Err(Error::shape(format!("matrix is {rows}x{cols}, not square")));
        }
        for r in 0..rows {
            if dense[[r, r]] != 0.0 {
                return Err(Error::validation(format!("nonzero diagonal at {r}")));
            }
            for c in 0..r {
                if dense[[r, c]] != dense[[c, r]] {
                    return Err(Error::validation(format!(
                        "asymmetric entries at ({r}, {c})"
                    )));
                }
            }
        }
        let triplets = dense
            .indexed_iter()
            .filter(|&(_, &v)| v != 0.0)
            .map(|((r, c), &v)| (r, c, v));
        SparseMatrix::from_triplets(rows, triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Nonzero (column, value) pairs of row `r`, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Row sums (weighted degrees).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).map(|(_, v)| v).sum())
            .collect()
    }

    /// Sparse-sparse product `self * other`.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n != other.n {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.n, self.n, other.n, other.n
            )));
        }
        let n = self.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        // Dense accumulator reused across rows.
        let mut acc = vec![0.0f64; n];
        let mut seen = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..n {
            for (k, w1) in self.row(r) {
                for (c, w2) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += w1 * w2;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    col_idx.push(c);
                    values.push(acc[c]);
                }
                acc[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
            row_ptr[r + 1] = col_idx.len();
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Dense product `self * rhs` where `rhs` is `n x p`.
    pub fn mul_dense(&self, rhs: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.n, rhs.ncols()));
        self.add_scaled_mul_dense(1.0, rhs, &mut out.view_mut())?;
        Ok(out)
    }

    /// Accumulate `out += alpha * self * rhs`; the workhorse of the
    /// hop-aggregation forward/backward passes.
    pub fn add_scaled_mul_dense(
        &self,
        alpha: f64,
        rhs: ArrayView2<f64>,
        out: &mut ArrayViewMut2<f64>,
    ) -> Result<()> {
        if rhs.nrows() != self.n || out.nrows() != self.n || out.ncols() != rhs.ncols() {
            return Err(Error::shape(format!(
                "sparse {}x{} times dense {}x{} into {}x{}",
                self.n,
                self.n,
                rhs.nrows(),
                rhs.ncols(),
                out.nrows(),
                out.ncols()
            )));
        }
        for r in 0..self.n {
            let mut out_row = out.row_mut(r);
            for (c, v) in self.row(r) {
                out_row.scaled_add(alpha * v, &rhs.row(c));
            }
        }
        Ok(())
    }

    /// `trace(Y^T * self * Y)` without materializing the product.
    pub fn trace_quadratic(&self, y: ArrayView2<f64>) -> f64 {
        let mut total = 0.0;
        for r in 0..self.n {
            let yr = y.row(r);
            for (c, v) in self.row(r) {
                total += v * yr.dot(&y.row(c));
            }
        }
        total
    }

    /// Symmetric degree normalization `D^{-1/2} * self * D^{-1/2}`;
    /// zero-degree rows stay zero.
    pub fn sym_normalized(&self) -> SparseMatrix {
        let inv_sqrt: Vec<f64> = self
            .row_sums()
            .iter()
            .map(|&d| if d > 0.0 { d.sqrt().recip() } else { 0.0 })
            .collect();
        let mut out = self.clone();
        for r in 0..self.n {
            for k in out.row_ptr[r]..out.row_ptr[r + 1] {
                let c = out.col_idx[k];
                out.values[k] *= inv_sqrt[r] * inv_sqrt[c];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }
}

/// Hop powers `A_i^k` for a family of graphs sharing a node set, with
/// `k = 1..=k_hop`. `hop(i, 1)` is the adjacency of graph `i` itself.
#[derive(Debug, Clone)]
pub struct AdjacencyPowerSet {
    n_nodes: usize,
    k_hop: usize,
    /// `powers[i][k - 1]` is the k-th power of graph i's adjacency.
    powers: Vec<Vec<SparseMatrix>>,
}

impl AdjacencyPowerSet {
    /// Exact integer powers of unweighted adjacencies.
    pub fn from_graphs(graphs: &[Graph], k_hop: usize) -> Result<Self> {
        let bases: Vec<_> = graphs.iter().map(SparseMatrix::from_graph).collect();
        Self::from_matrices(bases, k_hop)
    }

    /// Like [`Self::from_graphs`], but each adjacency is symmetrically
    /// degree-normalized before the powers are taken.
    pub fn from_graphs_normalized(graphs: &[Graph], k_hop: usize) -> Result<Self> {
        let bases: Vec<_> = graphs
            .iter()
            .map(|g| SparseMatrix::from_graph(g).sym_normalized())
            .collect();
        Self::from_matrices(bases, k_hop)
    }

    /// Powers of arbitrary (e.g. noisy weighted) base matrices.
    pub fn from_matrices(bases: Vec<SparseMatrix>, k_hop: usize) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::validation("need at least one graph"));
        }
        if k_hop == 0 {
            return Err(Error::validation("hop depth must be at least 1"));
        }
        let n_nodes = bases[0].n();
        if let Some(bad) = bases.iter().find(|m| m.n() != n_nodes) {
            return Err(Error::shape(format!(
                "graphs disagree on node count: {} vs {}",
                n_nodes,
                bad.n()
            )));
        }
        let powers = bases
            .into_iter()
            .map(|base| -> Result<Vec<SparseMatrix>> {
                let mut chain = vec![base];
                for _ in 1..k_hop {
                    let next = chain.last().unwrap().matmul(&chain[0])?;
                    chain.push(next);
                }
                Ok(chain)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AdjacencyPowerSet {
            n_nodes,
            k_hop,
            powers,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn k_hop(&self) -> usize {
        self.k_hop
    }

    pub fn n_graphs(&self) -> usize {
        self.powers.len()
    }

    /// The `k`-hop power of graph `i`; `k` is 1-based.
    pub fn hop(&self, i: usize, k: usize) -> &SparseMatrix {
        &self.powers[i][k - 1]
    }

    /// The plain (1-hop) adjacency of graph `i`.
    pub fn base(&self, i: usize) -> &SparseMatrix {
        &self.powers[i][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path3() -> Graph {
        Graph::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn power_two_of_path() {
        let aps = AdjacencyPowerSet::from_graphs(&[path3()], 2).unwrap();
        let expected = array![[1.0, 0.0, 1.0], [0.0, 2.0, 0.0], [1.0, 0.0, 1.0]];
        assert_eq!(aps.hop(0, 2).to_dense(), expected);
    }

    #[test]
    fn first_power_is_adjacency() {
        let g = Graph::new(4, [(0, 1), (2, 3), (0, 3)]).unwrap();
        let aps = AdjacencyPowerSet::from_graphs(&[g.clone()], 1).unwrap();
        assert_eq!(aps.hop(0, 1).to_dense(), SparseMatrix::from_graph(&g).to_dense());
    }

    #[test]
    fn powers_of_edgeless_graph_are_zero() {
        let aps = AdjacencyPowerSet::from_graphs(&[Graph::empty(4)], 3).unwrap();
        for k in 1..=3 {
            assert_eq!(aps.hop(0, k).nnz(), 0);
        }
    }

    #[test]
    fn mismatched_node_counts_rejected() {
        let err = AdjacencyPowerSet::from_graphs(&[Graph::empty(3), Graph::empty(4)], 1);
        assert!(err.is_err());
    }

    #[test]
    fn mul_dense_matches_dense_product() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap();
        let s = SparseMatrix::from_graph(&g);
        let x = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0], [-2.0, 4.0]];
        let got = s.mul_dense(x.view()).unwrap();
        let want = s.to_dense().dot(&x);
        assert_eq!(got, want);
    }

    #[test]
    fn trace_quadratic_matches_dense() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let s = SparseMatrix::from_graph(&g);
        let y = array![[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]];
        let dense = y.t().dot(&s.to_dense()).dot(&y);
        let want = dense.diag().sum();
        assert!((s.trace_quadratic(y.view()) - want).abs() < 1e-12);
    }

    #[test]
    fn sym_normalized_rows() {
        let g = path3();
        let s = SparseMatrix::from_graph(&g).sym_normalized();
        // Degrees are (1, 2, 1): entry (0,1) becomes 1/sqrt(1*2).
        assert!((s.get(0, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(s.is_symmetric());
    }

    #[test]
    fn from_triplets_sums_duplicates() {
        let m =
            SparseMatrix::from_triplets(2, [(0, 1, 1.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.nnz(), 2);
    }
}
