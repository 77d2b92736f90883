/// Row-stochastic sparse matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

impl Transition {
    /// Builds from symmetric weighted edges over `n` nodes. Each edge weight
    /// is applied in both directions, rows are normalized, and rows without
    /// edges become a self-loop.
    pub fn from_weighted_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            rows[u].push((v as u32, w));
            rows[v].push((u as u32, w));
        }
        Self::from_rows(rows)
    }

    /// Normalizes arbitrary non-negative rows; empty or zero-sum rows become self-loops.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(t, _)| t);
            let sum: f64 = row.iter().map(|&(_, w)| w).sum();
            if row.is_empty() || sum.is_nan() || sum <= 0.0 {
                targets.push(i as u32);
                probs.push(1.0);
            } else {
                for (t, w) in row {
                    targets.push(t);
                    probs.push(w / sum);
                }
            }
            offsets.push(targets.len());
        }
        Transition { offsets, targets, probs }
    }

    pub fn from_dense(matrix: &[Vec<f64>]) -> Self {
        let rows = matrix
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(j, &w)| (j as u32, w))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.probs[range])
            .map(|(&t, &p)| (t as usize, p))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, p)| p).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                for (j, p) in self.row(i) {
                    r[j] += p;
                }
                r
            })
            .collect()
    }
}
