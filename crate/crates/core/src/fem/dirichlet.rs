use crate::fem::sparse::CsrMatrix;

/// Symmetric elimination of homogeneous Dirichlet dofs.
#[derive(Debug, Clone)]
pub struct DirichletMap {
    n_full: usize,
    free: Vec<usize>,
    full_to_free: Vec<Option<usize>>,
}

impl DirichletMap {
    /// `dirichlet` may be unsorted and contain duplicates.
    pub fn new(n_full: usize, dirichlet: &[usize]) -> Self {
        let mut fixed = vec![false; n_full];
        for &d in dirichlet {
            fixed[d] = true;
        }
        let mut full_to_free = vec![None; n_full];
        let mut free = Vec::with_capacity(n_full);
        for i in 0..n_full {
            if !fixed[i] {
                full_to_free[i] = Some(free.len());
                free.push(i);
            }
        }
        DirichletMap { n_full, free, full_to_free }
    }

    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn full_to_free(&self) -> &[Option<usize>] {
        &self.full_to_free
    }

    pub fn reduce_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_full);
        self.free.iter().map(|&i| x[i]).collect()
    }

    /// Re-expands a reduced vector with exact zeros on the Dirichlet dofs.
    pub fn expand_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_free());
        let mut out = vec![0.0; self.n_full];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    /// Principal submatrix on the free dofs.
    pub fn reduce_square(&self, a: &CsrMatrix) -> CsrMatrix {
        a.select(&self.full_to_free, self.n_free(), &self.full_to_free, self.n_free())
    }

    /// Keeps all rows, drops Dirichlet columns (e.g. the divergence matrix).
    pub fn reduce_cols(&self, a: &CsrMatrix) -> CsrMatrix {
        let rows: Vec<Option<usize>> = (0..a.nrows()).map(Some).collect();
        a.select(&rows, a.nrows(), &self.full_to_free, self.n_free())
    }

    /// Keeps all columns, drops Dirichlet rows.
    pub fn reduce_rows(&self, a: &CsrMatrix) -> CsrMatrix {
        let cols: Vec<Option<usize>> = (0..a.ncols()).map(Some).collect();
        a.select(&self.full_to_free, self.n_free(), &cols, a.ncols())
    }
}

/// Operator form of the elimination: the reduced matrix together with the map needed
/// to re-expand solutions.
pub fn apply_dirichlet(a: &CsrMatrix, dirichlet: &[usize]) -> (CsrMatrix, DirichletMap) {
    let map = DirichletMap::new(a.nrows(), dirichlet);
    (map.reduce_square(a), map)
}
