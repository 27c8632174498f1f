//! Eigendecomposition, spectral similarity and structured perturbations.

mod perturbation;
mod similarity;

pub use perturbation::{
    perturb_additive, perturb_combined, perturb_relative, random_additive, random_relative,
    random_symmetric, relative_bound_general, PerturbationKind, Perturbed,
};
pub use similarity::{
    eigenvalue_similarity, sandwich_min_eigenvalues, satisfies_eigenvalue_sandwich,
    spectral_similarity, SimilarityReport, CERTIFY_TOL,
};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gso::{ShiftOperator, PSD_TOL};

/// Eigenpairs of a symmetric matrix, ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub zero_multiplicity: usize,
    pub zero_tol: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn op_norm(&self) -> f64 {
        self.lambda_min().abs().max(self.lambda_max().abs())
    }

    /// Smallest eigenvalue above the zero tolerance, if any.
    pub fn lambda_bar(&self) -> Option<f64> {
        self.eigenvalues.iter().copied().find(|&l| l > self.zero_tol)
    }

    pub fn is_psd(&self) -> bool {
        self.lambda_min() >= -PSD_TOL * self.lambda_max().max(f64::MIN_POSITIVE)
    }

    fn is_zero(&self, l: f64) -> bool {
        l.abs() <= self.zero_tol
    }

    /// Indices of eigenpairs outside the kernel.
    pub fn range_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.is_zero(self.eigenvalues[i]))
            .collect()
    }

    pub fn kernel_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.is_zero(self.eigenvalues[i]))
            .collect()
    }

    pub fn kernel_basis(&self) -> DMatrix<f64> {
        self.eigenvectors.select_columns(&self.kernel_indices())
    }

    pub fn range_basis(&self) -> DMatrix<f64> {
        self.eigenvectors.select_columns(&self.range_indices())
    }

    /// Orthogonal projector onto the range.
    pub fn range_projector(&self) -> DMatrix<f64> {
        let u = self.range_basis();
        &u * u.transpose()
    }
}

/// Kernel detection threshold `1e-9 · max(1, λ_max)`.
pub fn zero_tolerance(lambda_max: f64) -> f64 {
    1e-9 * lambda_max.max(1.0)
}

/// Eigendecomposition of an already symmetric matrix.
pub(crate) fn eigendecompose_matrix(m: &DMatrix<f64>) -> Spectrum {
    let n = m.nrows();
    if n == 0 {
        return Spectrum {
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
            zero_multiplicity: 0,
            zero_tol: zero_tolerance(0.0),
        };
    }
    let canon = canonical_order(m);
    let sorted = eigendecompose_in_order(&reorder(m, &canon));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (a, &i) in canon.iter().enumerate() {
        eigenvectors.set_row(i, &sorted.eigenvectors.row(a));
    }
    Spectrum {
        eigenvectors,
        ..sorted
    }
}

/// Eigendecomposition of a nonempty symmetric matrix in its given index order.
pub(crate) fn eigendecompose_in_order(m: &DMatrix<f64>) -> Spectrum {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = eig.eigenvectors.select_columns(&order);
    let zero_tol = zero_tolerance(*eigenvalues.last().unwrap());
    let zero_multiplicity = eigenvalues.iter().filter(|l| l.abs() <= zero_tol).count();
    Spectrum {
        eigenvalues,
        eigenvectors,
        zero_multiplicity,
        zero_tol,
    }
}

/// Entry of a stack of matrices at one position, compared lexicographically.
type Entry = [f64; 2];

fn cmp_entry(a: &Entry, b: &Entry) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

type Signature = (usize, Entry, Vec<(Entry, usize)>);

fn cmp_signature(a: &Signature, b: &Signature) -> std::cmp::Ordering {
    a.0.cmp(&b.0)
        .then(cmp_entry(&a.1, &b.1))
        .then(a.2.len().cmp(&b.2.len()))
        .then_with(|| {
            a.2.iter()
                .zip(&b.2)
                .map(|(x, y)| cmp_entry(&x.0, &y.0).then(x.1.cmp(&y.1)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// Refines `colour` until stable: an index's new colour ranks its old colour,
/// its diagonal entry and the multiset of (entry, colour) over its nonzero
/// off-diagonal entries. Returns the number of colours.
fn refine(rows: &[Vec<(usize, Entry)>], diag: &[Entry], colour: &mut [usize]) -> usize {
    let n = colour.len();
    let mut classes = colour.iter().collect::<std::collections::BTreeSet<_>>().len();
    loop {
        let sigs: Vec<Signature> = (0..n)
            .map(|i| {
                let mut row: Vec<(Entry, usize)> = rows[i].iter().map(|&(j, v)| (v, colour[j])).collect();
                row.sort_by(|a, b| cmp_entry(&a.0, &b.0).then(a.1.cmp(&b.1)));
                (colour[i], diag[i], row)
            })
            .collect();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| cmp_signature(&sigs[a], &sigs[b]));
        let mut c = 0;
        for w in 0..n {
            if w > 0 && cmp_signature(&sigs[idx[w - 1]], &sigs[idx[w]]).is_ne() {
                c += 1;
            }
            colour[idx[w]] = c;
        }
        let refined = if n == 0 { 0 } else { c + 1 };
        if refined == classes {
            return refined;
        }
        classes = refined;
    }
}

/// Nonzero off-diagonal entries per row and the diagonal of `a` stacked with
/// `b` (zero when absent).
fn sparse_rows(a: &DMatrix<f64>, b: Option<&DMatrix<f64>>) -> (Vec<Vec<(usize, Entry)>>, Vec<Entry>) {
    let n = a.nrows();
    let at = |i: usize, j: usize| [a[(i, j)], b.map_or(0.0, |b| b[(i, j)])];
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && at(i, j) != [0.0, 0.0])
                .map(|j| (j, at(i, j)))
                .collect()
        })
        .collect();
    (rows, (0..n).map(|i| at(i, i)).collect())
}

/// Colour refinement of a symmetric matrix. The colours depend only on the
/// matrix up to simultaneous row/column permutation.
pub fn refined_colours(m: &DMatrix<f64>) -> Vec<usize> {
    let (rows, diag) = sparse_rows(m, None);
    let mut colour = vec![0; m.nrows()];
    refine(&rows, &diag, &mut colour);
    colour
}

fn canonical_order_of(a: &DMatrix<f64>, b: Option<&DMatrix<f64>>) -> Vec<usize> {
    let n = a.nrows();
    let (rows, diag) = sparse_rows(a, b);
    let mut colour = vec![0; n];
    let mut classes = refine(&rows, &diag, &mut colour);
    while classes < n {
        let mut size = vec![0usize; classes];
        colour.iter().for_each(|&c| size[c] += 1);
        let tied = size.iter().position(|&s| s > 1).unwrap();
        let pick = colour.iter().position(|&c| c == tied).unwrap();
        for (i, c) in colour.iter_mut().enumerate() {
            *c = 2 * *c + (*c == tied && i != pick) as usize;
        }
        classes = refine(&rows, &diag, &mut colour);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| colour[i]);
    order
}

/// A labelling of the indices of a symmetric matrix obtained by colour
/// refinement, individualizing the lowest index of the first tied colour
/// class until every class is a singleton.
///
/// Eigensolvers are not permutation invariant bit for bit; running them in
/// this order makes results for `PMPᵀ` and `M` identical whenever each
/// individualized class is a single orbit of the matrix's automorphisms.
pub fn canonical_order(m: &DMatrix<f64>) -> Vec<usize> {
    canonical_order_of(m, None)
}

/// [`canonical_order`] of the pair `(a, b)` under simultaneous relabelling.
pub fn joint_canonical_order(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<usize> {
    canonical_order_of(a, Some(b))
}

/// `M[order, order]`.
pub fn reorder(m: &DMatrix<f64>, order: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(order.len(), order.len(), |a, b| m[(order[a], order[b])])
}

/// Ascending eigenvalues of a symmetric matrix, without eigenvectors.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn symmetric_op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |a, l| a.max(l.abs()))
}

/// The spectrum cached on `s`.
pub fn eigendecompose(s: &ShiftOperator) -> &Spectrum {
    s.spectrum()
}

/// Eigendecomposition of an arbitrary square matrix, rejecting asymmetry
/// beyond `1e-10 · ‖M‖_op`.
pub fn eigendecompose_checked(m: &DMatrix<f64>) -> Result<Spectrum> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let sym = crate::gso::symmetrize(m);
    let spectrum = eigendecompose_matrix(&sym);
    let asymmetry = (m - &sym).norm();
    let tolerance = crate::gso::SYMMETRY_TOL * spectrum.op_norm();
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    Ok(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_pairs(m: &DMatrix<f64>, s: &Spectrum) {
        let norm = s.op_norm().max(1.0);
        for (i, &l) in s.eigenvalues.iter().enumerate() {
            let v = s.eigenvectors.column(i);
            assert!((m * v - v * l).norm() <= 1e-8 * norm);
        }
        let gram = s.eigenvectors.transpose() * &s.eigenvectors;
        assert!((gram - DMatrix::identity(m.nrows(), m.nrows())).amax() <= 1e-8);
    }

    #[test]
    fn identity() {
        let s = eigendecompose_checked(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.zero_multiplicity, 0);
    }

    #[test]
    fn all_ones_two_by_two() {
        let m = DMatrix::from_element(2, 2, 1.0);
        let s = eigendecompose_checked(&m).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-15 && (s.eigenvalues[1] - 2.0).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = s.eigenvectors.column(0);
        let v1 = s.eigenvectors.column(1);
        assert!((v0[0].abs() - r).abs() < 1e-15 && (v0[0] + v0[1]).abs() < 1e-15);
        assert!((v1[0].abs() - r).abs() < 1e-15 && (v1[0] - v1[1]).abs() < 1e-15);
        assert_eq!(s.zero_multiplicity, 1);
        assert_eq!(s.lambda_bar(), Some(s.eigenvalues[1]));
        check_pairs(&m, &s);
    }

    #[test]
    fn diagonal_sorted() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let s = eigendecompose_checked(&m).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
        check_pairs(&m, &s);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(eigendecompose_checked(&m).is_err());
        assert!(eigendecompose_checked(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn bases_split_space() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 2.0, 0.0, 1.0]));
        let s = eigendecompose_checked(&m).unwrap();
        assert_eq!(s.kernel_basis().ncols(), 2);
        assert_eq!(s.range_basis().ncols(), 2);
        let p = s.range_projector();
        assert!((&p * &p - &p).amax() < 1e-14);
    }
}
