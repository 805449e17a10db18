//! Normalized graph Laplacian, symmetric eigendecomposition, and the
//! spectrum-derived uncertainty/confidence measures.
//!
//! The Laplacian is L = I − D^{-1/2} W D^{-1/2} over the symmetrized
//! similarity matrix W. Self-similarity sits on W's diagonal and is included
//! in the degree sums, so every degree is at least 1 and D^{-1/2} always
//! exists. Its eigenvalues live in [0, 2]; the number of (near-)zero
//! eigenvalues counts the graph's connected components, which is what the
//! EigV measure relaxes.

use std::fmt;

use thiserror::Error;

use crate::matrix::{kahan_sum, KahanSum, SquareMatrix};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("Jacobi sweep limit ({sweeps}) reached with off-diagonal residual {residual:e}")]
    NotConverged { sweeps: usize, residual: f64 },
}

/// Off-diagonal magnitude at which a sweep is considered converged.
const JACOBI_TOLERANCE: f64 = 1e-12;
/// Hard cap on full sweeps; cyclic Jacobi on these sizes converges in well
/// under ten.
const MAX_SWEEPS: usize = 50;

/// Normalized Laplacian and the degree diagonal it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub matrix: SquareMatrix,
    pub degrees: Vec<f64>,
}

/// Build L = I − D^{-1/2} W D^{-1/2} from a symmetric similarity matrix with
/// unit diagonal. The result is re-symmetrized by averaging with its
/// transpose to kill rounding skew.
pub fn laplacian(w: &SquareMatrix) -> Laplacian {
    let m = w.dim();
    let degrees: Vec<f64> = (0..m)
        .map(|i| kahan_sum((0..m).map(|j| w[(i, j)])))
        .collect();
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut l = SquareMatrix::from_fn(m, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]
    });
    l.symmetrize();
    Laplacian { matrix: l, degrees }
}

/// Ascending eigenvalues of the Laplacian with orthonormal eigenvector
/// columns aligned to them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<f64>,
    /// Column i is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: SquareMatrix,
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with eigenvector columns permuted
/// in lockstep, each column's largest-magnitude component made positive so
/// the basis is deterministic. No eigenvalue clamping happens here.
pub fn jacobi_eigendecomposition(
    matrix: &SquareMatrix,
) -> Result<(Vec<f64>, SquareMatrix), SpectralError> {
    let n = matrix.dim();
    let mut a = matrix.clone();
    let mut v = SquareMatrix::identity(n);
    if n > 1 {
        let mut converged = false;
        for _sweep in 0..MAX_SWEEPS {
            if a.max_abs_off_diagonal() <= JACOBI_TOLERANCE {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
        if !converged && a.max_abs_off_diagonal() > JACOBI_TOLERANCE {
            return Err(SpectralError::NotConverged {
                sweeps: MAX_SWEEPS,
                residual: a.max_abs_off_diagonal(),
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = SquareMatrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        let column = v.column(old_col);
        let flip = needs_flip(&column);
        for row in 0..n {
            eigenvectors[(row, new_col)] = if flip { -column[row] } else { column[row] };
        }
    }
    Ok((eigenvalues, eigenvectors))
}

/// One Jacobi rotation annihilating a[(p, q)].
fn rotate(a: &mut SquareMatrix, v: &mut SquareMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let scale = a[(p, p)].abs() + a[(q, q)].abs() + 1.0;
    if apq.abs() < 1e-30 * scale {
        // Negligible relative to the diagonal; zeroing it directly avoids
        // overflow in the rotation angle.
        a[(p, q)] = 0.0;
        a[(q, p)] = 0.0;
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let app = a[(p, p)];
    let aqq = a[(q, q)];
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    let n = a.dim();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(p, k)] = a[(k, p)];
        a[(k, q)] = s * akp + c * akq;
        a[(q, k)] = a[(k, q)];
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn needs_flip(column: &[f64]) -> bool {
    let mut max_idx = 0;
    let mut max_abs = f64::NEG_INFINITY;
    for (i, &x) in column.iter().enumerate() {
        if x.abs() > max_abs {
            max_abs = x.abs();
            max_idx = i;
        }
    }
    column[max_idx] < 0.0
}

/// Decompose a Laplacian and clamp its eigenvalues into the theoretical
/// [0, 2] range (rounding can push them out by ~1e-15).
pub fn eigen_decompose(l: &Laplacian) -> Result<SpectralSummary, SpectralError> {
    let (mut eigenvalues, eigenvectors) = jacobi_eigendecomposition(&l.matrix)?;
    for value in &mut eigenvalues {
        *value = value.clamp(0.0, 2.0);
    }
    Ok(SpectralSummary {
        eigenvalues,
        eigenvectors,
    })
}

/// Which uncertainty/confidence construction produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasureKind {
    NumSet,
    EigV,
    Deg,
    Ecc,
    LexiSim,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MeasureKind::NumSet => "NumSet",
            MeasureKind::EigV => "EigV",
            MeasureKind::Deg => "Deg",
            MeasureKind::Ecc => "Ecc",
            MeasureKind::LexiSim => "LexiSim",
        };
        f.write_str(name)
    }
}

/// An uncertainty value plus, for confidence-capable measures, one
/// confidence per response.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureScores {
    pub measure: MeasureKind,
    pub u: f64,
    pub c: Option<Vec<f64>>,
}

/// Continuous semantic-set count: the sum of max(0, 1 − λ) over the
/// spectrum. Uncertainty only.
pub fn u_eigv(summary: &SpectralSummary) -> MeasureScores {
    let u = kahan_sum(
        summary
            .eigenvalues
            .iter()
            .map(|&lambda| (1.0 - lambda).max(0.0)),
    );
    MeasureScores {
        measure: MeasureKind::EigV,
        u,
        c: None,
    }
}

/// Degree-based scores: U is the mean normalized distance
/// trace(m·I − D)/m², and each response's confidence is its normalized
/// degree D_jj/m.
pub fn deg_scores(l: &Laplacian) -> MeasureScores {
    let m = l.degrees.len() as f64;
    let u = kahan_sum(l.degrees.iter().map(|&d| m - d)) / (m * m);
    let c = l.degrees.iter().map(|&d| d / m).collect();
    MeasureScores {
        measure: MeasureKind::Deg,
        u,
        c: Some(c),
    }
}

/// Spectral embedding of the m responses into the k smallest eigenvector
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EccEmbedding {
    pub k: usize,
    /// One k-dimensional coordinate vector per response.
    pub coords: Vec<Vec<f64>>,
}

/// Embed responses using the eigenvectors whose eigenvalues are at most
/// `threshold`. k never drops below 1, even when no eigenvalue clears the
/// threshold.
pub fn ecc_embed(summary: &SpectralSummary, threshold: f64) -> EccEmbedding {
    let m = summary.eigenvalues.len();
    let k = summary
        .eigenvalues
        .iter()
        .filter(|&&lambda| lambda <= threshold)
        .count()
        .max(1);
    let coords = (0..m)
        .map(|j| (0..k).map(|i| summary.eigenvectors[(j, i)]).collect())
        .collect();
    EccEmbedding { k, coords }
}

/// Eccentricity scores: center the embeddings, U is the Euclidean norm of
/// all offsets concatenated, and each response's confidence is the negated
/// norm of its own offset.
pub fn ecc_scores(embedding: &EccEmbedding) -> MeasureScores {
    let m = embedding.coords.len();
    let k = embedding.k;
    let mut center = vec![0.0; k];
    for dim in 0..k {
        let mut acc = KahanSum::new();
        for coords in &embedding.coords {
            acc.add(coords[dim]);
        }
        center[dim] = acc.value() / m as f64;
    }
    let mut total = KahanSum::new();
    let mut c = Vec::with_capacity(m);
    for coords in &embedding.coords {
        let mut own = KahanSum::new();
        for dim in 0..k {
            let offset = coords[dim] - center[dim];
            own.add(offset * offset);
        }
        total.add(own.value());
        c.push(-own.value().sqrt());
    }
    MeasureScores {
        measure: MeasureKind::Ecc,
        u: total.value().sqrt(),
        c: Some(c),
    }
}
