//! Symmetric tridiagonal eigensolver: implicit QL with Wilkinson shifts,
//! the classic EISPACK tql2 / Numerical Recipes tqli scheme. The master
//! operator similarity-transforms to a symmetric tridiagonal matrix, so
//! this one routine covers every spectral need in the library.

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric tridiagonal matrix. `values` holds all
/// eigenvalues sorted in descending order; `vectors[i]` (when requested) is
/// the orthonormal eigenvector paired with `values[i]`.
#[derive(Clone, Debug)]
pub struct SymTridiagEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<Vec<f64>>>,
}

/// Diagonalizes the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `offdiag` (length one less). Accumulating eigenvectors
/// costs O(n^3) instead of O(n^2), so they are opt-in.
pub fn sym_tridiag_eigen(
    diag: &[f64],
    offdiag: &[f64],
    want_vectors: bool,
) -> Result<SymTridiagEigen> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot diagonalize an empty matrix".to_string(),
        ));
    }
    if offdiag.len() + 1 != n {
        return Err(Error::InvalidArgument(format!(
            "off-diagonal length {} does not match dimension {}",
            offdiag.len(),
            n
        )));
    }
    if diag.iter().chain(offdiag.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix entries must be finite".to_string(),
        ));
    }

    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0); // sentinel so e[m] is addressable at m = n-1

    // z[k][j]: component k of the j-th accumulated vector
    let mut z: Option<Vec<Vec<f64>>> = if want_vectors {
        let mut ident = vec![vec![0.0; n]; n];
        for (k, row) in ident.iter_mut().enumerate() {
            row[k] = 1.0;
        }
        Some(ident)
    } else {
        None
    };

    for l in 0..n {
        let mut iter = 0;
        loop {
            // locate the first negligible off-diagonal element at or past l
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(Error::InvalidArgument(format!(
                    "QL iteration failed to converge at index {l}"
                )));
            }

            // Wilkinson shift from the trailing 2x2 of the active block
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0_f64;
            let mut underflow = false;

            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // deflate: the rotation chain annihilated early
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_mut() {
                    for zk in z.iter_mut() {
                        f = zk[i + 1];
                        zk[i + 1] = s * zk[i] + c * f;
                        zk[i] = c * zk[i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // sort eigenvalues descending, carrying vectors along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    let vectors = z.map(|z| {
        order
            .iter()
            .map(|&j| (0..n).map(|k| z[k][j]).collect())
            .collect()
    });

    Ok(SymTridiagEigen { values, vectors })
}
