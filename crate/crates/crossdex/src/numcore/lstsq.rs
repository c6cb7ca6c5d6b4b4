use super::{NumError, Tensor};

/// Behavior when the design matrix is rank-deficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ridge {
    /// Fail with [`NumError::SingularMatrix`].
    Disabled,
    /// Fall back to Cholesky on `XᵀX + λI` with a small scaled jitter.
    Auto,
}

/// Relative jitter applied to the diagonal of `XᵀX` on the ridge path.
/// Scaled by `trace(XᵀX)/p` so it works at raw index magnitudes as well
/// as on normalized data.
const RIDGE_LAMBDA: f64 = 1e-8;

/// Diagonal entries of R below `RANK_TOL * max|R_jj|` mark the matrix
/// near-singular.
const RANK_TOL: f64 = 1e-10;

/// Minimizes `‖XW − Y‖²` columnwise via Householder QR.
///
/// `x` is `[n, p]`, `y` is `[n, q]`; the result is `[p, q]`. When `x`
/// is rank-deficient (or has fewer rows than columns) the ridge
/// fallback solves `(XᵀX + λI) W = XᵀY` instead, or errors if disabled.
pub fn solve_least_squares(x: &Tensor, y: &Tensor, ridge: Ridge) -> Result<Tensor, NumError> {
    assert!(
        x.rank() == 2 && y.rank() == 2,
        "solve_least_squares: matrices required"
    );
    if x.rows() != y.rows() {
        return Err(NumError::DimensionMismatch {
            context: "solve_least_squares: X and Y row counts",
            left: x.shape().to_vec(),
            right: y.shape().to_vec(),
        });
    }
    let (n, p) = (x.rows(), x.cols());
    if n < p {
        return match ridge {
            Ridge::Auto => ridge_solve(x, y),
            Ridge::Disabled => Err(NumError::SingularMatrix {
                pivot: 0.0,
                column: n,
            }),
        };
    }
    match qr_solve(x, y) {
        Ok(w) => Ok(w),
        Err(NumError::SingularMatrix { pivot, column }) => match ridge {
            Ridge::Auto => ridge_solve(x, y),
            Ridge::Disabled => Err(NumError::SingularMatrix { pivot, column }),
        },
        Err(e) => Err(e),
    }
}

fn qr_solve(x: &Tensor, y: &Tensor) -> Result<Tensor, NumError> {
    let (n, p) = (x.rows(), x.cols());
    let q = y.cols();
    let mut a = x.data().to_vec(); // working copy, becomes R + reflectors
    let mut b = y.data().to_vec();
    let mut diag = vec![0.0; p];

    for j in 0..p {
        // Householder vector for column j, rows j..n.
        let mut norm = 0.0;
        for i in j..n {
            norm += a[i * p + j] * a[i * p + j];
        }
        let norm = norm.sqrt();
        let alpha = if a[j * p + j] >= 0.0 { -norm } else { norm };
        diag[j] = alpha;

        let mut v = vec![0.0; n - j];
        v[0] = a[j * p + j] - alpha;
        for i in j + 1..n {
            v[i - j] = a[i * p + j];
        }
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            // Apply H = I - 2vvᵀ/(vᵀv) to remaining columns of A and to B.
            for col in j + 1..p {
                let mut dot = 0.0;
                for i in j..n {
                    dot += v[i - j] * a[i * p + col];
                }
                let f = 2.0 * dot / vnorm2;
                for i in j..n {
                    a[i * p + col] -= f * v[i - j];
                }
            }
            for col in 0..q {
                let mut dot = 0.0;
                for i in j..n {
                    dot += v[i - j] * b[i * q + col];
                }
                let f = 2.0 * dot / vnorm2;
                for i in j..n {
                    b[i * q + col] -= f * v[i - j];
                }
            }
        }
        a[j * p + j] = alpha;
        for i in j + 1..n {
            a[i * p + j] = 0.0;
        }
    }

    let max_diag = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    for (j, d) in diag.iter().enumerate() {
        if d.abs() <= RANK_TOL * max_diag || *d == 0.0 {
            return Err(NumError::SingularMatrix {
                pivot: *d,
                column: j,
            });
        }
    }

    // Back-substitute R W = (QᵀY) upper rows.
    let mut w = vec![0.0; p * q];
    for col in 0..q {
        for j in (0..p).rev() {
            let mut acc = b[j * q + col];
            for l in j + 1..p {
                acc -= a[j * p + l] * w[l * q + col];
            }
            w[j * q + col] = acc / a[j * p + j];
        }
    }
    Ok(Tensor::from_vec(vec![p, q], w))
}

fn ridge_solve(x: &Tensor, y: &Tensor) -> Result<Tensor, NumError> {
    let (n, p) = (x.rows(), x.cols());
    let q = y.cols();
    // Form XᵀX and XᵀY.
    let xd = x.data();
    let yd = y.data();
    let mut xtx = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for k in 0..n {
                acc += xd[k * p + i] * xd[k * p + j];
            }
            xtx[i * p + j] = acc;
            xtx[j * p + i] = acc;
        }
    }
    let xty = xt_times(xd, yd, n, p, q);
    let trace: f64 = (0..p).map(|i| xtx[i * p + i]).sum();
    let lambda = RIDGE_LAMBDA * (trace / p as f64).max(1.0);
    for i in 0..p {
        xtx[i * p + i] += lambda;
    }

    // Cholesky factorization, in place (lower triangle).
    for i in 0..p {
        for j in 0..=i {
            let mut acc = xtx[i * p + j];
            for k in 0..j {
                acc -= xtx[i * p + k] * xtx[j * p + k];
            }
            if i == j {
                if acc <= 0.0 {
                    return Err(NumError::SingularMatrix {
                        pivot: acc,
                        column: i,
                    });
                }
                xtx[i * p + j] = acc.sqrt();
            } else {
                xtx[i * p + j] = acc / xtx[j * p + j];
            }
        }
    }

    let mut w = cholesky_solve(&xtx, &xty, p, q);

    // Iterative refinement strips the λ bias: each pass multiplies the
    // ridge-induced error by λ/(σ²+λ), converging to the minimum-norm
    // least-squares solution.
    for _ in 0..4 {
        let mut resid = vec![0.0; n * q];
        for k in 0..n {
            for col in 0..q {
                let mut pred = 0.0;
                for l in 0..p {
                    pred += xd[k * p + l] * w[l * q + col];
                }
                resid[k * q + col] = yd[k * q + col] - pred;
            }
        }
        let rhs = xt_times(xd, &resid, n, p, q);
        let delta = cholesky_solve(&xtx, &rhs, p, q);
        for (wi, di) in w.iter_mut().zip(&delta) {
            *wi += di;
        }
    }
    Ok(Tensor::from_vec(vec![p, q], w))
}

fn xt_times(xd: &[f64], yd: &[f64], n: usize, p: usize, q: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * q];
    for i in 0..p {
        for j in 0..q {
            let mut acc = 0.0;
            for k in 0..n {
                acc += xd[k * p + i] * yd[k * q + j];
            }
            out[i * q + j] = acc;
        }
    }
    out
}

/// Solves with a pre-computed lower-triangular Cholesky factor.
fn cholesky_solve(l: &[f64], rhs: &[f64], p: usize, q: usize) -> Vec<f64> {
    let mut w = vec![0.0; p * q];
    for col in 0..q {
        let mut z = vec![0.0; p];
        for i in 0..p {
            let mut acc = rhs[i * q + col];
            for k in 0..i {
                acc -= l[i * p + k] * z[k];
            }
            z[i] = acc / l[i * p + i];
        }
        for i in (0..p).rev() {
            let mut acc = z[i];
            for k in i + 1..p {
                acc -= l[k * p + i] * w[k * q + col];
            }
            w[i * q + col] = acc / l[i * p + i];
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exact_single_column_fit() {
        let x = Tensor::matrix(2, 1, vec![1.0, 2.0]);
        let y = Tensor::matrix(2, 1, vec![2.0, 4.0]);
        let w = solve_least_squares(&x, &y, Ridge::Disabled).unwrap();
        assert!((w.data()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_design_returns_targets() {
        let mut x = Tensor::zeros(vec![4, 4]);
        for i in 0..4 {
            x.set(i, i, 1.0);
        }
        let y = Tensor::matrix(4, 2, (0..8).map(|v| v as f64).collect());
        let w = solve_least_squares(&x, &y, Ridge::Disabled).unwrap();
        for (a, b) in w.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_is_orthogonal_to_design() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(42);
        let (n, p, q) = (50, 5, 3);
        let x = Tensor::matrix(n, p, (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let y = Tensor::matrix(n, q, (0..n * q).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let w = solve_least_squares(&x, &y, Ridge::Disabled).unwrap();

        // XᵀY and Xᵀ(Y − XW) by hand.
        let mut xty_max: f64 = 0.0;
        let mut resid_max: f64 = 0.0;
        for i in 0..p {
            for j in 0..q {
                let mut xty = 0.0;
                let mut xtr = 0.0;
                for k in 0..n {
                    let mut pred = 0.0;
                    for l in 0..p {
                        pred += x.at(k, l) * w.at(l, j);
                    }
                    xty += x.at(k, i) * y.at(k, j);
                    xtr += x.at(k, i) * (y.at(k, j) - pred);
                }
                xty_max = xty_max.max(xty.abs());
                resid_max = resid_max.max(xtr.abs());
            }
        }
        assert!(resid_max < 1e-8 * xty_max, "resid {resid_max} vs {xty_max}");
    }

    #[test]
    fn row_permutation_leaves_solution_unchanged() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        let (n, p) = (20, 4);
        let xd: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let yd: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = Tensor::matrix(n, p, xd.clone());
        let y = Tensor::matrix(n, 1, yd.clone());
        let w1 = solve_least_squares(&x, &y, Ridge::Disabled).unwrap();

        // Reverse the row order.
        let mut xr = Vec::new();
        let mut yr = Vec::new();
        for i in (0..n).rev() {
            xr.extend_from_slice(&xd[i * p..(i + 1) * p]);
            yr.push(yd[i]);
        }
        let w2 = solve_least_squares(
            &Tensor::matrix(n, p, xr),
            &Tensor::matrix(n, 1, yr),
            Ridge::Disabled,
        )
        .unwrap();
        for (a, b) in w1.data().iter().zip(w2.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_without_ridge_errors() {
        // Two identical columns.
        let x = Tensor::matrix(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]);
        let err = solve_least_squares(&x, &y, Ridge::Disabled).unwrap_err();
        assert!(matches!(err, NumError::SingularMatrix { .. }));
    }

    #[test]
    fn rank_deficient_with_ridge_still_fits_consistent_targets() {
        let x = Tensor::matrix(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = Tensor::matrix(3, 1, vec![2.0, 4.0, 6.0]);
        let w = solve_least_squares(&x, &y, Ridge::Auto).unwrap();
        for i in 0..3 {
            let pred = x.at(i, 0) * w.data()[0] + x.at(i, 1) * w.data()[1];
            assert!((pred - y.data()[0] * (i as f64 + 1.0)).abs() < 1e-5);
        }
    }

    #[test]
    fn underdetermined_system_uses_ridge() {
        // More columns than rows: only solvable through the fallback.
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
        let x = Tensor::matrix(3, 5, (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let y = Tensor::matrix(3, 1, vec![0.5, -0.25, 1.0]);
        assert!(solve_least_squares(&x, &y, Ridge::Disabled).is_err());
        let w = solve_least_squares(&x, &y, Ridge::Auto).unwrap();
        for i in 0..3 {
            let mut pred = 0.0;
            for j in 0..5 {
                pred += x.at(i, j) * w.data()[j];
            }
            assert!((pred - y.data()[i]).abs() < 1e-4);
        }
    }
}
