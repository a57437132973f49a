//! Small dense complex linear algebra kernel: matrix exponential/logarithm,
//! Birkhoff (Gauss) factorization into triangular factors, finite differences.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C = Complex64;
pub type CMat = DMatrix<C>;
pub type CVec = nalgebra::DVector<C>;

pub fn cr(re: f64) -> C {
    C::new(re, 0.0)
}

/// Max absolute entry, the norm used for residuals throughout.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// 1-norm (max column sum), used to pick the exp scaling.
fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a long Taylor tail.
///
/// The matrices here are tiny (n <= 16), so a 24-term Taylor series after
/// scaling ||m/2^s|| <= 1/4 is cheaper than a Pade solve and accurate to
/// machine precision.
pub fn mat_exp(m: &CMat) -> CMat {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "mat_exp needs a square matrix");
    let norm = one_norm(m);
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let a = m.map(|z| z / cr(2f64.powi(s as i32)));
    let mut term = CMat::identity(n, n);
    let mut acc = CMat::identity(n, n);
    for k in 1..=24 {
        term = (&term * &a).map(|z| z / cr(k as f64));
        acc += &term;
    }
    for _ in 0..s {
        acc = &acc * &acc;
    }
    acc
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Repeated principal square roots (Denman-Beavers) bring the matrix close
/// to the identity, then a Taylor series of log(I + X) is summed. Requires
/// the spectrum to stay off the closed negative real axis.
pub fn mat_log(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "mat_log needs a square matrix");
    // Cheap branch-cut guard: determinant on the negative real axis for
    // 1x1, otherwise rely on sqrt iteration divergence.
    let mut a = m.clone();
    let mut squarings = 0u32;
    for _ in 0..40 {
        let dist = one_norm(&(&a - CMat::identity(n, n)));
        if dist < 0.25 {
            break;
        }
        a = mat_sqrt(&a)?;
        squarings += 1;
    }
    let x = &a - CMat::identity(n, n);
    if one_norm(&x) > 0.5 {
        return Err(Error::BranchCut(one_norm(&x)));
    }
    let mut term = CMat::identity(n, n);
    let mut acc = CMat::zeros(n, n);
    for k in 1..=24 {
        term = &term * &x;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc += term.map(|z| z * cr(sign / k as f64));
    }
    Ok(acc.map(|z| z * cr(2f64.powi(squarings as i32))))
}

/// Principal square root via the Denman-Beavers iteration.
pub fn mat_sqrt(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = CMat::identity(n, n);
    for _ in 0..60 {
        let yi = y.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        let zi = z.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        let y_next = (&y + zi).map(|v| v * cr(0.5));
        let z_next = (&z + yi).map(|v| v * cr(0.5));
        let delta = one_norm(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta < 1e-15 {
            break;
        }
    }
    let res = one_norm(&(&y * &y - m));
    if res > 1e-9 * (1.0 + one_norm(m)) {
        return Err(Error::BranchCut(res));
    }
    Ok(y)
}

/// Gauss factorization M = U0 * D * L0 with U0 unit upper triangular,
/// D diagonal and L0 unit lower triangular.
///
/// Obtained from the Doolittle LDU of J*M*J, J the exchange matrix, so the
/// pivots are the trailing principal minors ratios of M. Fails when a pivot
/// falls below `tol` in modulus.
pub fn birkhoff(m: &CMat, tol: f64) -> Result<(CMat, CMat, CMat)> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "birkhoff needs a square matrix");
    let flipped = flip(m);
    let (l, d, u) = ldu(&flipped, tol)?;
    Ok((flip(&l), flip(&d), flip(&u)))
}

/// Doolittle M = L * D * U with L unit lower, D diagonal, U unit upper.
fn ldu(m: &CMat, tol: f64) -> Result<(CMat, CMat, CMat)> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut l = CMat::identity(n, n);
    for k in 0..n {
        let piv = a[(k, k)];
        if piv.norm() <= tol {
            return Err(Error::FactorizationFailed {
                index: k,
                value: piv.norm(),
            });
        }
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            l[(i, k)] = f;
            for j in k..n {
                let v = a[(k, j)];
                a[(i, j)] -= f * v;
            }
        }
    }
    let mut d = CMat::zeros(n, n);
    let mut u = CMat::identity(n, n);
    for k in 0..n {
        d[(k, k)] = a[(k, k)];
        for j in k + 1..n {
            u[(k, j)] = a[(k, j)] / a[(k, k)];
        }
    }
    Ok((l, d, u))
}

/// Conjugation by the exchange matrix: (flip m)[i][j] = m[n-1-i][n-1-j].
fn flip(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)])
}

/// Principal square root of a diagonal matrix, rejecting entries near the
/// negative real axis (continuity of the factorization branch).
pub fn diag_principal_sqrt(d: &CMat, guard: f64) -> Result<CMat> {
    let n = d.nrows();
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        let z = d[(k, k)];
        if z.re < 0.0 && z.im.abs() < guard {
            return Err(Error::BranchCut(z.im.abs()));
        }
        out[(k, k)] = z.sqrt();
    }
    Ok(out)
}

/// Central finite difference along a real parameter, with the two-step
/// disagreement reported for diagnostics.
pub struct FdValue {
    pub value: C,
    pub disagreement: f64,
}

pub fn fd_derivative<F: Fn(f64) -> C>(f: F, step: f64, richardson: bool) -> FdValue {
    let d1 = (f(step) - f(-step)) / cr(2.0 * step);
    let h = step / 2.0;
    let d2 = (f(h) - f(-h)) / cr(2.0 * h);
    let disagreement = (d1 - d2).norm();
    let value = if richardson {
        (d2 * cr(4.0) - d1) / cr(3.0)
    } else {
        d2
    };
    FdValue {
        value,
        disagreement,
    }
}

/// Central finite difference of a vector-valued map.
pub fn fd_derivative_vec<F: Fn(f64) -> CVec>(f: F, step: f64) -> CVec {
    let plus = f(step);
    let minus = f(-step);
    (plus - minus).map(|z| z / cr(2.0 * step))
}

/// Numerical rank with a relative singular value threshold.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|s| **s > rel_tol * smax)
        .count()
}

/// Distance from the column space of `probe` to the column space of `space`:
/// max over probe columns of ||(I - P) col|| / ||col||, P the orthogonal
/// projector onto span(space).
pub fn subspace_inclusion_residual(space: &CMat, probe: &CMat, rel_tol: f64) -> f64 {
    let svd = space.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd with u");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > rel_tol * smax)
        .count();
    let basis = u.columns(0, rank).into_owned();
    let mut worst: f64 = 0.0;
    for j in 0..probe.ncols() {
        let col = probe.column(j).into_owned();
        let nrm = col.norm();
        if nrm < 1e-14 {
            continue;
        }
        let coeffs = basis.adjoint() * &col;
        let res = (&col - &basis * coeffs).norm() / nrm;
        worst = worst.max(res);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mat(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(n, n, |_, _| {
            C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * cr(2.0 * scale)
        })
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = CMat::zeros(3, 3);
        assert!(max_abs(&(mat_exp(&z) - CMat::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn exp_of_nilpotent_truncates() {
        let mut e12 = CMat::zeros(2, 2);
        e12[(0, 1)] = cr(1.0);
        let want = CMat::identity(2, 2) + &e12;
        assert!(max_abs(&(mat_exp(&e12) - want)) < 1e-15);
    }

    #[test]
    fn exp_matches_taylor_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let m = random_mat(3, 0.4, &mut rng);
            let mut term = CMat::identity(3, 3);
            let mut reference = CMat::identity(3, 3);
            for k in 1..=30 {
                term = (&term * &m).map(|z| z / cr(k as f64));
                reference += &term;
            }
            assert!(max_abs(&(mat_exp(&m) - reference)) < 1e-12);
        }
    }

    #[test]
    fn log_exp_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let m = random_mat(3, 0.3, &mut rng);
            let x = mat_exp(&m);
            let back = mat_log(&x).expect("log");
            assert!(max_abs(&(mat_exp(&back) - &x)) < 1e-10);
        }
    }

    #[test]
    fn birkhoff_diagonal_and_triangular_cases() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![cr(2.0), cr(3.0)]));
        let (u0, dd, l0) = birkhoff(&d, 1e-8).unwrap();
        assert!(max_abs(&(u0 - CMat::identity(2, 2))) < 1e-14);
        assert!(max_abs(&(dd - &d)) < 1e-14);
        assert!(max_abs(&(l0 - CMat::identity(2, 2))) < 1e-14);

        let mut up = CMat::identity(3, 3);
        up[(0, 1)] = cr(0.7);
        up[(1, 2)] = cr(-0.2);
        let (u0, dd, l0) = birkhoff(&up, 1e-8).unwrap();
        assert!(max_abs(&(u0 - &up)) < 1e-13);
        assert!(max_abs(&(dd - CMat::identity(3, 3))) < 1e-13);
        assert!(max_abs(&(l0 - CMat::identity(3, 3))) < 1e-13);
    }

    #[test]
    fn birkhoff_recomposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let m = CMat::identity(3, 3) + random_mat(3, 0.2, &mut rng);
            let (u0, d, l0) = birkhoff(&m, 1e-8).unwrap();
            assert!(max_abs(&(&u0 * &d * &l0 - &m)) < 1e-11);
            // unit triangular shape
            for i in 0..3 {
                assert!((u0[(i, i)] - cr(1.0)).norm() < 1e-14);
                assert!((l0[(i, i)] - cr(1.0)).norm() < 1e-14);
                for j in 0..i {
                    assert!(u0[(i, j)].norm() < 1e-14);
                    assert!(l0[(j, i)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn fd_is_exact_on_low_degree() {
        let lin = fd_derivative(|t| cr(3.0 * t), 1e-5, false);
        assert!((lin.value - cr(3.0)).norm() < 1e-12);
        let quad = fd_derivative(|t| cr(2.0 * t * t + 3.0 * t), 1e-5, false);
        assert!((quad.value - cr(3.0)).norm() < 1e-9);
        let expd = fd_derivative(|t| cr(t).exp(), 1e-5, true);
        assert!((expd.value - cr(1.0)).norm() < 1e-9);
    }
}
