//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{CMat, CVec, C64};

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `i^k` for any integer k.
pub fn ipow(k: i64) -> C64 {
    match k.rem_euclid(4) {
        0 => c(1.0, 0.0),
        1 => c(0.0, 1.0),
        2 => c(-1.0, 0.0),
        _ => c(0.0, -1.0),
    }
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}

pub fn fro(m: &CMat) -> f64 {
    m.norm()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    svd(m).1
}

/// Full SVD `m = U diag(s) V^H` with descending singular values.
/// `U` is `r×k`, `V` is `c×k` where `k = min(r, c)`.
///
/// nalgebra's bidiagonal QR occasionally returns a factorization that does
/// not reconstruct `m` (seen on exactly rank-deficient complex input). Each
/// result is checked; on failure the adjoint and then fixed unitary rotations
/// of `m` are decomposed instead.
pub fn svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    type Svd = (CMat, Vec<f64>, CMat);
    let mut best: Option<(f64, Svd)> = None;
    for attempt in 0..5u64 {
        let (u, s, v) = match attempt {
            0 => raw_svd(m),
            1 => {
                let (u, s, v) = raw_svd(&m.adjoint());
                (v, s, u)
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(attempt);
                let q = random_unitary(&mut rng, m.nrows());
                let w = random_unitary(&mut rng, m.ncols());
                let (u, s, v) = raw_svd(&(q.adjoint() * m * &w));
                (q * u, s, w * v)
            }
        };
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(s.len(), s.iter().map(|&x| c(x, 0.0))));
        let res = (&u * d * v.adjoint() - m).norm() / scale;
        if res <= 1e-12 * (m.nrows().max(m.ncols()) as f64).sqrt() {
            return (u, s, v);
        }
        if best.as_ref().map_or(true, |b| res < b.0) {
            best = Some((res, (u, s, v)));
        }
    }
    best.unwrap().1
}

fn raw_svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let k = order.len();
    let mut uu = CMat::zeros(m.nrows(), k);
    let mut vv = CMat::zeros(m.ncols(), k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &vt.row(src).adjoint());
        s.push(svd.singular_values[src]);
    }
    (uu, s, vv)
}

/// Orthonormal basis of the right nullspace, as columns.
///
/// Singular values at or below `tol · max(σ_max, 1e-300)` count as zero.
/// Wide matrices are padded with zero rows so that every right singular
/// vector is available.
pub fn nullspace(m: &CMat, rel_tol: f64) -> CMat {
    let (r, cols) = m.shape();
    if cols == 0 {
        return CMat::zeros(0, 0);
    }
    let padded = if r < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (r, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let (_, s, v) = svd(&padded);
    let smax = s.first().cloned().unwrap_or(0.0);
    let cut = rel_tol * smax.max(1e-300);
    let idx: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= cut).collect();
    let mut out = CMat::zeros(cols, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &v.column(i));
    }
    out
}

/// Numerical rank with a relative threshold.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().cloned().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.nrows() != m.ncols() {
        return None;
    }
    if m.nrows() == 0 {
        return Some(CMat::zeros(0, 0));
    }
    let inv = m.clone().lu().try_inverse()?;
    if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

pub fn det(m: &CMat) -> C64 {
    if m.nrows() == 0 {
        return c(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

/// Orthogonal projector onto the column space of `m`.
pub fn range_projector(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.nrows();
    if m.ncols() == 0 {
        return CMat::zeros(n, n);
    }
    let (u, s, _) = svd(m);
    let smax = s.first().cloned().unwrap_or(0.0);
    let mut p = CMat::zeros(n, n);
    for (i, &sv) in s.iter().enumerate() {
        if smax > 0.0 && sv > rel_tol * smax {
            let col = u.column(i).into_owned();
            p += &col * col.adjoint();
        }
    }
    p
}

/// Complex Schur form `a = Q T Q^H` with `T` upper triangular.
pub fn schur(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (CMat::zeros(0, 0), CMat::zeros(0, 0));
    }
    let (q, mut t) = nalgebra::linalg::Schur::new(a.clone()).unpack();
    // Below-diagonal entries are rounding noise for complex input.
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = c(0.0, 0.0);
        }
    }
    (q, t)
}

/// Reorder a triangular Schur form so that the eigenvalues selected by
/// `select` come first. Returns the number of selected eigenvalues.
///
/// Adjacent swaps with Givens rotations; stable for defective matrices.
pub fn reorder_schur(q: &mut CMat, t: &mut CMat, select: impl Fn(C64) -> bool) -> usize {
    let n = t.nrows();
    let mut placed = 0;
    for k in 0..n {
        if !select(t[(k, k)]) {
            continue;
        }
        let mut j = k;
        while j > placed {
            swap_adjacent(q, t, j - 1);
            j -= 1;
        }
        placed += 1;
    }
    placed
}

/// Swap diagonal entries `p` and `p+1` of the triangular `t`.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, p: usize) {
    let n = t.nrows();
    let a = t[(p, p)];
    let b = t[(p, p + 1)];
    let d = t[(p + 1, p + 1)];
    let mut v1 = b;
    let mut v2 = d - a;
    let nv = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nv == 0.0 {
        return;
    }
    v1 /= nv;
    v2 /= nv;
    // G = [[v1, -conj v2], [v2, conj v1]], unitary; first column is an
    // eigenvector of the block for eigenvalue d.
    let g11 = v1;
    let g12 = -v2.conj();
    let g21 = v2;
    let g22 = v1.conj();
    // T <- G^H T G
    for col in 0..n {
        let x = t[(p, col)];
        let y = t[(p + 1, col)];
        t[(p, col)] = g11.conj() * x + g21.conj() * y;
        t[(p + 1, col)] = g12.conj() * x + g22.conj() * y;
    }
    for row in 0..n {
        let x = t[(row, p)];
        let y = t[(row, p + 1)];
        t[(row, p)] = x * g11 + y * g21;
        t[(row, p + 1)] = x * g12 + y * g22;
    }
    t[(p + 1, p)] = c(0.0, 0.0);
    for row in 0..q.nrows() {
        let x = q[(row, p)];
        let y = q[(row, p + 1)];
        q[(row, p)] = x * g11 + y * g21;
        q[(row, p + 1)] = x * g12 + y * g22;
    }
}

/// Solve `T11 R − R T22 = C` for upper triangular `T11`, `T22` with
/// disjoint spectra.
pub fn sylvester_triangular(t11: &CMat, t22: &CMat, cm: &CMat) -> Option<CMat> {
    let k = t11.nrows();
    let l = t22.nrows();
    let mut r = CMat::zeros(k, l);
    // Column j of R: (T11 − t22[j,j]) r_j = c_j + Σ_{i<j} r_i t22[i,j]
    for j in 0..l {
        let mut rhs: CVec = cm.column(j).into_owned();
        for i in 0..j {
            let coeff = t22[(i, j)];
            rhs += r.column(i) * coeff;
        }
        let shift = t22[(j, j)];
        for row in (0..k).rev() {
            let mut acc = rhs[row];
            for col in (row + 1)..k {
                acc -= t11[(row, col)] * r[(col, j)];
            }
            let piv = t11[(row, row)] - shift;
            if piv.norm() == 0.0 {
                return None;
            }
            r[(row, j)] = acc / piv;
        }
    }
    Some(r)
}

/// Eigenvalues of a square complex matrix.
pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    let (_, t) = schur(a);
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Roots of `Σ coeffs[k] x^k` (ascending powers). Leading coefficient
/// must be nonzero.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut deg = coeffs.len().saturating_sub(1);
    while deg > 0 && coeffs[deg].norm() == 0.0 {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let mut comp = CMat::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = c(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let mut roots = eigenvalues(&comp);
    // One Newton polish per root.
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (mut p, mut dp) = (c(0.0, 0.0), c(0.0, 0.0));
            for k in (0..=deg).rev() {
                dp = dp * *r + p;
                p = p * *r + coeffs[k];
            }
            if dp.norm() > 0.0 {
                let step = p / dp;
                if step.norm() < 1e-6 * (1.0 + r.norm()) {
                    *r -= step;
                }
            }
        }
    }
    roots
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn diag(entries: &[C64]) -> CMat {
    CMat::from_diagonal(&DVector::from_column_slice(entries))
}

pub fn from_rows(rows: &[Vec<C64>]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map(|x| x.len()).unwrap_or(0);
    DMatrix::from_fn(r, cols, |i, j| rows[i][j])
}

/// Hermitian positive definite Cholesky-based orthonormalization: returns
/// the upper-triangular inverse factor `R^{-1}` such that
/// `R^{-H} G R^{-1} = I`. None if `G` is not numerically positive definite.
pub fn gram_orthonormalizer(g: &CMat) -> Option<CMat> {
    let n = g.nrows();
    if n == 0 {
        return Some(CMat::zeros(0, 0));
    }
    let ch = nalgebra::linalg::Cholesky::new(g.clone())?;
    let l = ch.l();
    // G = L L^H, so R = L^H and R^{-1} = L^{-H}.
    let linv = l.solve_lower_triangular(&CMat::identity(n, n))?;
    Some(linv.adjoint())
}

/// Entries with real and imaginary parts uniform in `[-1, 1]`.
pub fn random_matrix<R: rand::Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Unitary factor of the QR decomposition of a random matrix.
pub fn random_unitary<R: rand::Rng>(rng: &mut R, n: usize) -> CMat {
    random_matrix(rng, n, n).qr().q()
}

/// `f(H)` for Hermitian `H` via its eigendecomposition.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let sym = (h + h.adjoint()) * c(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|x| c(f(x), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn svd_reconstructs_rank_deficient_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in 0..300 {
            let r = 1 + k % 4;
            let m = random_matrix(&mut rng, 8, r) * random_matrix(&mut rng, r, 6) * c(1.0 + (k % 10) as f64, 0.0);
            let (u, s, v) = svd(&m);
            let d = CMat::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|&x| c(x, 0.0))));
            assert!((&u * d * v.adjoint() - &m).norm() <= 1e-11 * m.norm(), "draw {k}");
            assert!(close(&(u.adjoint() * &u), &identity(6), 1e-12));
            assert_eq!(rank(&m, 1e-10), r);
        }
    }

    #[test]
    fn schur_is_triangular_and_reconstructs() {
        let a = from_rows(&[
            vec![c(1.0, 2.0), c(0.5, 0.0), c(-1.0, 1.0)],
            vec![c(0.0, 1.0), c(-2.0, 0.0), c(3.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.5, -0.5)],
        ]);
        let (q, t) = schur(&a);
        assert!(close(&(&q * &t * q.adjoint()), &a, 1e-12));
        assert!(close(&(q.adjoint() * &q), &identity(3), 1e-12));
    }

    #[test]
    fn reordering_puts_selected_first() {
        let a = from_rows(&[
            vec![c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(-3.0, 0.0)],
        ]);
        let (mut q, mut t) = schur(&a);
        let k = reorder_schur(&mut q, &mut t, |z| z.re < 0.0);
        assert_eq!(k, 2);
        assert!(t[(0, 0)].re < 0.0 && t[(1, 1)].re < 0.0 && t[(2, 2)].re > 0.0);
        assert!(close(&(&q * &t * q.adjoint()), &a, 1e-12));
        for j in 0..3 {
            for i in (j + 1)..3 {
                assert!(t[(i, j)].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sylvester_solves() {
        let t11 = from_rows(&[vec![c(-1.0, 0.0), c(2.0, 1.0)], vec![c(0.0, 0.0), c(-2.0, 0.5)]]);
        let t22 = from_rows(&[vec![c(1.0, 0.0)]]);
        let cm = from_rows(&[vec![c(1.0, 0.0)], vec![c(0.0, 3.0)]]);
        let r = sylvester_triangular(&t11, &t22, &cm).unwrap();
        assert!(close(&(&t11 * &r - &r * &t22), &cm, 1e-13));
    }

    #[test]
    fn roots_of_quadratic() {
        let mut r = poly_roots(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        r.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn nullspace_of_wide_matrix() {
        let m = from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]]);
        let ns = nullspace(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-14);
    }

    #[test]
    fn gram_orthonormalizer_whitens() {
        let g = from_rows(&[vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(3.0, 0.0)]]);
        let r = gram_orthonormalizer(&g).unwrap();
        assert!(close(&(r.adjoint() * &g * &r), &identity(2), 1e-13));
        assert!(r[(1, 0)].norm() == 0.0);
    }

    #[test]
    fn ipow_cycles() {
        assert_eq!(ipow(-1), c(0.0, -1.0));
        assert_eq!(ipow(5), I);
    }
}
