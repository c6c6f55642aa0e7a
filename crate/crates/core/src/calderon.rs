//! Splitting of boundary-ODE initial data into decaying and growing parts,
//! and the principal symbol of the Calderón projector.
//!
//! Two independent routes produce the same matrix: the spectral projector
//! of the companion matrix (moved to the `D_t` frame), and the residue sum
//! over roots of `det a(ξ_n)` in the upper half plane.

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{self, c};
use crate::symbolcore::{
    companion_matrix, minus_i_pow, principal_symbol, CosphereGrid, MatrixPolynomial, Node,
    OperatorSpec,
};
use crate::tolerances::Tolerances;
use crate::{CMat, Error, Result, C64};

/// Projectors onto the decaying (`Re μ < 0`) and growing spectral subspaces.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub p_plus: CMat,
    pub p_minus: CMat,
    pub rank_plus: usize,
    pub rank_minus: usize,
    pub node: Option<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// `V = (v, ∂_t v, …)`.
    Partial,
    /// `W = (v, D_t v, …)`.
    D,
}

/// Idempotent matrices sampled over a cosphere grid.
#[derive(Debug, Clone)]
pub struct ProjectorField {
    pub frame: Frame,
    pub block: usize,
    pub nodes: Vec<Node>,
    pub matrices: Vec<CMat>,
    pub idempotency_defect: f64,
}

impl ProjectorField {
    pub fn new(frame: Frame, block: usize, nodes: Vec<Node>, matrices: Vec<CMat>) -> Self {
        let idempotency_defect = matrices.iter().map(idempotency_defect).fold(0.0, f64::max);
        Self { frame, block, nodes, matrices, idempotency_defect }
    }

    /// Rank (trace) per node.
    pub fn ranks(&self) -> Vec<usize> {
        self.matrices.iter().map(projector_rank).collect()
    }
}

pub fn idempotency_defect(p: &CMat) -> f64 {
    linalg::op_norm(&(p * p - p))
}

/// Rank of a (numerical) idempotent, via its trace.
pub fn projector_rank(p: &CMat) -> usize {
    p.trace().re.round().max(0.0) as usize
}

/// Spectral projector of `A` onto generalized eigenvectors with `Re μ < 0`.
///
/// Ordered complex Schur form plus a triangular Sylvester solve, so
/// defective (Jordan) structure is handled without eigenvectors.
pub fn riesz_projector(a: &CMat, tol: &Tolerances) -> Result<SpectralSplit> {
    let n = a.nrows();
    let (mut q, mut t) = linalg::schur(a);
    let scale = linalg::op_norm(a).max(1.0);
    for i in 0..n {
        let mu = t[(i, i)];
        if mu.re.abs() <= tol.ell * scale {
            return Err(Error::SpectralGapViolation {
                eigenvalue: format!("{:.3e}{:+.3e}i", mu.re, mu.im),
                tolerance: tol.ell,
            });
        }
    }
    let k = linalg::reorder_schur(&mut q, &mut t, |mu| mu.re < 0.0);
    let mut block = CMat::zeros(n, n);
    for i in 0..k {
        block[(i, i)] = c(1.0, 0.0);
    }
    if k > 0 && k < n {
        let t11 = t.view((0, 0), (k, k)).into_owned();
        let t12 = t.view((0, k), (k, n - k)).into_owned();
        let t22 = t.view((k, k), (n - k, n - k)).into_owned();
        let r = linalg::sylvester_triangular(&t11, &t22, &t12).ok_or_else(|| {
            Error::SpectralGapViolation { eigenvalue: "shared eigenvalue".into(), tolerance: tol.ell }
        })?;
        block.view_mut((0, k), (k, n - k)).copy_from(&r);
    }
    let p_plus = &q * block * q.adjoint();
    let p_minus = CMat::identity(n, n) - &p_plus;
    Ok(SpectralSplit { p_plus, p_minus, rank_plus: k, rank_minus: n - k, node: None })
}

/// `diag((−i)^k) ⊗ I_r`, mapping `∂_t`-frame data to `D_t`-frame data.
pub fn frame_change(m: usize, r: usize) -> CMat {
    let mut s = CMat::zeros(m * r, m * r);
    for k in 0..m {
        for i in 0..r {
            s[(k * r + i, k * r + i)] = minus_i_pow(k as i64);
        }
    }
    s
}

/// Projector onto `E₊(D)` along `E₋(D)` in the `D_t` frame.
pub fn e_plus_projector(spec: &OperatorSpec, node: &Node, tol: &Tolerances) -> Result<CMat> {
    let poly = principal_symbol(spec, node)?;
    e_plus_from_poly(&poly, tol)
}

pub fn e_plus_from_poly(poly: &MatrixPolynomial, tol: &Tolerances) -> Result<CMat> {
    let a = companion_matrix(poly)?;
    let mut split = riesz_projector(&a, tol)?;
    split.node = poly.node;
    let s = frame_change(poly.degree(), poly.rank());
    let sinv = s.adjoint();
    let p = &s * &split.p_plus * sinv;
    let d = idempotency_defect(&p);
    if d > tol.idem {
        return Err(Error::NotIdempotent { defect: d });
    }
    Ok(p)
}

/// Calderón symbol by residues:
/// `σ_{jk} = Σ_{Im ξ>0} Res[Σ_{l=0}^{m−k−1} ξ^{j+l} a(ξ)^{-1} a_{m−k−1−l}]`.
pub fn hormander_symbol(spec: &OperatorSpec, node: &Node, tol: &Tolerances) -> Result<CMat> {
    let poly = principal_symbol(spec, node)?;
    hormander_from_poly(&poly, tol)
}

/// Residues `Res_{ρ}[ξ^p a(ξ)^{-1}]` summed over the upper-half-plane roots,
/// for `p = 0..2m−1`.
fn upper_moments(poly: &MatrixPolynomial, tol: &Tolerances) -> Result<Vec<CMat>> {
    let m = poly.degree();
    let r = poly.rank();
    let roots = poly.roots()?;
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for z in &roots {
        if z.im.abs() <= tol.ell * scale {
            return Err(Error::EllipticityViolation {
                node: poly.node.map(|n| n.describe()).unwrap_or_else(|| "-".into()),
                detail: format!("real root {:.6} of det a", z.re),
            });
        }
    }
    let clusters = cluster_roots(&roots, tol.cluster * scale);
    let mut moments = vec![CMat::zeros(r, r); 2 * m];
    for cl in &clusters {
        let centre: C64 = cl.iter().map(|&i| roots[i]).sum::<C64>() / cl.len() as f64;
        if centre.im <= 0.0 {
            continue;
        }
        let simple = cl.len() == 1;
        let mut done = false;
        if simple {
            if let Some(res) = simple_residue(poly, roots[cl[0]]) {
                let rho = roots[cl[0]];
                for (p, mom) in moments.iter_mut().enumerate() {
                    *mom += &res * rho.powu(p as u32);
                }
                done = true;
            }
        }
        if !done {
            let others: Vec<C64> = roots
                .iter()
                .enumerate()
                .filter(|(i, _)| !cl.contains(i))
                .map(|(_, &z)| z)
                .collect();
            let diam = cl
                .iter()
                .flat_map(|&i| cl.iter().map(move |&j| (i, j)))
                .map(|(i, j)| (roots[i] - roots[j]).norm())
                .fold(0.0, f64::max);
            let gap = others.iter().map(|z| (z - centre).norm()).fold(f64::INFINITY, f64::min);
            let gap = if gap.is_finite() { gap } else { 2.0 * (1.0 + centre.norm()) };
            // Wide enough to keep the integrand well conditioned, and well
            // inside the distance to the remaining roots.
            let radius = (10.0 * diam).max(0.25 * gap).min(0.5 * gap);
            if radius <= diam {
                return Err(Error::ResidueFailure(format!(
                    "cannot separate a root cluster of diameter {diam:.2e} from its neighbours"
                )));
            }
            let fine = contour_moments(poly, centre, radius, 256, 2 * m)?;
            let coarse = contour_moments(poly, centre, radius, 128, 2 * m)?;
            let err = fine
                .iter()
                .zip(&coarse)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            let size = fine.iter().map(|a| a.norm()).fold(1.0, f64::max);
            if err > 1e-10 * size {
                return Err(Error::ResidueFailure(format!("contour quadrature not converged ({err:.2e})")));
            }
            for (mom, f) in moments.iter_mut().zip(fine) {
                *mom += f;
            }
        }
    }
    Ok(moments)
}

pub fn hormander_from_poly(poly: &MatrixPolynomial, tol: &Tolerances) -> Result<CMat> {
    let m = poly.degree();
    let r = poly.rank();
    let moments = upper_moments(poly, tol)?;
    let mut out = CMat::zeros(m * r, m * r);
    for j in 0..m {
        for k in 0..m {
            let mut blk = CMat::zeros(r, r);
            for l in 0..(m - k) {
                blk += &moments[j + l] * &poly.coeffs[m - k - 1 - l];
            }
            out.view_mut((j * r, k * r), (r, r)).copy_from(&blk);
        }
    }
    Ok(out)
}

/// `Res_ρ a^{-1} = v wᴴ / (wᴴ a'(ρ) v)` at a simple root.
fn simple_residue(poly: &MatrixPolynomial, rho: C64) -> Option<CMat> {
    let a = poly.eval(rho);
    let (u, s, v) = linalg::svd(&a);
    let n = s.len();
    let smax = s[0].max(1e-300);
    // simple root: exactly one vanishing singular value
    if n >= 2 && s[n - 2] <= 1e-6 * smax {
        return None;
    }
    let vv = v.column(n - 1).into_owned();
    let ww = u.column(n - 1).into_owned();
    let denom = (ww.adjoint() * poly.eval_derivative(rho) * &vv)[(0, 0)];
    if denom.norm() <= 1e-10 * linalg::op_norm(&poly.eval_derivative(rho)).max(1e-300) {
        return None;
    }
    Some(vv * ww.adjoint() / denom)
}

/// `(1/2πi) ∮ ξ^p a(ξ)^{-1} dξ` on a circle, trapezoid rule.
fn contour_moments(
    poly: &MatrixPolynomial,
    centre: C64,
    radius: f64,
    nodes: usize,
    count: usize,
) -> Result<Vec<CMat>> {
    let r = poly.rank();
    let mut out = vec![CMat::zeros(r, r); count];
    for k in 0..nodes {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64);
        let xi = centre + w * radius;
        let inv = linalg::inverse(&poly.eval(xi))
            .ok_or_else(|| Error::ResidueFailure("contour passes through a root".into()))?;
        // dξ/(2πi) = radius·w dφ/(2π)
        let weight = w * radius / nodes as f64;
        let mut pw = c(1.0, 0.0);
        for o in out.iter_mut() {
            *o += &inv * (pw * weight);
            pw *= xi;
        }
    }
    Ok(out)
}

/// Single-linkage clusters of roots closer than `dist`.
fn cluster_roots(roots: &[C64], dist: f64) -> Vec<Vec<usize>> {
    let n = roots.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (roots[i] - roots[j]).norm() < dist {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Douglis–Nirenberg order reduction of a block symbol: block `(j, k)` is
/// multiplied by `s^{k−j}` where `s = |ξ'|`.
pub fn dn_order_reduce(p: &CMat, block: usize, s: f64) -> Result<CMat> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("|xi'| must be positive, got {s}")));
    }
    Ok(dn_scale(p, block, s, -1))
}

/// Inverse of [`dn_order_reduce`].
pub fn dn_order_lift(p: &CMat, block: usize, s: f64) -> Result<CMat> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("|xi'| must be positive, got {s}")));
    }
    Ok(dn_scale(p, block, s, 1))
}

fn dn_scale(p: &CMat, block: usize, s: f64, sign: i32) -> CMat {
    let mut out = p.clone();
    for i in 0..p.nrows() {
        for k in 0..p.ncols() {
            let (bj, bk) = ((i / block) as i32, (k / block) as i32);
            out[(i, k)] *= s.powi(sign * (bj - bk));
        }
    }
    out
}

/// Orthogonal projection with the same range as the idempotent `e`:
/// `p = e e* (1 + (e − e*)(e* − e))^{-1}`.
pub fn kaplansky_projection(e: &CMat, tol: &Tolerances) -> Result<CMat> {
    if e.nrows() != e.ncols() {
        return Err(Error::invalid("idempotent must be square"));
    }
    let n = e.nrows();
    let norm = linalg::op_norm(e);
    let defect = idempotency_defect(e);
    if defect > tol.idem * (1.0 + norm * norm) {
        return Err(Error::NotIdempotent { defect });
    }
    // For e² = e, ee* = e(1 − (e − e*)), so the formula collapses to
    // e(1 + e − e*)^{-1}; the factor is conditioned like ‖e‖ instead of ‖e‖².
    let a = CMat::identity(n, n) + e - e.adjoint();
    let ainv = linalg::inverse(&a).ok_or(Error::NotIdempotent { defect })?;
    let p = e * ainv;
    // Exact arithmetic gives a Hermitian result; remove rounding asymmetry.
    Ok((&p + p.adjoint()) * c(0.5, 0.0))
}

/// Seeded idempotent `S diag(1_r, 0) S^{-1}` with `cond(S) ≤ cond_max`.
pub fn random_idempotent<R: rand::Rng>(rng: &mut R, n: usize, rank: usize, cond_max: f64) -> CMat {
    let u = linalg::random_unitary(rng, n);
    let v = linalg::random_unitary(rng, n);
    let top = cond_max.max(1.0).ln() * rng.gen_range(0.0..=1.0);
    let mut sig: Vec<f64> = (0..n).map(|_| (top * rng.gen_range(0.0..=1.0)).exp()).collect();
    sig[0] = 1.0;
    sig[n - 1] = top.exp();
    let sv = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, sig.iter().map(|&x| c(x, 0.0))));
    let sinv = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, sig.iter().map(|&x| c(1.0 / x, 0.0))));
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|i| c(if i < rank { 1.0 } else { 0.0 }, 0.0)),
    ));
    let s = &u * &sv * &v;
    let s_inv = v.adjoint() * sinv * u.adjoint();
    &s * d * s_inv
}

#[derive(Debug, Clone, Serialize)]
pub struct KaplanskyCheck {
    pub hermitian_defect: f64,
    pub idempotency_defect: f64,
    /// `‖e p − p‖`.
    pub ep_defect: f64,
    /// `‖p e − e‖`.
    pub pe_defect: f64,
    pub rank_e: usize,
    pub rank_p: usize,
    /// `‖(1 − p) e‖`, range of `e` inside range of `p`.
    pub range_residual: f64,
}

impl KaplanskyCheck {
    pub fn max_defect(&self) -> f64 {
        self.hermitian_defect
            .max(self.idempotency_defect)
            .max(self.ep_defect)
            .max(self.pe_defect)
            .max(self.range_residual)
    }
}

pub fn kaplansky_check(e: &CMat, tol: &Tolerances) -> Result<KaplanskyCheck> {
    let p = kaplansky_projection(e, tol)?;
    let n = e.nrows();
    Ok(KaplanskyCheck {
        hermitian_defect: linalg::op_norm(&(&p - p.adjoint())),
        idempotency_defect: idempotency_defect(&p),
        ep_defect: linalg::op_norm(&(e * &p - &p)),
        pe_defect: linalg::op_norm(&(&p * e - e)),
        rank_e: projector_rank(e),
        rank_p: projector_rank(&p),
        range_residual: linalg::op_norm(&((CMat::identity(n, n) - &p) * e)),
    })
}

/// Per-node two-route comparison.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolNode {
    pub node: Node,
    pub frame: Frame,
    #[serde(serialize_with = "crate::cli::json::ser_cmat")]
    pub matrix: CMat,
    pub rank: usize,
    pub idempotency_defect: f64,
    pub two_route_disagreement: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalderonReport {
    pub operator: String,
    pub tolerance_idem: f64,
    pub tolerance_agree: f64,
    pub max_idempotency_defect: f64,
    pub max_disagreement: f64,
    /// `rank E₊` on the `ξ' = +1` and `ξ' = −1` components.
    pub ranks: [usize; 2],
    pub pass: bool,
    pub nodes: Vec<SymbolNode>,
}

/// Evaluate both routes on every grid node.
pub fn calderon_report(
    spec: &OperatorSpec,
    grid: &CosphereGrid,
    tol: &Tolerances,
) -> Result<CalderonReport> {
    let nodes: Vec<SymbolNode> = grid
        .nodes
        .par_iter()
        .map(|node| {
            let h = hormander_symbol(spec, node, tol)?;
            let e = e_plus_projector(spec, node, tol)?;
            Ok(SymbolNode {
                node: *node,
                frame: Frame::D,
                rank: projector_rank(&e),
                idempotency_defect: idempotency_defect(&h),
                two_route_disagreement: linalg::op_norm(&(&h - &e)),
                matrix: h,
            })
        })
        .collect::<Result<_>>()?;
    let max_idempotency_defect = nodes.iter().map(|n| n.idempotency_defect).fold(0.0, f64::max);
    let max_disagreement = nodes.iter().map(|n| n.two_route_disagreement).fold(0.0, f64::max);
    let mut ranks = [usize::MAX; 2];
    let mut constant = true;
    for n in &nodes {
        let slot = &mut ranks[n.node.component()];
        if *slot == usize::MAX {
            *slot = n.rank;
        } else if *slot != n.rank {
            constant = false;
        }
    }
    let ranks = ranks.map(|r| if r == usize::MAX { 0 } else { r });
    Ok(CalderonReport {
        operator: spec.label.clone(),
        tolerance_idem: tol.idem,
        tolerance_agree: tol.agree,
        max_idempotency_defect,
        max_disagreement,
        ranks,
        pass: constant && max_idempotency_defect <= tol.idem && max_disagreement <= tol.agree,
        nodes,
    })
}

/// `rank E₊(D)` on each fiber component, checked constant over the grid.
pub fn e_plus_ranks(spec: &OperatorSpec, grid: &CosphereGrid, tol: &Tolerances) -> Result<[usize; 2]> {
    let mut ranks = [None; 2];
    for node in &grid.nodes {
        let r = projector_rank(&e_plus_projector(spec, node, tol)?);
        let slot = &mut ranks[node.component()];
        match slot {
            None => *slot = Some(r),
            Some(prev) if *prev != r => {
                return Err(Error::EllipticityViolation {
                    node: node.describe(),
                    detail: format!("rank of E+ jumps from {prev} to {r} within a component"),
                })
            }
            _ => {}
        }
    }
    Ok(ranks.map(|r| r.unwrap_or(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use crate::symbolcore::Builtin;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn delta_symbol() -> CMat {
        from_rows(&[
            vec![c(0.5, 0.0), c(0.0, -0.5)],
            vec![c(0.0, 0.5), c(0.5, 0.0)],
        ])
    }

    #[test]
    fn riesz_diagonal_and_swap() {
        let a = linalg::diag(&[c(-1.0, 0.0), c(1.0, 0.0)]);
        let s = riesz_projector(&a, &tol()).unwrap();
        assert!((s.p_plus - linalg::diag(&[c(1.0, 0.0), c(0.0, 0.0)])).norm() < 1e-14);
        let a = from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        let s = riesz_projector(&a, &tol()).unwrap();
        let expect = from_rows(&[vec![c(0.5, 0.0), c(-0.5, 0.0)], vec![c(-0.5, 0.0), c(0.5, 0.0)]]);
        assert!((&s.p_plus - expect).norm() < 1e-12);
        assert!((&s.p_plus * &a - &a * &s.p_plus).norm() <= 1e-9 * linalg::op_norm(&a));
        assert_eq!((s.rank_plus, s.rank_minus), (1, 1));
    }

    #[test]
    fn riesz_jordan_block() {
        let a = from_rows(&[vec![c(-1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]]);
        let s = riesz_projector(&a, &tol()).unwrap();
        assert!((s.p_plus - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn riesz_rejects_imaginary_axis() {
        let a = linalg::diag(&[c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(riesz_projector(&a, &tol()), Err(Error::SpectralGapViolation { .. })));
    }

    #[test]
    fn laplacian_projector_both_routes() {
        let spec = OperatorSpec::builtin(Builtin::Laplacian);
        let node = Node::disc(0.4, 1.0);
        let e = e_plus_projector(&spec, &node, &tol()).unwrap();
        let h = hormander_symbol(&spec, &node, &tol()).unwrap();
        assert!((&e - delta_symbol()).norm() < 1e-10);
        assert!((&h - delta_symbol()).norm() < 1e-10);
        // range spanned by (1, i)
        let v = from_rows(&[vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]]);
        assert!((&h * &v - &v).norm() < 1e-12);
        assert_eq!(projector_rank(&h), 1);
    }

    #[test]
    fn cauchy_riemann_components() {
        let spec = OperatorSpec::builtin(Builtin::DbarPower(1));
        for th in [0.0, 1.3] {
            let plus = e_plus_projector(&spec, &Node::disc(th, 1.0), &tol()).unwrap();
            let minus = e_plus_projector(&spec, &Node::disc(th, -1.0), &tol()).unwrap();
            assert!((plus[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
            assert!(minus[(0, 0)].norm() < 1e-12);
        }
    }

    #[test]
    fn first_order_residues() {
        let p = MatrixPolynomial::scalar(&[c(1.0, 0.0), c(0.0, -1.0)]);
        assert!((hormander_from_poly(&p, &tol()).unwrap()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        let p = MatrixPolynomial::scalar(&[c(1.0, 0.0), c(0.0, 1.0)]);
        assert!(hormander_from_poly(&p, &tol()).unwrap()[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn double_root_uses_contour() {
        // Bilaplacian: ξ = i is a double root.
        let spec = OperatorSpec::builtin(Builtin::Bilaplacian);
        let node = Node::disc(2.0, -1.0);
        let h = hormander_symbol(&spec, &node, &tol()).unwrap();
        let e = e_plus_projector(&spec, &node, &tol()).unwrap();
        assert!((&h - &e).norm() < 1e-8);
        assert_eq!(projector_rank(&h), 2);
        assert!(idempotency_defect(&h) < 1e-8);
    }

    #[test]
    fn rank_is_half_order_for_real_even_symbols() {
        for b in [Builtin::Laplacian, Builtin::Bilaplacian] {
            let spec = OperatorSpec::builtin(b);
            let ranks = e_plus_ranks(&spec, &CosphereGrid::disc(16), &tol()).unwrap();
            assert_eq!(ranks, [b.order() / 2, b.order() / 2]);
        }
        let ranks = e_plus_ranks(&OperatorSpec::builtin(Builtin::DbarPower(2)), &CosphereGrid::disc(16), &tol()).unwrap();
        assert_eq!(ranks, [2, 0]);
    }

    #[test]
    fn order_reduction() {
        let p = delta_symbol();
        assert_eq!(dn_order_reduce(&p, 1, 1.0).unwrap(), p);
        let back = dn_order_lift(&dn_order_reduce(&p, 1, 3.0).unwrap(), 1, 3.0).unwrap();
        assert!((back - &p).norm() < 1e-15);
        // The residue symbol at |ξ'| = 2 reduces to the cosphere value.
        let poly = MatrixPolynomial::scalar(&[c(1.0, 0.0), c(0.0, 0.0), c(4.0, 0.0)]);
        let h2 = hormander_from_poly(&poly, &tol()).unwrap();
        let expect = from_rows(&[
            vec![c(0.5, 0.0), c(0.0, -0.25)],
            vec![c(0.0, 1.0), c(0.5, 0.0)],
        ]);
        assert!((&h2 - expect).norm() < 1e-12);
        let reduced = dn_order_reduce(&h2, 1, 2.0).unwrap();
        assert!((&reduced - &p).norm() < 1e-12);
        assert!(idempotency_defect(&reduced) < 1e-12);
        assert!(dn_order_reduce(&p, 1, 0.0).is_err());
    }

    #[test]
    fn kaplansky_examples() {
        let e = from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]);
        let p = kaplansky_projection(&e, &tol()).unwrap();
        assert!((&p - linalg::diag(&[c(1.0, 0.0), c(0.0, 0.0)])).norm() < 1e-12);
        assert!((&e * &p - &p).norm() < 1e-12);
        assert!((&p * &e - &e).norm() < 1e-12);
        let d = delta_symbol();
        assert!((kaplansky_projection(&d, &tol()).unwrap() - &d).norm() < 1e-12);
        let twice = kaplansky_projection(&p, &tol()).unwrap();
        assert!((twice - &p).norm() < 1e-12);
        let bad = linalg::diag(&[c(2.0, 0.0)]);
        assert!(matches!(kaplansky_projection(&bad, &tol()), Err(Error::NotIdempotent { .. })));
    }

    #[test]
    fn kaplansky_random_suite() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for k in 0..100 {
            let n = 4 + k % 5;
            let e = random_idempotent(&mut rng, n, 1 + k % (n - 1), 1e3);
            let chk = kaplansky_check(&e, &tol()).unwrap();
            assert_eq!(chk.rank_e, chk.rank_p);
            worst = worst.max(chk.max_defect());
        }
        assert!(worst <= 1e-10, "{worst:e}");
    }
}
