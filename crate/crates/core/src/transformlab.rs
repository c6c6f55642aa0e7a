//! Finite-dimensional checks of the unbounded-operator algebra behind
//! bounded transforms: `F = T(1 + T*T)^{-1/2}`, its integral formula, the
//! polar isometry as a limit, resolvent/commutator rewritings, and decay
//! probes for compactness surrogates.
//!
//! Extensions `T ⊆ T_e` are modelled by masks: `T = T_e P` where `P` is the
//! orthogonal projection onto a subspace (the smaller domain).

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{self, c};
use crate::quadrature::gauss_legendre;
use crate::{CMat, Error, Result, C64};

/// `T_e` together with the domain projection of `T = T_e P`, plus
/// diagonal multipliers (cutoff `j`, algebra element `a`).
#[derive(Debug, Clone)]
pub struct FiniteOperator {
    pub t_e: CMat,
    pub domain: CMat,
    pub j: Vec<f64>,
    pub a: Vec<f64>,
}

impl FiniteOperator {
    pub fn new(t_e: CMat, domain: CMat, j: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        let n = t_e.ncols();
        if domain.shape() != (n, n) || j.len() != t_e.nrows() || a.len() != n || t_e.nrows() != n {
            return Err(Error::invalid("inconsistent shapes in finite operator"));
        }
        if j.iter().chain(&a).any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid("multipliers must take values in [0, 1]"));
        }
        Ok(Self { t_e, domain, j, a })
    }

    /// Mask given as a coordinate subset.
    pub fn masked(t_e: CMat, mask: &[bool], j: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        let p = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            mask.len(),
            mask.iter().map(|&b| c(if b { 1.0 } else { 0.0 }, 0.0)),
        ));
        Self::new(t_e, p, j, a)
    }

    pub fn t(&self) -> CMat {
        &self.t_e * &self.domain
    }

    /// `‖(T − T_e) P‖`, zero by construction.
    pub fn extension_defect(&self) -> f64 {
        ((self.t() - &self.t_e) * &self.domain).norm()
    }
}

fn diag(v: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| c(x, 0.0))))
}

fn comm(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// `T (1 + T*T)^{-1/2}` via the SVD, `σ ↦ σ/√(1+σ²)`.
pub fn bounded_transform(t: &CMat) -> CMat {
    if t.nrows() == 0 || t.ncols() == 0 {
        return t.clone();
    }
    let (u, s, v) = linalg::svd(t);
    let f = s.iter().map(|&x| c(x / (1.0 + x * x).sqrt(), 0.0));
    &u * CMat::from_diagonal(&nalgebra::DVector::from_iterator(s.len(), f)) * v.adjoint()
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformCheck {
    pub norm: f64,
    pub rank_t: usize,
    pub rank_f: usize,
    /// `‖(1 − P_ran T) F‖`.
    pub range_residual: f64,
    /// `‖F Π_ker T‖`.
    pub kernel_residual: f64,
}

/// Norm, kernel and range of `F` against those of `T`.
pub fn check_bounded_transform(t: &CMat) -> TransformCheck {
    let f = bounded_transform(t);
    let rank_t = linalg::rank(t, 1e-12);
    let rank_f = linalg::rank(&f, 1e-12);
    let p_ran = linalg::range_projector(t, 1e-12);
    let range_residual = ((CMat::identity(t.nrows(), t.nrows()) - p_ran) * &f).norm();
    let ker = linalg::nullspace(t, 1e-12);
    let kernel_residual = if ker.ncols() == 0 { 0.0 } else { (&f * ker).norm() };
    TransformCheck { norm: linalg::op_norm(&f), rank_t, rank_f, range_residual, kernel_residual }
}

/// `(2/π) ∫_0^{π/2} T (1 + cos²θ T*T)^{-1} dθ`, Gauss–Legendre in θ.
///
/// This is the integral `(1/π) ∫_1^∞ (μ−1)^{-1/2} T (μ + T*T)^{-1} dμ`
/// after `μ = 1 + tan²θ`.
pub fn baaj_julg_quadrature(t: &CMat, nodes: usize) -> Result<CMat> {
    if nodes < 8 {
        return Err(Error::invalid("at least 8 quadrature nodes are required"));
    }
    let n = t.ncols();
    let tt = t.adjoint() * t;
    let id = CMat::identity(n, n);
    let mut acc = CMat::zeros(n, n);
    for (theta, w) in gauss_legendre(nodes, 0.0, PI / 2.0) {
        let cos2 = theta.cos().powi(2);
        let m = &id + &tt * c(cos2, 0.0);
        let inv = m
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular resolvent"))?;
        acc += inv * c(w, 0.0);
    }
    Ok(t * acc * c(2.0 / PI, 0.0))
}

/// `‖approx − F‖ / ‖F‖`, or the absolute error when `F = 0`.
pub fn baaj_julg_error(t: &CMat, nodes: usize) -> Result<f64> {
    let exact = bounded_transform(t);
    let err = (baaj_julg_quadrature(t, nodes)? - &exact).norm();
    let scale = exact.norm();
    Ok(if scale > 0.0 { err / scale } else { err })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolarRow {
    pub delta: f64,
    pub error: f64,
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone)]
pub struct PolarReport {
    pub v: CMat,
    /// Smallest nonzero singular value.
    pub c: f64,
    pub rows: Vec<PolarRow>,
}

/// Polar partial isometry `V` and `‖T(δ + T*T)^{-1/2} − V‖` against
/// `δ/(2C²)`.
pub fn polar_isometry_limit(t: &CMat, deltas: &[f64]) -> Result<PolarReport> {
    if deltas.iter().any(|&d| d <= 0.0) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("δ schedule must be positive and strictly decreasing"));
    }
    let (u, s, v) = linalg::svd(t);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 1e-12).collect();
    let mut vpart = CMat::zeros(t.nrows(), t.ncols());
    for &i in &keep {
        vpart += u.column(i) * v.column(i).adjoint();
    }
    let cmin = keep.iter().map(|&i| s[i]).fold(f64::INFINITY, f64::min);
    let tt = t.adjoint() * t;
    let rows = deltas
        .iter()
        .map(|&delta| {
            let root = linalg::hermitian_function(&tt, |x| 1.0 / (delta + x.max(0.0)).sqrt());
            let error = linalg::op_norm(&(t * root - &vpart));
            let bound = if keep.is_empty() { 0.0 } else { delta / (2.0 * cmin * cmin) };
            PolarRow { delta, error, bound, within_bound: error <= bound * (1.0 + 1e-10) + 1e-14 }
        })
        .collect();
    Ok(PolarReport { v: vpart, c: if keep.is_empty() { 0.0 } else { cmin }, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventReport {
    pub mu: f64,
    /// `[(μ+TT*)^{-1}, j]` against `R [j, T] T* R + R T [j, T*] R`.
    pub commutator_resolvent: f64,
    /// `[T(μ+T*T)^{-1}, a]` against
    /// `[T, a] R' − T R' (T*[T, a] + [T*, a] T) R'`.
    pub transform_commutator: f64,
    /// `T R' − R' T*` against `R (μ(T − T*) + T(T − T*)T*) R`.
    pub almost_selfadjoint: f64,
    pub extension_defect: f64,
    pub max_residual: f64,
}

/// Evaluate both sides of each rewriting independently.
pub fn verify_resolvent_identities(op: &FiniteOperator, mu: f64) -> Result<ResolventReport> {
    if mu < 1.0 {
        return Err(Error::invalid("μ must be at least 1"));
    }
    let t = op.t();
    let ts = t.adjoint();
    let n = t.nrows();
    let id = CMat::identity(n, n);
    let inv = |m: CMat| m.lu().try_inverse().ok_or_else(|| Error::invalid("singular resolvent"));
    let r = inv(&id * c(mu, 0.0) + &t * &ts)?;
    let rp = inv(&id * c(mu, 0.0) + &ts * &t)?;
    let j = diag(&op.j);
    let a = diag(&op.a);

    let lhs1 = comm(&r, &j);
    // [R, j] = −R [R^{-1}, j] R and [μ + TT*, j] = −([j,T]T* + T[j,T*])
    let rhs1 = &r * (comm(&j, &t) * &ts + &t * comm(&j, &ts)) * &r;
    let commutator_resolvent = (lhs1 - rhs1).norm();

    let lhs2 = comm(&(&t * &rp), &a);
    let ta = comm(&t, &a);
    let rhs2 = &ta * &rp - &t * &rp * (&ts * &ta + comm(&ts, &a) * &t) * &rp;
    let transform_commutator = (lhs2 - rhs2).norm();

    let lhs3 = &t * &rp - &rp * &ts;
    let d = &t - &ts;
    let rhs3 = &r * (&d * c(mu, 0.0) + &t * &d * &ts) * &r;
    let almost_selfadjoint = (lhs3 - rhs3).norm();

    let extension_defect = op.extension_defect();
    let max_residual = commutator_resolvent
        .max(transform_commutator)
        .max(almost_selfadjoint)
        .max(extension_defect);
    Ok(ResolventReport {
        mu,
        commutator_resolvent,
        transform_commutator,
        almost_selfadjoint,
        extension_defect,
        max_residual,
    })
}

/// Seeded random draw: Hermitian `T_e`, coordinate mask keeping at least
/// half the coordinates, multipliers in `[0, 1]`, `μ ∈ [1, 10]`.
pub fn random_resolvent_case(seed: u64, n: usize) -> Result<(FiniteOperator, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = linalg::random_matrix(&mut rng, n, n);
    let t_e = (&g + g.adjoint()) * c(0.5, 0.0);
    let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.75)).collect();
    for m in mask.iter_mut().take(n.div_ceil(2)) {
        *m = true;
    }
    let j = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let a = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let mu = rng.gen_range(1.0..10.0);
    Ok((FiniteOperator::masked(t_e, &mask, j, a)?, mu))
}

/// Built-in interval models for the decay probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `−i d/dx` on `(0,1)`, minimal domain `f(0) = f(1) = 0`.
    FirstOrder,
    /// `d²/dx²` on `(0,1)`, minimal domain `f = f' = 0` at both ends.
    SecondOrder,
}

impl DecayModel {
    pub fn order(self) -> usize {
        match self {
            DecayModel::FirstOrder => 1,
            DecayModel::SecondOrder => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Cutoff {
    Zero,
    Identity,
    /// Smooth bump supported in `(center − width, center + width)`.
    Bump { center: f64, width: f64 },
}

impl Cutoff {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Cutoff::Zero => 0.0,
            Cutoff::Identity => 1.0,
            Cutoff::Bump { center, width } => {
                let r = (x - center) / width;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - r * r)).exp()
                }
            }
        }
    }
}

/// Polynomials of degree `< n` on `[0,1]` in L²-isometric nodal
/// coordinates `u_i = √w_i f(x_i)` at Gauss–Legendre nodes.
struct NodalBasis {
    x: Vec<f64>,
    sqrt_w: Vec<f64>,
    /// Normalized barycentric weights, kept as `(log|λ|, sign)`.
    bary: Vec<(f64, f64)>,
}

impl NodalBasis {
    fn new(n: usize) -> Self {
        let rule = gauss_legendre(n, 0.0, 1.0);
        let x: Vec<f64> = rule.iter().map(|p| p.0).collect();
        let sqrt_w = rule.iter().map(|p| p.1.sqrt()).collect();
        let bary = (0..n)
            .map(|j| {
                let mut lg = 0.0;
                let mut sign = 1.0;
                for k in 0..n {
                    if k != j {
                        let d = x[j] - x[k];
                        lg -= d.abs().ln();
                        if d < 0.0 {
                            sign = -sign;
                        }
                    }
                }
                (lg, sign)
            })
            .collect();
        Self { x, sqrt_w, bary }
    }

    fn ratio(&self, j: usize, i: usize) -> f64 {
        let (lj, sj) = self.bary[j];
        let (li, si) = self.bary[i];
        sj * si * (lj - li).exp()
    }

    /// Exact `d/dx` on the polynomial space, in isometric coordinates.
    fn derivative(&self) -> CMat {
        let n = self.x.len();
        let mut d = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = self.ratio(j, i) / (self.x[i] - self.x[j]);
                    d[(i, j)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        CMat::from_fn(n, n, |i, j| c(self.sqrt_w[i] * d[(i, j)] / self.sqrt_w[j], 0.0))
    }

    /// Row functional `u ↦ f(x0)`.
    fn point_evaluation(&self, x0: f64) -> Vec<f64> {
        let n = self.x.len();
        let terms: Vec<f64> = (0..n).map(|j| self.ratio(j, 0) / (x0 - self.x[j])).collect();
        let total: f64 = terms.iter().sum();
        (0..n).map(|j| terms[j] / total / self.sqrt_w[j]).collect()
    }

    fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.x.iter().map(|&x| f(x)).collect()
    }
}

/// Orthogonal projection onto the common kernel of the given row
/// functionals.
fn constraint_projection(rows: &[Vec<C64>]) -> CMat {
    let n = rows[0].len();
    let b = CMat::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let ns = linalg::nullspace(&b, 1e-13);
    &ns * ns.adjoint()
}

/// `(T_e, P)` for a decay model of size `n`.
fn model_operator(model: DecayModel, basis: &NodalBasis) -> (CMat, CMat) {
    let d = basis.derivative();
    let to_c = |v: Vec<f64>| v.into_iter().map(|x| c(x, 0.0)).collect::<Vec<_>>();
    let e0 = basis.point_evaluation(0.0);
    let e1 = basis.point_evaluation(1.0);
    match model {
        DecayModel::FirstOrder => {
            let p = constraint_projection(&[to_c(e0), to_c(e1)]);
            (d * c(0.0, -1.0), p)
        }
        DecayModel::SecondOrder => {
            let row = |e: &[f64]| -> Vec<C64> {
                let v = CMat::from_fn(1, e.len(), |_, j| c(e[j], 0.0)) * &d;
                v.iter().cloned().collect()
            };
            let p = constraint_projection(&[to_c(e0.clone()), to_c(e1.clone()), row(&e0), row(&e1)]);
            (&d * &d, p)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub size: usize,
    /// k-th singular value of `j (F − F*)`.
    pub sigma_selfadjointness: f64,
    /// k-th singular value of `[F, a]`.
    pub sigma_commutator: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayTable {
    pub model: DecayModel,
    pub order: usize,
    pub cutoff: Cutoff,
    pub k: usize,
    pub rows: Vec<DecayRow>,
}

/// k-th singular value (1-based) of `j (F − F*)` and `[F, a]`.
pub fn probe_values(f: &CMat, j: &[f64], a: &[f64], k: usize) -> (f64, f64) {
    let jm = diag(j);
    let am = diag(a);
    let s1 = linalg::singular_values(&(jm * (f - f.adjoint())));
    let s2 = linalg::singular_values(&comm(f, &am));
    let pick = |s: &[f64]| s.get(k.saturating_sub(1)).cloned().unwrap_or(0.0);
    (pick(&s1), pick(&s2))
}

/// Decay table over truncation sizes. `a` is multiplication by `x`.
pub fn compactness_decay_probe(model: DecayModel, cutoff: Cutoff, sizes: &[usize], k: usize) -> Result<DecayTable> {
    if sizes.iter().any(|&n| n < 2 * model.order() + 2) {
        return Err(Error::invalid("truncation sizes too small for the model"));
    }
    let rows = sizes
        .iter()
        .map(|&n| {
            let basis = NodalBasis::new(n);
            let (t_e, p) = model_operator(model, &basis);
            let f = bounded_transform(&(t_e * p));
            let j = basis.sample(|x| cutoff.eval(x));
            let a = basis.sample(|x| x);
            let (s1, s2) = probe_values(&f, &j, &a, k);
            DecayRow { size: n, sigma_selfadjointness: s1, sigma_commutator: s2 }
        })
        .collect();
    Ok(DecayTable { model, order: model.order(), cutoff, k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn transform_examples() {
        assert_eq!(bounded_transform(&CMat::zeros(3, 2)).norm(), 0.0);
        let f = bounded_transform(&CMat::from_element(1, 1, c(3.0, 0.0)));
        assert!((f[(0, 0)].re - 3.0 / 10f64.sqrt()).abs() < 1e-14);
        let mut r = rng(1);
        let t = linalg::random_matrix(&mut r, 6, 6) * c(3.0, 0.0);
        let u = linalg::random_unitary(&mut r, 6);
        let lhs = bounded_transform(&(&u * &t * u.adjoint()));
        let rhs = &u * bounded_transform(&t) * u.adjoint();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn transform_keeps_kernel_and_range() {
        let mut r = rng(2);
        let t = linalg::random_matrix(&mut r, 7, 3) * linalg::random_matrix(&mut r, 3, 5);
        let chk = check_bounded_transform(&t);
        assert!(chk.norm < 1.0);
        assert_eq!(chk.rank_t, 3);
        assert_eq!(chk.rank_f, 3);
        assert!(chk.range_residual < 1e-10 && chk.kernel_residual < 1e-10);
    }

    #[test]
    fn integral_formula() {
        let one = CMat::from_element(1, 1, c(1.0, 0.0));
        let f = baaj_julg_quadrature(&one, 200).unwrap();
        assert!((f[(0, 0)].re - 0.5f64.sqrt()).abs() < 1e-8);
        assert_eq!(baaj_julg_quadrature(&CMat::zeros(3, 3), 8).unwrap().norm(), 0.0);
        assert!(baaj_julg_quadrature(&one, 4).is_err());
        let mut r = rng(3);
        let t = linalg::random_matrix(&mut r, 20, 20);
        let t = &t * c(5.0 / linalg::op_norm(&t), 0.0);
        assert!(baaj_julg_error(&t, 200).unwrap() <= 1e-6);
    }

    #[test]
    fn integral_error_shrinks_with_nodes() {
        let mut r = rng(4);
        let t = linalg::random_matrix(&mut r, 10, 10);
        let t = &t * c(10.0 / linalg::op_norm(&t), 0.0);
        let errs: Vec<f64> = [25, 50, 100, 200].iter().map(|&n| baaj_julg_error(&t, n).unwrap()).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= (0.5 * w[0]).max(1e-13), "{errs:?}");
        }
    }

    #[test]
    fn polar_examples() {
        let t = linalg::diag(&[c(2.0, 0.0), c(0.0, 0.0)]);
        let rep = polar_isometry_limit(&t, &[0.1]).unwrap();
        assert!((rep.v.clone() - linalg::diag(&[c(1.0, 0.0), c(0.0, 0.0)])).norm() < 1e-14);
        let exact = 1.0 - 2.0 / (0.1f64 + 4.0).sqrt();
        assert!((rep.rows[0].error - exact).abs() < 1e-12);
        assert!(rep.rows[0].error <= 0.0125);
        let mut r = rng(5);
        let t = linalg::random_matrix(&mut r, 5, 5);
        let rep = polar_isometry_limit(&t, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert!((rep.v.adjoint() * &rep.v - CMat::identity(5, 5)).norm() < 1e-10);
        assert!(rep.rows.iter().all(|r| r.within_bound));
        assert!(polar_isometry_limit(&t, &[1e-2, 1e-1]).is_err());
    }

    #[test]
    fn resolvent_identities_hold() {
        for seed in 0..10 {
            let (op, mu) = random_resolvent_case(seed, 9).unwrap();
            let rep = verify_resolvent_identities(&op, mu).unwrap();
            assert!(rep.max_residual <= 1e-10, "{rep:?}");
        }
    }

    #[test]
    fn multipliers_are_validated() {
        let t = CMat::identity(2, 2);
        assert!(FiniteOperator::masked(t.clone(), &[true, false], vec![0.5, 1.5], vec![0.0, 0.0]).is_err());
        assert!(FiniteOperator::masked(t, &[true], vec![0.5, 0.5], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn nodal_derivative_is_exact() {
        let b = NodalBasis::new(12);
        let d = b.derivative();
        let u: Vec<_> = (0..12).map(|i| c(b.sqrt_w[i] * b.x[i].powi(5), 0.0)).collect();
        let du = &d * crate::CVec::from_vec(u);
        for i in 0..12 {
            assert!((du[i].re / b.sqrt_w[i] - 5.0 * b.x[i].powi(4)).abs() < 1e-9);
        }
        let e = b.point_evaluation(1.0);
        let val: f64 = (0..12).map(|j| e[j] * b.sqrt_w[j] * b.x[j].powi(3)).sum();
        assert!((val - 1.0).abs() < 1e-10);
    }

    #[test]
    fn decay_probe_trivial_cases() {
        let t = compactness_decay_probe(DecayModel::FirstOrder, Cutoff::Zero, &[16, 32], 5).unwrap();
        assert!(t.rows.iter().all(|r| r.sigma_selfadjointness == 0.0));
        let mut r = rng(6);
        let g = linalg::random_matrix(&mut r, 8, 8);
        let f = bounded_transform(&(&g + g.adjoint()));
        let (s, _) = probe_values(&f, &[1.0; 8], &[0.5; 8], 1);
        assert!(s < 1e-12);
    }

    #[test]
    fn decay_probe_converges() {
        let bump = Cutoff::Bump { center: 0.5, width: 0.25 };
        let t = compactness_decay_probe(DecayModel::FirstOrder, bump, &[32, 64, 128], 5).unwrap();
        let v: Vec<f64> = t.rows.iter().map(|r| r.sigma_selfadjointness).collect();
        assert!((v[2] - v[1]).abs() < (v[1] - v[0]).abs(), "{v:?}");
        let t2 = compactness_decay_probe(DecayModel::SecondOrder, bump, &[32, 64], 3).unwrap();
        assert_eq!(t2.order, 2);
    }
}
