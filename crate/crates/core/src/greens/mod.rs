//! Traces, the boundary matrix of Green's formula, and its verification.
//!
//! Traces are taken along the inward normal: on the disc `∂_{x_n} = −∂_r`,
//! on the interval `x_n = x` at 0 and `x_n = 1 − x` at 1. The boundary
//! pairing is `⟨u, v⟩ = ∫ vᴴ u dθ` (a plain sum at interval endpoints).

pub mod seeley;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

pub use seeley::{build_seeley_matrix, invert_seeley, BoundaryComponent, SeeleyMatrix, TangentialOp};

use crate::linalg::c;
use crate::poly::{DiscPoly, DiscSection, LinePoly};
use crate::quadrature::{self, DiscRule};
use crate::symbolcore::{minus_i_pow, Domain, OperatorForm, OperatorSpec};
use crate::tolerances::Tolerances;
use crate::{CMat, CVec, Error, Result, C64};

/// Test section for Green's formula.
#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    /// Polynomial in `z, z̄` on the closed disc.
    Disc(DiscSection),
    /// `poly` on `|z| < radius`, zero outside. Built with a factor
    /// `(radius² − z z̄)^k`, `k` larger than the operator order, so the
    /// section is smooth enough and all traces vanish.
    DiscBump { poly: DiscSection, radius: f64 },
    /// Polynomial in `x` on `[0, 1]`.
    Interval(Vec<LinePoly>),
}

impl Section {
    pub fn scalar(p: DiscPoly) -> Self {
        Section::Disc(vec![p])
    }

    /// `p · (radius² − z z̄)^k` supported in `|z| < radius < 1`.
    pub fn bump(p: DiscSection, radius: f64, k: u32) -> Result<Self> {
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::invalid("bump radius must lie in (0, 1)"));
        }
        let mut w = DiscPoly::constant(c(radius * radius, 0.0));
        w.add_term(1, 1, c(-1.0, 0.0));
        let mut factor = DiscPoly::constant(c(1.0, 0.0));
        for _ in 0..k {
            factor = &factor * &w;
        }
        Ok(Section::DiscBump { poly: p.iter().map(|q| q * &factor).collect(), radius })
    }
}

/// Traces `γ_0 f, …, γ_{m−1} f` on one boundary component, as Fourier
/// series (mode → fiber vector). Endpoints use mode 0 only.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceVector {
    pub boundary: BoundaryComponent,
    pub gamma: Vec<BTreeMap<i64, CVec>>,
}

impl TraceVector {
    /// `D_{x_n}` frame: `ρ_k = (−i)^k γ_k`.
    pub fn rho(&self) -> Vec<BTreeMap<i64, CVec>> {
        self.gamma
            .iter()
            .enumerate()
            .map(|(k, g)| g.iter().map(|(&n, v)| (n, v * minus_i_pow(k as i64))).collect())
            .collect()
    }

    /// Samples of every component at `θ_j = 2πj/n`.
    pub fn samples(&self, n: usize) -> Vec<Vec<CVec>> {
        self.gamma
            .iter()
            .map(|g| {
                let r = g.values().next().map(|v| v.len()).unwrap_or(0);
                (0..n)
                    .map(|j| {
                        let th = 2.0 * PI * j as f64 / n as f64;
                        let mut acc = CVec::zeros(r);
                        for (&m, v) in g {
                            acc += v * C64::from_polar(1.0, m as f64 * th);
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest mismatch between sampled and Fourier `L²` norms.
    pub fn parseval_defect(&self, n: usize) -> f64 {
        let samples = self.samples(n);
        self.gamma
            .iter()
            .zip(&samples)
            .map(|(g, s)| {
                let fourier: f64 = 2.0 * PI * g.values().map(|v| v.norm_squared()).sum::<f64>();
                let sampled: f64 = 2.0 * PI / n as f64 * s.iter().map(|v| v.norm_squared()).sum::<f64>();
                (fourier - sampled).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Mixed norm `Σ_l ‖γ_l‖²_{H^{s−l}}`, square-rooted.
    pub fn mixed_norm(&self, s: f64) -> f64 {
        self.gamma
            .iter()
            .enumerate()
            .map(|(l, g)| hs_norm(g, s - l as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `‖u‖²_{H^s(S¹)} = 2π Σ_n (1 + n²)^s |û_n|²`.
pub fn hs_norm(u: &BTreeMap<i64, CVec>, s: f64) -> f64 {
    (2.0 * PI
        * u.iter()
            .map(|(&n, v)| (1.0 + (n * n) as f64).powf(s) * v.norm_squared())
            .sum::<f64>())
    .sqrt()
}

/// Boundary pairing `Σ_q ⟨u_q, v_q⟩`.
fn boundary_pairing(b: BoundaryComponent, u: &[BTreeMap<i64, CVec>], v: &[BTreeMap<i64, CVec>]) -> C64 {
    let weight = match b {
        BoundaryComponent::Circle => 2.0 * PI,
        BoundaryComponent::Endpoint(_) => 1.0,
    };
    let mut acc = c(0.0, 0.0);
    for (uq, vq) in u.iter().zip(v) {
        for (n, a) in uq {
            if let Some(b) = vq.get(n) {
                acc += b.dotc(a);
            }
        }
    }
    acc * weight
}

/// Exact traces of an analytic section.
pub fn trace(spec: &OperatorSpec, f: &Section) -> Result<Vec<TraceVector>> {
    let m = spec.order;
    match (spec.domain, f) {
        (Domain::UnitDisc, Section::Disc(sec)) => {
            let r = sec.len();
            let gamma = (0..m)
                .map(|k| {
                    let mut out: BTreeMap<i64, CVec> = BTreeMap::new();
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    for (i, p) in sec.iter().enumerate() {
                        for (n, v) in p.radial_derivative_on_circle(k as u32) {
                            out.entry(n).or_insert_with(|| CVec::zeros(r))[i] += v * sign;
                        }
                    }
                    out.retain(|_, v| v.norm() > 0.0);
                    out
                })
                .collect();
            Ok(vec![TraceVector { boundary: BoundaryComponent::Circle, gamma }])
        }
        (Domain::UnitDisc, Section::DiscBump { .. }) => Ok(vec![TraceVector {
            boundary: BoundaryComponent::Circle,
            gamma: vec![BTreeMap::new(); m],
        }]),
        (Domain::Interval, Section::Interval(sec)) => Ok([0u8, 1]
            .into_iter()
            .map(|e| {
                let gamma = (0..m)
                    .map(|k| {
                        let x = e as f64;
                        let sign = if e == 1 && k % 2 == 1 { -1.0 } else { 1.0 };
                        let v = CVec::from_iterator(
                            sec.len(),
                            sec.iter().map(|p| p.derivative(k).eval(x) * sign),
                        );
                        let mut g = BTreeMap::new();
                        if v.norm() > 0.0 {
                            g.insert(0, v);
                        }
                        g
                    })
                    .collect();
                TraceVector { boundary: BoundaryComponent::Endpoint(e), gamma }
            })
            .collect()),
        _ => Err(Error::invalid("section does not live on the operator's domain")),
    }
}

/// Apply an interval collar operator `Σ_j A_j D_x^{m−j}` (or its formal
/// adjoint) to a polynomial section.
fn apply_interval(spec: &OperatorSpec, f: &[LinePoly], adjoint: bool) -> Result<Vec<LinePoly>> {
    let OperatorForm::Collar(col) = &spec.form else {
        return Err(Error::invalid("interval operators are given in collar form"));
    };
    let m = spec.order;
    let rows = if adjoint { spec.rank_e } else { spec.rank_f };
    let len = f.iter().map(|p| p.coeffs.len()).max().unwrap_or(0);
    let mut out = vec![LinePoly::new(vec![c(0.0, 0.0); len]); rows];
    for j in 0..=m {
        let a = col.constant_part(j, spec.rank_f, spec.rank_e);
        let a = if adjoint { a.adjoint() } else { a };
        let k = m - j;
        let derivs: Vec<LinePoly> = f.iter().map(|p| p.derivative(k)).collect();
        let factor = minus_i_pow(k as i64);
        for (i, o) in out.iter_mut().enumerate() {
            for (l, d) in derivs.iter().enumerate() {
                for (p, v) in d.coeffs.iter().enumerate() {
                    o.coeffs[p] += a[(i, l)] * *v * factor;
                }
            }
        }
    }
    Ok(out)
}

fn interval_inner(f: &[LinePoly], g: &[LinePoly], nodes: usize) -> C64 {
    let rule = quadrature::gauss_legendre(nodes, 0.0, 1.0);
    let mut acc = c(0.0, 0.0);
    for (u, v) in f.iter().zip(g) {
        for &(x, w) in &rule {
            acc += u.eval(x) * v.eval(x).conj() * w;
        }
    }
    acc
}

/// Green residual with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct GreenCheck {
    pub residual: f64,
    #[serde(serialize_with = "crate::cli::json::ser_c64")]
    pub volume_term: C64,
    #[serde(serialize_with = "crate::cli::json::ser_c64")]
    pub boundary_term: C64,
    /// Number of quadrature refinements used to confirm convergence.
    pub quadrature_level: u32,
    pub tolerance: f64,
}

/// `|⟨f, D†g⟩ − ⟨Df, g⟩ − ⟨𝔄γf, γg⟩|`.
pub fn verify_greens_formula(
    spec: &OperatorSpec,
    f: &Section,
    g: &Section,
    tol: &Tolerances,
) -> Result<GreenCheck> {
    let seeley = build_seeley_matrix(spec)?;
    let (volume, level) = match (f, g) {
        (Section::Interval(fs), Section::Interval(gs)) => {
            let df = apply_interval(spec, fs, false)?;
            let dg = apply_interval(spec, gs, true)?;
            let deg = fs.iter().chain(gs).map(|p| p.degree()).max().unwrap_or(0);
            let n = deg + 2;
            let coarse = interval_inner(fs, &dg, n) - interval_inner(&df, gs, n);
            let fine = interval_inner(fs, &dg, 2 * n) - interval_inner(&df, gs, 2 * n);
            if (coarse - fine).norm() > 1e-12 * (1.0 + fine.norm()) {
                return Err(Error::QuadratureError("interval quadrature did not converge".into()));
            }
            (fine, 1)
        }
        _ => {
            let z = spec.z_operator()?;
            let zadj = spec.formal_adjoint()?.z_operator()?;
            match (f, g) {
                (Section::Disc(fs), Section::Disc(gs)) => {
                    let (a, _) = quadrature::inner_converged(fs, &zadj.apply(gs), 1e-13)?;
                    let (b, _) = quadrature::inner_converged(&z.apply(fs), gs, 1e-13)?;
                    (a - b, 1)
                }
                (Section::DiscBump { poly: fs, radius: rf }, Section::DiscBump { poly: gs, radius: rg }) => {
                    // both supported in the smaller disc
                    let rho = rf.min(*rg);
                    let a = bump_inner(fs, &zadj.apply(gs), rho)?;
                    let b = bump_inner(&z.apply(fs), gs, rho)?;
                    (a - b, 1)
                }
                _ => return Err(Error::invalid("mixed section kinds in a Green pair")),
            }
        }
    };
    let tf = trace(spec, f)?;
    let tg = trace(spec, g)?;
    let mut boundary = c(0.0, 0.0);
    for (s, (a, b)) in seeley.iter().zip(tf.iter().zip(&tg)) {
        let af = s.apply(&a.rho());
        boundary += boundary_pairing(s.boundary, &af, &b.rho());
    }
    Ok(GreenCheck {
        residual: (volume - boundary).norm(),
        volume_term: volume,
        boundary_term: boundary,
        quadrature_level: level,
        tolerance: tol.green,
    })
}

/// `∫_{|z|<ρ} f ḡ` by scaling the unit-disc rule, with one refinement.
fn bump_inner(f: &DiscSection, g: &DiscSection, rho: f64) -> Result<C64> {
    let deg = f.iter().chain(g).map(|p| p.degree()).max().unwrap_or(0);
    let eval = |rule: &DiscRule| -> Result<C64> {
        let mut acc = c(0.0, 0.0);
        for (u, v) in f.iter().zip(g) {
            for (&(a, b), &x) in &u.terms {
                for (&(p, q), &y) in &v.terms {
                    let k = (a + q + b + p) as i32;
                    acc += x * y.conj() * rule.monomial(a + q, b + p)? * rho.powi(k + 2);
                }
            }
        }
        Ok(acc)
    };
    let rule = DiscRule::for_degree(2 * deg);
    let coarse = eval(&rule)?;
    let fine = eval(&rule.refined())?;
    if (coarse - fine).norm() > 1e-13 * (1.0 + fine.norm()) {
        return Err(Error::QuadratureError("bump quadrature did not converge".into()));
    }
    Ok(fine)
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRatio {
    pub index: usize,
    pub trace_norm: f64,
    pub graph_norm: f64,
    pub ratio: f64,
}

/// `‖γf‖_{ℍ^{−1/2}} / ‖f‖_D` over a family of kernel elements.
pub fn trace_norm_ratio(spec: &OperatorSpec, family: &[DiscSection], tol: &Tolerances) -> Result<Vec<TraceRatio>> {
    let z = spec.z_operator()?;
    family
        .iter()
        .enumerate()
        .map(|(index, f)| {
            if f.iter().all(|p| p.is_zero()) {
                return Err(Error::invalid(format!("family member {index} is zero")));
            }
            let deg = f.iter().map(|p| p.degree()).max().unwrap_or(0);
            let rule = DiscRule::for_degree(2 * deg);
            let df = z.apply(f);
            let l2 = rule.inner_sections(f, f)?.re;
            let dl2 = rule.inner_sections(&df, &df)?.re;
            if dl2.sqrt() > tol.ker * l2.sqrt() {
                return Err(Error::invalid(format!("family member {index} is not in the kernel")));
            }
            let graph_norm = (l2 + dl2).sqrt();
            let tv = trace(spec, &Section::Disc(f.clone()))?;
            let trace_norm = tv[0].mixed_norm(-0.5);
            Ok(TraceRatio { index, trace_norm, graph_norm, ratio: trace_norm / graph_norm })
        })
        .collect()
}

/// Round-trip defect of `invert_seeley` on a trace vector.
pub fn seeley_roundtrip_defect(a: &SeeleyMatrix, u: &[BTreeMap<i64, CVec>]) -> Result<f64> {
    let inv = invert_seeley(a)?;
    let back = inv.apply(&a.apply(u));
    let mut worst: f64 = 0.0;
    for (x, y) in back.iter().zip(u) {
        let keys: std::collections::BTreeSet<i64> = x.keys().chain(y.keys()).copied().collect();
        for k in keys {
            let r = a.rank;
            let xv = x.get(&k).cloned().unwrap_or_else(|| CVec::zeros(r));
            let yv = y.get(&k).cloned().unwrap_or_else(|| CVec::zeros(r));
            worst = worst.max((xv - yv).norm());
        }
    }
    Ok(worst)
}

/// Scalar monomial `c z^a z̄^b` as a one-component section.
pub fn mono(a: u32, b: u32, v: C64) -> DiscSection {
    vec![DiscPoly::monomial(a, b, v)]
}

/// Six polynomial test pairs used for the built-in Green matrix.
pub fn standard_pairs() -> Vec<(String, Section, Section)> {
    let p = |terms: &[(u32, u32, f64, f64)]| {
        let mut q = DiscPoly::zero();
        for &(a, b, re, im) in terms {
            q.add_term(a, b, c(re, im));
        }
        Section::scalar(q)
    };
    vec![
        ("zzbar-1".into(), p(&[(1, 1, 1.0, 0.0)]), p(&[(0, 0, 1.0, 0.0)])),
        ("z3-zbar".into(), p(&[(3, 0, 1.0, 0.0)]), p(&[(0, 1, 1.0, 0.0)])),
        ("mixed-a".into(), p(&[(2, 1, 1.0, 0.5), (0, 0, -1.0, 0.0)]), p(&[(1, 0, 0.0, 1.0), (1, 2, 0.5, 0.0)])),
        ("mixed-b".into(), p(&[(4, 2, 0.3, 0.0), (1, 3, 0.0, -0.7)]), p(&[(2, 2, 1.0, 0.0), (3, 1, 0.2, 0.1)])),
        ("harmonic".into(), p(&[(5, 0, 1.0, 0.0), (0, 3, 0.0, 2.0)]), p(&[(2, 0, 1.0, 0.0), (0, 2, -1.0, 0.0)])),
        ("high".into(), p(&[(3, 3, 1.0, 0.0), (6, 1, 0.0, 0.4)]), p(&[(5, 2, 0.5, -0.5), (1, 1, 1.0, 0.0)])),
    ]
}

/// Dense `m × m` numeric matrix of a constant-coefficient Seeley matrix
/// (interval endpoints), including the prefactor.
pub fn seeley_constant_matrix(a: &SeeleyMatrix) -> Option<CMat> {
    let m = a.size();
    let r = a.rank;
    let mut out = CMat::zeros(m * r, m * r);
    for q in 0..m {
        for s in 0..m {
            for t in &a.entries[q][s].terms {
                if t.power != 0 || t.shift != 0 {
                    return None;
                }
                let blk = &t.matrix * a.prefactor;
                out.view_mut((q * r, s * r), (r, r)).copy_from(&blk);
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;
    use crate::symbolcore::{Builtin, CollarForm};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn trace_examples() {
        let spec = OperatorSpec::builtin(Builtin::Laplacian);
        let t = trace(&spec, &Section::Disc(mono(4, 0, c(1.0, 0.0)))).unwrap();
        assert_eq!(t[0].gamma[0][&4][0], c(1.0, 0.0));
        assert_eq!(t[0].gamma[1][&4][0], c(-4.0, 0.0));
        let k = trace(&spec, &Section::Disc(mono(0, 0, c(3.0, 0.0)))).unwrap();
        assert!(k[0].gamma[1].is_empty());
        assert!(t[0].parseval_defect(32) < 1e-12);
    }

    #[test]
    fn laplacian_closed_form_pair() {
        // f = z z̄, g = 1: ⟨f, Δg⟩ = 0, ⟨Δf, g⟩ = ∫ −4 = −4π.
        let spec = OperatorSpec::builtin(Builtin::Laplacian);
        let f = Section::Disc(mono(1, 1, c(1.0, 0.0)));
        let g = Section::Disc(mono(0, 0, c(1.0, 0.0)));
        let chk = verify_greens_formula(&spec, &f, &g, &tol()).unwrap();
        assert!((chk.volume_term - c(4.0 * PI, 0.0)).norm() < 1e-12);
        assert!(chk.residual <= 1e-8, "{chk:?}");
    }

    #[test]
    fn cauchy_riemann_pair() {
        let spec = OperatorSpec::builtin(Builtin::DbarPower(1));
        let f = Section::Disc(mono(3, 0, c(1.0, 0.0)));
        let g = Section::Disc(mono(0, 1, c(1.0, 0.0)));
        assert!(verify_greens_formula(&spec, &f, &g, &tol()).unwrap().residual <= 1e-8);
    }

    #[test]
    fn builtin_matrix_of_pairs() {
        for b in [Builtin::DbarPower(1), Builtin::DbarPower(2), Builtin::Laplacian, Builtin::Bilaplacian] {
            let spec = OperatorSpec::builtin(b);
            for (id, f, g) in standard_pairs() {
                let chk = verify_greens_formula(&spec, &f, &g, &tol()).unwrap();
                assert!(chk.residual <= 1e-8, "{} {id}: {chk:?}", b.name());
            }
        }
    }

    #[test]
    fn bump_has_no_boundary_term() {
        let spec = OperatorSpec::builtin(Builtin::Laplacian);
        let mut p = DiscPoly::monomial(2, 1, c(1.0, 0.0));
        p.add_term(0, 0, c(0.0, 1.0));
        let f = Section::bump(vec![p], 0.7, 4).unwrap();
        let t = trace(&spec, &f).unwrap();
        assert!(t[0].gamma.iter().all(|g| g.is_empty()));
        let chk = verify_greens_formula(&spec, &f, &f, &tol()).unwrap();
        assert!(chk.residual <= 1e-10);
        assert_eq!(chk.boundary_term, c(0.0, 0.0));
    }

    #[test]
    fn zeroth_order_perturbation_keeps_green_matrix() {
        let spec = OperatorSpec::builtin(Builtin::DbarPower(1))
            .perturbed((0, 0), CMat::from_element(1, 1, c(0.1, 0.0)))
            .unwrap();
        for (_, f, g) in standard_pairs() {
            assert!(verify_greens_formula(&spec, &f, &g, &tol()).unwrap().residual <= 1e-8);
        }
        let first = OperatorSpec::builtin(Builtin::Laplacian)
            .perturbed((1, 0), CMat::from_element(1, 1, c(1.0, 0.0)))
            .unwrap();
        assert!(matches!(build_seeley_matrix(&first), Err(Error::CollarUnavailable(_))));
    }

    #[test]
    fn interval_green_identity() {
        // Second-order 2x2 system with lower-order terms.
        let a0 = crate::linalg::from_rows(&[vec![c(1.0, 0.0), c(0.2, 0.1)], vec![c(0.0, 0.0), c(2.0, 0.0)]]);
        let a1 = crate::linalg::from_rows(&[vec![c(0.0, 1.0), c(0.0, 0.0)], vec![c(0.5, 0.0), c(-1.0, 0.0)]]);
        let a2 = CMat::identity(2, 2) * c(0.3, 0.0);
        let spec = OperatorSpec::collar("sys", Domain::Interval, 2, 2, CollarForm::constant(vec![a0, a1, a2])).unwrap();
        let f = Section::Interval(vec![
            LinePoly::new(vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0), c(0.5, 0.0)]),
            LinePoly::new(vec![c(0.0, 0.0), c(1.0, 0.0)]),
        ]);
        let g = Section::Interval(vec![
            LinePoly::new(vec![c(0.0, 1.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
            LinePoly::new(vec![c(2.0, 0.0), c(0.0, 0.0), c(1.0, -1.0)]),
        ]);
        let chk = verify_greens_formula(&spec, &f, &g, &tol()).unwrap();
        assert!(chk.residual <= 1e-10, "{chk:?}");
        let s = build_seeley_matrix(&spec).unwrap();
        assert!(s.iter().all(|m| m.is_anti_triangular()));
    }

    #[test]
    fn seeley_inverse_roundtrip() {
        let spec = OperatorSpec::builtin(Builtin::Laplacian);
        let a = build_seeley_matrix(&spec).unwrap().remove(0);
        let inv = invert_seeley(&a).unwrap();
        assert!((inv.prefactor - I).norm() < 1e-15);
        let u: Vec<BTreeMap<i64, CVec>> = (0..2)
            .map(|k| (-3..=3).map(|n| (n, CVec::from_element(1, c(n as f64 + k as f64, 1.0)))).collect())
            .collect();
        assert!(seeley_roundtrip_defect(&a, &u).unwrap() <= 1e-9);
    }

    #[test]
    fn cauchy_riemann_trace_ratio() {
        let spec = OperatorSpec::builtin(Builtin::DbarPower(1));
        let family: Vec<DiscSection> = (0..=40).map(|n| mono(n, 0, c(1.0, 0.0))).collect();
        let table = trace_norm_ratio(&spec, &family, &tol()).unwrap();
        for row in &table {
            let n = row.index as f64;
            let expect = (2.0 * (n + 1.0) / (1.0 + n * n).sqrt()).sqrt();
            assert!((row.ratio - expect).abs() < 1e-10);
        }
        assert!(trace_norm_ratio(&spec, &[vec![DiscPoly::zero()]], &tol()).is_err());
        assert!(trace_norm_ratio(&spec, &[mono(0, 1, c(1.0, 0.0))], &tol()).is_err());
    }

    #[test]
    fn duality_bound() {
        let mut u = BTreeMap::new();
        let mut v = BTreeMap::new();
        for n in -5i64..=5 {
            u.insert(n, CVec::from_element(1, c(n as f64, 1.0)));
            v.insert(n, CVec::from_element(1, c(1.0, -(n as f64) * 0.5)));
        }
        let pair = boundary_pairing(BoundaryComponent::Circle, &[u.clone()], &[v.clone()]).norm();
        for s in [-1.0, -0.5, 0.0, 0.7, 2.0] {
            assert!(pair <= hs_norm(&u, s) * hs_norm(&v, -s) * (1.0 + 1e-10));
        }
    }
}
