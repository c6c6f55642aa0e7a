//! Generalized Bergman spaces `Ker D_max ⊂ L²(D)` on the unit disc, Toeplitz
//! compressions `P α P`, and brute-force Fredholm indices.
//!
//! Closed forms: `(∂_x + i∂_y)^m` has kernel spanned by `z̄^j z^n` (`j < m`),
//! harmonic functions by `z^n, z̄^n`, biharmonic ones additionally by
//! `|z|² z^n, |z|² z̄^n`. Anything else goes through a numerical nullspace
//! over a band of monomials.
//!
//! Index estimation uses rectangular finite sections. The domain is the
//! first `n` basis elements; the codomain holds every basis element of
//! degree up to the largest degree `P(α b_j)` can reach, so each column is
//! the exact image. Kernel dimensions of the sections of `α` and `α*` are
//! then read off from their singular values.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{self, c};
use crate::poly::{DiscPoly, DiscSection, MatPoly};
use crate::quadrature::DiscRule;
use crate::symbolcore::{Builtin, OperatorSpec, ZOperator};
use crate::tolerances::Tolerances;
use crate::{CMat, Error, Result, C64};

/// Default truncation schedule (basis elements).
pub const DEFAULT_SCHEDULE: [usize; 3] = [40, 60, 80];

/// Default depth of the monomial band used by the numerical kernel.
pub const DEFAULT_BAND_DEPTH: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSource {
    ClosedForm,
    Numerical,
}

/// Orthonormal truncation of `Ker D_max`.
#[derive(Debug, Clone)]
pub struct BergmanBasis {
    pub operator: String,
    /// Elements of degree at most this were requested.
    pub max_degree: u32,
    pub source: BasisSource,
    pub elements: Vec<DiscSection>,
    /// Degree of the generator each element was orthonormalized from.
    pub degrees: Vec<u32>,
    pub rank: usize,
    /// `max_i ‖D b_i‖ / ‖b_i‖`.
    pub max_residual: f64,
    /// `‖G − I‖` after orthonormalization.
    pub gram_defect: f64,
    /// Node counts `(radial, angular)` of the Gram quadrature.
    pub quadrature_nodes: (usize, usize),
}

impl BergmanBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.elements
            .iter()
            .flat_map(|s| s.iter().map(|p| p.degree()))
            .max()
            .unwrap_or(0)
    }
}

/// Closed-form generators of degree `≤ n`, in degree order.
fn closed_form_generators(b: Builtin, n: u32) -> Option<Vec<(u32, DiscPoly)>> {
    let one = c(1.0, 0.0);
    let mut out = Vec::new();
    for d in 0..=n {
        match b {
            Builtin::DbarPower(m) => {
                for j in 0..m.min(d + 1) {
                    out.push((d, DiscPoly::monomial(d - j, j, one)));
                }
            }
            Builtin::Laplacian => {
                out.push((d, DiscPoly::monomial(d, 0, one)));
                if d > 0 {
                    out.push((d, DiscPoly::monomial(0, d, one)));
                }
            }
            Builtin::Bilaplacian => {
                out.push((d, DiscPoly::monomial(d, 0, one)));
                if d > 0 {
                    out.push((d, DiscPoly::monomial(0, d, one)));
                }
                if d >= 2 {
                    out.push((d, DiscPoly::monomial(d - 1, 1, one)));
                    if d > 2 {
                        out.push((d, DiscPoly::monomial(1, d - 1, one)));
                    }
                }
            }
            Builtin::Wave => return None,
        }
    }
    Some(out)
}

/// Orthonormalize generators (already in the desired order) with a Gram
/// matrix from quadrature and a Cholesky factor.
fn orthonormalize(
    generators: &[(u32, DiscSection)],
    rule: &DiscRule,
) -> Result<(Vec<DiscSection>, f64)> {
    let n = generators.len();
    let norms: Vec<f64> = generators
        .iter()
        .map(|(_, g)| rule.inner_sections(g, g).map(|v| v.re.sqrt()))
        .collect::<Result<_>>()?;
    if norms.contains(&0.0) {
        return Err(Error::KernelResolutionFailure("zero generator".into()));
    }
    let scaled: Vec<DiscSection> = generators
        .iter()
        .zip(&norms)
        .map(|((_, g), &nv)| g.iter().map(|p| p.scale(c(1.0 / nv, 0.0))).collect())
        .collect();
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| rule.inner_sections(&scaled[j], &scaled[i])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let gram = CMat::from_fn(n, n, |i, j| rows[i][j]);
    let r = linalg::gram_orthonormalizer(&gram).ok_or_else(|| {
        Error::KernelResolutionFailure("Gram matrix is not positive definite".into())
    })?;
    let elements: Vec<DiscSection> = (0..n)
        .map(|j| {
            let rank = scaled[0].len();
            let mut e = vec![DiscPoly::zero(); rank];
            for i in 0..=j {
                let w = r[(i, j)];
                if w == c(0.0, 0.0) {
                    continue;
                }
                for (k, p) in scaled[i].iter().enumerate() {
                    e[k] = &e[k] + &p.scale(w);
                }
            }
            e
        })
        .collect();
    let check = r.adjoint() * &gram * &r;
    let defect = (check - CMat::identity(n, n)).norm();
    Ok((elements, defect))
}

fn residual_ratio(z: &ZOperator, f: &DiscSection, rule: &DiscRule) -> Result<f64> {
    let df = z.apply(f);
    let a = rule.inner_sections(&df, &df)?.re.max(0.0).sqrt();
    let b = rule.inner_sections(f, f)?.re.sqrt();
    Ok(a / b)
}

/// Orthonormal basis of the degree-`≤ n` part of `Ker D_max`.
pub fn kernel_basis(spec: &OperatorSpec, n: u32, tol: &Tolerances) -> Result<BergmanBasis> {
    kernel_basis_with(spec, n, tol, false, DEFAULT_BAND_DEPTH)
}

/// As [`kernel_basis`], optionally forcing the numerical route.
pub fn kernel_basis_with(
    spec: &OperatorSpec,
    n: u32,
    tol: &Tolerances,
    force_numerical: bool,
    band_depth: u32,
) -> Result<BergmanBasis> {
    let z = spec.z_operator()?;
    let closed = if spec.is_pure_builtin() && !force_numerical {
        spec.family.and_then(|b| closed_form_generators(b, n))
    } else {
        None
    };
    let (generators, source) = match closed {
        Some(g) => (g.into_iter().map(|(d, p)| (d, vec![p])).collect::<Vec<_>>(), BasisSource::ClosedForm),
        None => (numerical_kernel(&z, n, band_depth, tol)?, BasisSource::Numerical),
    };
    let deg = generators
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.degree()))
        .max()
        .unwrap_or(0);
    let rule = DiscRule::for_degree(2 * deg + 2 * z.max_order());
    if generators.is_empty() {
        return Ok(BergmanBasis {
            operator: spec.label.clone(),
            max_degree: n,
            source,
            elements: Vec::new(),
            degrees: Vec::new(),
            rank: spec.rank_e,
            max_residual: 0.0,
            gram_defect: 0.0,
            quadrature_nodes: rule.node_counts(),
        });
    }
    let (elements, gram_defect) = orthonormalize(&generators, &rule)?;
    let residuals: Vec<f64> = elements
        .par_iter()
        .map(|e| residual_ratio(&z, e, &rule))
        .collect::<Result<_>>()?;
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    if max_residual > tol.ker {
        return Err(Error::KernelResolutionFailure(format!(
            "basis residual {max_residual:.2e} exceeds {:.0e}",
            tol.ker
        )));
    }
    Ok(BergmanBasis {
        operator: spec.label.clone(),
        max_degree: n,
        source,
        degrees: generators.iter().map(|(d, _)| *d).collect(),
        elements,
        rank: spec.rank_e,
        max_residual,
        gram_defect,
        quadrature_nodes: rule.node_counts(),
    })
}

/// Numerical nullspace of `D` over the band
/// `{z^a z̄^b : a + b ≤ n + 2J, min(a, b) ≤ J}` in every fiber component.
///
/// Equations are kept only where every monomial feeding them lies in the
/// ansatz. The system splits into connected components; each nullspace is
/// brought to echelon form with pivots on the lowest-degree monomials, and
/// only candidates with pivot degree `≤ n` and relative residual below
/// `τ_ker` survive.
fn numerical_kernel(z: &ZOperator, n: u32, depth: u32, tol: &Tolerances) -> Result<Vec<(u32, DiscSection)>> {
    let top = n + 2 * depth;
    let re = z.rank_e;
    let rf = z.rank_f;
    // unknowns: (fiber, a, b)
    let mut unknowns: Vec<(usize, u32, u32)> = Vec::new();
    for fib in 0..re {
        for d in 0..=top {
            for b in 0..=d {
                let a = d - b;
                if a.min(b) <= depth {
                    unknowns.push((fib, a, b));
                }
            }
        }
    }
    let index: BTreeMap<(usize, u32, u32), usize> =
        unknowns.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    // rows: (fiber_out, c, d) → list of (unknown, coefficient)
    let mut rows: BTreeMap<(usize, u32, u32), Vec<(usize, C64)>> = BTreeMap::new();
    let mut incomplete: std::collections::BTreeSet<(usize, u32, u32)> = Default::default();
    for (&(p, q), m) in &z.terms {
        for fo in 0..rf {
            for fi in 0..re {
                let coef = m[(fo, fi)];
                if coef == c(0.0, 0.0) {
                    continue;
                }
                // every potential target row (fo, cc, dd) needs (fi, cc+p, dd+q)
                for &(f2, a, b) in &unknowns {
                    if f2 != fi || a < p || b < q {
                        continue;
                    }
                    let f = crate::poly::falling(a, p) * crate::poly::falling(b, q);
                    rows.entry((fo, a - p, b - q)).or_default().push((index[&(fi, a, b)], coef * f));
                }
            }
        }
    }
    // a row is complete if all of its preimages are in the ansatz
    for &(fo, cc, dd) in rows.keys() {
        for (&(p, q), m) in &z.terms {
            for fi in 0..re {
                if m[(fo, fi)] != c(0.0, 0.0) && !index.contains_key(&(fi, cc + p, dd + q)) {
                    incomplete.insert((fo, cc, dd));
                }
            }
        }
    }
    let kept: Vec<&Vec<(usize, C64)>> = rows
        .iter()
        .filter(|(k, _)| !incomplete.contains(k))
        .map(|(_, v)| v)
        .collect();

    // connected components over unknowns
    let nu = unknowns.len();
    let mut parent: Vec<usize> = (0..nu).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for row in &kept {
        for w in row.windows(2) {
            let (a, b) = (find(&mut parent, w[0].0), find(&mut parent, w[1].0));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..nu {
        let r = find(&mut parent, i);
        comps.entry(r).or_default().push(i);
    }
    let mut rows_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (ri, row) in kept.iter().enumerate() {
        if let Some(&(u, _)) = row.first() {
            let r = find(&mut parent, u);
            rows_of.entry(r).or_default().push(ri);
        }
    }

    let comp_list: Vec<(usize, Vec<usize>)> = comps.into_iter().collect();
    let candidates: Vec<Vec<(u32, DiscSection)>> = comp_list
        .par_iter()
        .map(|(root, members)| {
            // order members by (degree, b, fiber) so pivots land low
            let mut members = members.clone();
            members.sort_by_key(|&i| {
                let (f, a, b) = unknowns[i];
                (a + b, b, f)
            });
            let local: BTreeMap<usize, usize> = members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            let rws = rows_of.get(root).cloned().unwrap_or_default();
            let mut mat = CMat::zeros(rws.len().max(1), members.len());
            for (r, &ri) in rws.iter().enumerate() {
                for &(u, v) in kept[ri] {
                    mat[(r, local[&u])] += v;
                }
            }
            let ns = if rws.is_empty() {
                CMat::identity(members.len(), members.len())
            } else {
                linalg::nullspace(&mat, 1e-12)
            };
            let ech = column_echelon(ns);
            let mut out = Vec::new();
            for col in 0..ech.ncols() {
                let v = ech.column(col);
                let pivot = (0..v.len()).find(|&k| v[k].norm() > 1e-12);
                let Some(pv) = pivot else { continue };
                let (_, pa, pb) = unknowns[members[pv]];
                if pa + pb > n {
                    continue;
                }
                let mut sec = vec![DiscPoly::zero(); re];
                for (k, &i) in members.iter().enumerate() {
                    if v[k].norm() > 1e-15 {
                        let (f, a, b) = unknowns[i];
                        sec[f].add_term(a, b, v[k]);
                    }
                }
                out.push((pa + pb, sec));
            }
            out
        })
        .collect();
    let mut all: Vec<(u32, DiscSection)> = candidates.into_iter().flatten().collect();
    let deg = all.iter().flat_map(|(_, s)| s.iter().map(|p| p.degree())).max().unwrap_or(0);
    let rule = DiscRule::for_degree(2 * deg + 2 * z.max_order());
    let keep: Vec<bool> = all
        .par_iter()
        .map(|(_, s)| residual_ratio(z, s, &rule).map(|r| r <= 0.1 * tol.ker))
        .collect::<Result<_>>()?;
    let mut it = keep.iter();
    all.retain(|_| *it.next().unwrap());
    all.sort_by(|x, y| {
        let key = |s: &DiscSection| {
            s.iter()
                .flat_map(|p| p.terms.keys().map(|&(a, b)| (a + b, b)))
                .min()
                .unwrap_or((0, 0))
        };
        (x.0, key(&x.1)).cmp(&(y.0, key(&y.1)))
    });
    Ok(all)
}

/// Column echelon form: each column gets a unit pivot in the earliest row
/// possible, with zeros in the other columns' pivot rows.
fn column_echelon(mut m: CMat) -> CMat {
    let (rows, cols) = m.shape();
    let mut col = 0;
    for r in 0..rows {
        if col >= cols {
            break;
        }
        let (best, val) = (col..cols)
            .map(|j| (j, m[(r, j)].norm()))
            .fold((col, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= 1e-10 {
            continue;
        }
        m.swap_columns(col, best);
        let p = m[(r, col)];
        let scaled = m.column(col) / p;
        m.set_column(col, &scaled);
        for j in 0..cols {
            if j != col {
                let f = m[(r, j)];
                if f != c(0.0, 0.0) {
                    let upd = m.column(j) - m.column(col) * f;
                    m.set_column(j, &upd);
                }
            }
        }
        col += 1;
    }
    m.columns(0, col).into_owned()
}

/// A Toeplitz index problem on `(Ker D_max)^{N_α}`.
#[derive(Debug, Clone)]
pub struct ToeplitzProblem {
    pub basis: BergmanBasis,
    pub alpha: MatPoly,
    pub schedule: Vec<usize>,
    pub tol: Tolerances,
    /// Extra degree `P(α b)` may need beyond `deg b + deg α`.
    pub slack: u32,
}

fn degree_slack(spec: &OperatorSpec) -> u32 {
    2 * (spec.order as u32).saturating_sub(1)
}

impl ToeplitzProblem {
    /// Build a basis large enough for the schedule and all exact images.
    pub fn new(spec: &OperatorSpec, alpha: MatPoly, schedule: Vec<usize>, tol: Tolerances) -> Result<Self> {
        Self::with_options(spec, alpha, schedule, tol, false, DEFAULT_BAND_DEPTH)
    }

    pub fn with_options(
        spec: &OperatorSpec,
        alpha: MatPoly,
        schedule: Vec<usize>,
        tol: Tolerances,
        force_numerical: bool,
        band_depth: u32,
    ) -> Result<Self> {
        if schedule.is_empty() || schedule.contains(&0) {
            return Err(Error::invalid("truncation schedule needs positive sizes"));
        }
        let nmax = *schedule.iter().max().unwrap();
        let slack = degree_slack(spec);
        let degrees_at = |d: u32| -> Result<Vec<u32>> {
            if let (true, Some(b)) = (spec.is_pure_builtin() && !force_numerical, spec.family) {
                if let Some(g) = closed_form_generators(b, d) {
                    return Ok(g.iter().map(|(k, _)| *k).collect());
                }
            }
            Ok(kernel_basis_with(spec, d, &tol, force_numerical, band_depth)?.degrees)
        };
        // Kernel dimension grows about linearly in the degree: extrapolate
        // until the basis reaches nmax elements.
        let mut d = 1u32;
        let mut degrees = degrees_at(d)?;
        while degrees.len() < nmax {
            if d > 4096 {
                return Err(Error::KernelResolutionFailure("kernel too small for the schedule".into()));
            }
            let guess = (d as f64 * nmax as f64 / degrees.len().max(1) as f64).ceil() as u32;
            d = guess.clamp(d + 1, 2 * d + 8);
            degrees = degrees_at(d)?;
        }
        let mut sorted = degrees;
        sorted.sort_unstable();
        let mut hi = sorted[nmax - 1];
        loop {
            let total = hi + alpha.degree() + slack;
            let basis = kernel_basis_with(spec, total, &tol, force_numerical, band_depth)?;
            if basis.degrees.iter().filter(|&&g| g <= hi).count() >= nmax {
                return Ok(Self { basis, alpha, schedule, tol, slack });
            }
            if hi > 4096 {
                return Err(Error::KernelResolutionFailure("kernel too small for the schedule".into()));
            }
            hi += 1;
        }
    }

    fn codomain_len(&self, n: usize) -> usize {
        let top = self.basis.degrees[..n].iter().cloned().max().unwrap_or(0) + self.alpha.degree() + self.slack;
        self.basis.degrees.iter().take_while(|&&d| d <= top).count()
    }

    fn rule(&self) -> DiscRule {
        DiscRule::for_degree(2 * self.basis.degree() + self.alpha.degree())
    }
}

/// `⟨b_i ⊗ e_k, α (b_j ⊗ e_l)⟩` for `i < rows`, `j < cols`.
///
/// Written as `Gᴴ M F`: coefficient matrices of the row sections and of the
/// images `α b_j` over their monomials, and the moment matrix
/// `M[(p,q),(a,b)] = ∫ z^{a+q} z̄^{b+p} dA`, which vanishes unless
/// `a − b = p − q` on the same component.
fn section_matrix(basis: &BergmanBasis, alpha: &MatPoly, rows: usize, cols: usize, rule: &DiscRule) -> Result<CMat> {
    let na = alpha.size;
    // monomial key: (component, charge a − b, a, b)
    type Key = (usize, i64, u32, u32);
    fn index_of(keys: &mut BTreeMap<Key, usize>, k: Key) -> usize {
        let n = keys.len();
        *keys.entry(k).or_insert(n)
    }
    let entries: Vec<DiscPoly> = (0..na * na).map(|kl| alpha.entry(kl / na, kl % na)).collect();

    let mut img_keys = BTreeMap::new();
    let mut img_terms = Vec::new();
    for j in 0..cols {
        for l in 0..na {
            for k in 0..na {
                let a = &entries[k * na + l];
                if a.is_zero() {
                    continue;
                }
                for (comp, p) in basis.elements[j].iter().enumerate() {
                    let prod = a * p;
                    for (&(x, y), &v) in &prod.terms {
                        let key = (k * basis.rank + comp, x as i64 - y as i64, x, y);
                        img_terms.push((index_of(&mut img_keys, key), j * na + l, v));
                    }
                }
            }
        }
    }
    let mut row_keys = BTreeMap::new();
    let mut row_terms = Vec::new();
    for i in 0..rows {
        for (comp, p) in basis.elements[i].iter().enumerate() {
            for (&(x, y), &v) in &p.terms {
                for k in 0..na {
                    let key = (k * basis.rank + comp, x as i64 - y as i64, x, y);
                    row_terms.push((index_of(&mut row_keys, key), i * na + k, v));
                }
            }
        }
    }
    let mut f = CMat::zeros(img_keys.len(), cols * na);
    for (m, col, v) in img_terms {
        f[(m, col)] += v;
    }
    let mut g = CMat::zeros(row_keys.len(), rows * na);
    for (m, row, v) in row_terms {
        g[(m, row)] += v;
    }
    // group image monomials by (component, charge) for the moment matrix
    type Group = Vec<(usize, u32, u32)>;
    let mut groups: BTreeMap<(usize, i64), Group> = BTreeMap::new();
    for (&(comp, ch, a, b), &idx) in &img_keys {
        groups.entry((comp, ch)).or_default().push((idx, a, b));
    }
    let mut mom = CMat::zeros(row_keys.len(), img_keys.len());
    for (&(comp, ch, p, q), &ri) in &row_keys {
        if let Some(list) = groups.get(&(comp, ch)) {
            for &(ci, a, b) in list {
                mom[(ri, ci)] = rule.monomial(a + q, b + p)?;
            }
        }
    }
    Ok(g.adjoint() * mom * f)
}

/// Square finite section `[⟨b_i, α b_j⟩]_{i,j < n}`.
pub fn toeplitz_matrix(problem: &ToeplitzProblem, n: usize) -> Result<CMat> {
    if n > problem.basis.len() {
        return Err(Error::QuadratureError(format!(
            "basis has {} elements, section of size {n} requested",
            problem.basis.len()
        )));
    }
    section_matrix(&problem.basis, &problem.alpha, n, n, &problem.rule())
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationRow {
    pub size: usize,
    pub codomain: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    /// Smallest retained over largest discarded singular value.
    pub gap_ratio: f64,
    pub sigma_max: f64,
    pub singular_values_alpha: Vec<f64>,
    pub singular_values_alpha_star: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexEstimate {
    pub operator: String,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub gap_ratio: f64,
    pub stabilized: bool,
    pub confident: bool,
    pub tolerance_sv: f64,
    pub tolerance_gap: f64,
    pub basis_source: BasisSource,
    pub table: Vec<TruncationRow>,
}

/// `(dim ker, min retained σ, max discarded σ, σ_max)` of a section.
fn kernel_count(s: &[f64], cols: usize, rel: f64) -> (usize, f64, f64, f64) {
    let smax = s.first().cloned().unwrap_or(0.0);
    let cut = rel * smax;
    let retained: Vec<f64> = s.iter().cloned().filter(|&x| x > cut).collect();
    let kept = retained.len();
    let min_ret = retained.last().cloned().unwrap_or(0.0);
    // discarded: those at or below the cut, plus structural zeros
    let max_disc = s.iter().cloned().filter(|&x| x <= cut).fold(0.0, f64::max);
    (cols - kept, min_ret, max_disc, smax)
}

/// Brute-force index over the truncation schedule.
pub fn numerical_index(problem: &ToeplitzProblem) -> Result<IndexEstimate> {
    let tol = &problem.tol;
    let min_det = boundary_min_abs_det(&problem.alpha, 512);
    if min_det < tol.inv {
        return Err(Error::NotInvertibleOnBoundary { min_abs_det: min_det });
    }
    let rule = problem.rule();
    let adj = problem.alpha.adjoint();
    let mut table = Vec::new();
    let nmax = problem.schedule.iter().cloned().max().unwrap_or(0);
    if nmax > problem.basis.len() {
        return Err(Error::KernelResolutionFailure(format!(
            "basis has only {} elements",
            problem.basis.len()
        )));
    }
    let na = problem.alpha.size;
    let cod_max = problem.codomain_len(nmax);
    let t_full = section_matrix(&problem.basis, &problem.alpha, cod_max, nmax, &rule)?;
    let ts_full = section_matrix(&problem.basis, &adj, cod_max, nmax, &rule)?;
    for &n in &problem.schedule {
        let cod = problem.codomain_len(n);
        let t = t_full.view((0, 0), (cod * na, n * na)).into_owned();
        let ts = ts_full.view((0, 0), (cod * na, n * na)).into_owned();
        let sa = linalg::singular_values(&t);
        let sb = linalg::singular_values(&ts);
        let cols = n * problem.alpha.size;
        let (ka, ra, da, ma) = kernel_count(&sa, cols, tol.sv);
        let (kb, rb, db, mb) = kernel_count(&sb, cols, tol.sv);
        let gap = |r: f64, d: f64| if d > 0.0 { r / d } else { f64::INFINITY };
        let gap_ratio = gap(ra, da).min(gap(rb, db));
        table.push(TruncationRow {
            size: n,
            codomain: cod,
            dim_ker: ka,
            dim_coker: kb,
            index: ka as i64 - kb as i64,
            gap_ratio,
            sigma_max: ma.max(mb),
            singular_values_alpha: sa,
            singular_values_alpha_star: sb,
        });
    }
    let last = table.last().unwrap();
    let tail = &table[table.len().saturating_sub(3)..];
    let stabilized = table.len() >= 3
        && tail.iter().all(|r| r.dim_ker == last.dim_ker && r.dim_coker == last.dim_coker);
    let gap_ratio = tail.iter().map(|r| r.gap_ratio).fold(f64::INFINITY, f64::min);
    let est = IndexEstimate {
        operator: problem.basis.operator.clone(),
        dim_ker: last.dim_ker,
        dim_coker: last.dim_coker,
        index: last.index,
        gap_ratio,
        stabilized,
        confident: stabilized && gap_ratio >= tol.gap,
        tolerance_sv: tol.sv,
        tolerance_gap: tol.gap,
        basis_source: problem.basis.source,
        table,
    };
    if est.stabilized {
        Ok(est)
    } else {
        Err(Error::IndexUnstable(Box::new(est)))
    }
}

/// `min |det α(e^{iθ})|` on `n` equispaced samples.
pub fn boundary_min_abs_det(alpha: &MatPoly, n: usize) -> f64 {
    (0..n)
        .map(|k| {
            let z = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            linalg::det(&alpha.eval(z)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub base: IndexEstimate,
    pub perturbed: IndexEstimate,
    pub equal: bool,
}

/// Compare indices of `D` and `D + perturbation` for the same symbol.
pub fn lower_order_invariance(
    spec: &OperatorSpec,
    perturbation: &[((u32, u32), CMat)],
    alpha: &MatPoly,
    schedule: &[usize],
    tol: &Tolerances,
) -> Result<InvarianceReport> {
    let mut pert = spec.clone();
    for (k, m) in perturbation {
        pert = pert.perturbed(*k, m.clone())?;
    }
    let base = numerical_index(&ToeplitzProblem::new(spec, alpha.clone(), schedule.to_vec(), *tol)?)?;
    let perturbed = numerical_index(&ToeplitzProblem::new(&pert, alpha.clone(), schedule.to_vec(), *tol)?)?;
    let equal = base.index == perturbed.index;
    Ok(InvarianceReport { base, perturbed, equal })
}
