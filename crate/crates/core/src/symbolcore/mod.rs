//! Operators on model domains and their principal / boundary symbols.
//!
//! Convention: `D_x = -i ∂_x`. An ambient coefficient `C_{ab}` multiplies
//! `D_x^a D_y^b`, so the full symbol is `Σ C_{ab} ξ_x^a ξ_y^b`. Specs written
//! with plain partial derivatives are converted on construction
//! (`∂^α = i^{|α|} D^α`).
//!
//! Boundary frame on the disc at angle θ: unit tangent `τ = (−sin θ, cos θ)`
//! and inward normal `ν = −(cos θ, sin θ)`; a cotangent vector is written
//! `ξ = ξ' τ + ξ_n ν`.

pub mod spec_file;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{self, c, ipow};
use crate::poly::{DiscPoly, DiscSection};
use crate::tolerances::Tolerances;
use crate::{CMat, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    UnitDisc,
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Coefficients multiply `D^α = (−i∂)^α`.
    D,
    /// Coefficients multiply `∂^α`.
    Partial,
}

/// Operators with closed-form kernels and collar expansions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `(∂_x + i∂_y)^m`; `m = 1` is the Cauchy–Riemann operator.
    DbarPower(u32),
    /// `D_x² + D_y²`.
    Laplacian,
    /// `(D_x² + D_y²)²`.
    Bilaplacian,
    /// `∂_x² − ∂_y²`, not elliptic.
    Wave,
}

impl Builtin {
    pub fn parse(name: &str) -> Option<Self> {
        let n = name.trim().to_ascii_lowercase();
        match n.as_str() {
            "cr" | "cauchy-riemann" | "cauchy_riemann" | "dbar" => Some(Self::DbarPower(1)),
            "laplacian" | "laplace" | "delta" => Some(Self::Laplacian),
            "bilaplacian" | "delta2" => Some(Self::Bilaplacian),
            "wave" => Some(Self::Wave),
            _ => {
                let m: u32 = n.strip_prefix("dbar")?.trim_start_matches('^').parse().ok()?;
                (m >= 1).then_some(Self::DbarPower(m))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::DbarPower(1) => "cr".into(),
            Self::DbarPower(m) => format!("dbar{m}"),
            Self::Laplacian => "laplacian".into(),
            Self::Bilaplacian => "bilaplacian".into(),
            Self::Wave => "wave".into(),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Self::DbarPower(m) => *m as usize,
            Self::Laplacian | Self::Wave => 2,
            Self::Bilaplacian => 4,
        }
    }

    /// Ambient coefficients in the `D` convention.
    pub fn coefficients(&self) -> BTreeMap<(u32, u32), CMat> {
        let one = |v: C64| CMat::from_element(1, 1, v);
        let mut out = BTreeMap::new();
        match self {
            Self::DbarPower(m) => {
                // ∂_x + i∂_y = i D_x − D_y; binomial expansion.
                let m = *m;
                for a in 0..=m {
                    let b = m - a;
                    let v = binom(m, a) * ipow(a as i64) * c(-1.0, 0.0).powu(b);
                    out.insert((a, b), one(v));
                }
            }
            Self::Laplacian => {
                out.insert((2, 0), one(c(1.0, 0.0)));
                out.insert((0, 2), one(c(1.0, 0.0)));
            }
            Self::Bilaplacian => {
                out.insert((4, 0), one(c(1.0, 0.0)));
                out.insert((2, 2), one(c(2.0, 0.0)));
                out.insert((0, 4), one(c(1.0, 0.0)));
            }
            Self::Wave => {
                out.insert((2, 0), one(c(-1.0, 0.0)));
                out.insert((0, 2), one(c(1.0, 0.0)));
            }
        }
        out
    }
}

pub(crate) fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// One term `e^{i·shift·θ} · matrix · D_θ^power` of a tangential operator.
/// On the interval only `shift = power = 0` is meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct CollarTerm {
    pub power: u32,
    pub shift: i64,
    pub matrix: CMat,
}

/// Collar expansion `D = Σ_j A_j D_{x_n}^{m−j}`; `a[j]` lists the terms of
/// `A_j`. On the interval `x_n` is the global coordinate `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollarForm {
    pub a: Vec<Vec<CollarTerm>>,
}

impl CollarForm {
    /// Constant matrices `A_0..A_m` (interval form).
    pub fn constant(mats: Vec<CMat>) -> Self {
        Self {
            a: mats
                .into_iter()
                .map(|m| vec![CollarTerm { power: 0, shift: 0, matrix: m }])
                .collect(),
        }
    }

    /// Sum of the constant terms of `A_j`.
    pub fn constant_part(&self, j: usize, rank_f: usize, rank_e: usize) -> CMat {
        let mut out = CMat::zeros(rank_f, rank_e);
        for t in &self.a[j] {
            if t.power == 0 && t.shift == 0 {
                out += &t.matrix;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorForm {
    /// Constant-coefficient ambient form on the disc, `D` convention.
    Ambient(BTreeMap<(u32, u32), CMat>),
    Collar(CollarForm),
}

/// An elliptic (or candidate) differential operator on a model domain.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub label: String,
    pub order: usize,
    pub rank_e: usize,
    pub rank_f: usize,
    pub domain: Domain,
    pub form: OperatorForm,
    /// Principal part is this builtin operator (lower-order terms may differ).
    pub family: Option<Builtin>,
}

impl OperatorSpec {
    pub fn builtin(b: Builtin) -> Self {
        Self {
            label: b.name(),
            order: b.order(),
            rank_e: 1,
            rank_f: 1,
            domain: Domain::UnitDisc,
            form: OperatorForm::Ambient(b.coefficients()),
            family: Some(b),
        }
    }

    /// Ambient operator from coefficients in the given convention.
    pub fn ambient(
        label: impl Into<String>,
        order: usize,
        rank_e: usize,
        rank_f: usize,
        convention: Convention,
        coefficients: BTreeMap<(u32, u32), CMat>,
    ) -> Result<Self> {
        let coefficients = match convention {
            Convention::D => coefficients,
            Convention::Partial => coefficients
                .into_iter()
                .map(|((a, b), m)| ((a, b), m * ipow((a + b) as i64)))
                .collect(),
        };
        let spec = Self {
            label: label.into(),
            order,
            rank_e,
            rank_f,
            domain: Domain::UnitDisc,
            form: OperatorForm::Ambient(coefficients),
            family: None,
        };
        let spec = spec.with_detected_family();
        spec.validate()?;
        Ok(spec)
    }

    pub fn collar(
        label: impl Into<String>,
        domain: Domain,
        rank_e: usize,
        rank_f: usize,
        collar: CollarForm,
    ) -> Result<Self> {
        let order = collar.a.len().saturating_sub(1);
        let spec = Self {
            label: label.into(),
            order,
            rank_e,
            rank_f,
            domain,
            form: OperatorForm::Collar(collar),
            family: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Add a lower-order ambient term (`D` convention).
    pub fn perturbed(&self, index: (u32, u32), m: CMat) -> Result<Self> {
        let OperatorForm::Ambient(coeffs) = &self.form else {
            return Err(Error::invalid("perturbations apply to ambient operators only"));
        };
        if (index.0 + index.1) as usize >= self.order {
            return Err(Error::invalid("perturbation must be of lower order"));
        }
        let mut coeffs = coeffs.clone();
        let e = coeffs
            .entry(index)
            .or_insert_with(|| CMat::zeros(self.rank_f, self.rank_e));
        *e += m;
        let mut out = self.clone();
        out.form = OperatorForm::Ambient(coeffs);
        out.label = format!("{}+lot", self.label);
        out.validate()?;
        Ok(out)
    }

    fn with_detected_family(mut self) -> Self {
        if self.rank_e != 1 || self.rank_f != 1 {
            return self;
        }
        let OperatorForm::Ambient(coeffs) = &self.form else {
            return self;
        };
        let principal: BTreeMap<_, _> = coeffs
            .iter()
            .filter(|((a, b), m)| (a + b) as usize == self.order && m.norm() > 0.0)
            .map(|(k, m)| (*k, m.clone()))
            .collect();
        let candidates = [
            Builtin::DbarPower(self.order as u32),
            Builtin::Laplacian,
            Builtin::Bilaplacian,
            Builtin::Wave,
        ];
        for b in candidates {
            if b.order() != self.order {
                continue;
            }
            let reference = b.coefficients();
            let same = reference.len() == principal.len()
                && reference.iter().all(|(k, m)| {
                    principal.get(k).is_some_and(|p| (p - m).norm() < 1e-14)
                });
            if same {
                self.family = Some(b);
                break;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::invalid("order must be at least 1"));
        }
        if self.rank_e < 1 || self.rank_f < 1 {
            return Err(Error::invalid("fiber ranks must be positive"));
        }
        match &self.form {
            OperatorForm::Ambient(coeffs) => {
                if self.domain != Domain::UnitDisc {
                    return Err(Error::invalid("ambient coefficients require the unit disc"));
                }
                for (&(a, b), m) in coeffs {
                    if m.shape() != (self.rank_f, self.rank_e) {
                        return Err(Error::invalid(format!(
                            "coefficient [{a},{b}] has shape {:?}, expected {:?}",
                            m.shape(),
                            (self.rank_f, self.rank_e)
                        )));
                    }
                    if (a + b) as usize > self.order {
                        return Err(Error::invalid(format!(
                            "coefficient [{a},{b}] exceeds the order {}",
                            self.order
                        )));
                    }
                }
            }
            OperatorForm::Collar(col) => {
                if col.a.len() != self.order + 1 {
                    return Err(Error::invalid("collar form needs A_0..A_m"));
                }
                for (j, terms) in col.a.iter().enumerate() {
                    for t in terms {
                        if t.matrix.shape() != (self.rank_f, self.rank_e) {
                            return Err(Error::invalid(format!("collar A_{j} has wrong shape")));
                        }
                        if t.power as usize > j {
                            return Err(Error::invalid(format!(
                                "collar A_{j} has tangential order {} > {j}",
                                t.power
                            )));
                        }
                        if self.domain == Domain::Interval && (t.power != 0 || t.shift != 0) {
                            return Err(Error::invalid(
                                "interval collar terms must be constant matrices",
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Option<&BTreeMap<(u32, u32), CMat>> {
        match &self.form {
            OperatorForm::Ambient(c) => Some(c),
            OperatorForm::Collar(_) => None,
        }
    }

    /// True when the operator is exactly its builtin family (no extra terms).
    pub fn is_pure_builtin(&self) -> bool {
        match (self.family, self.coefficients()) {
            (Some(b), Some(coeffs)) => {
                let reference = b.coefficients();
                coeffs.iter().all(|(k, m)| match reference.get(k) {
                    Some(r) => (r - m).norm() < 1e-14,
                    None => m.norm() == 0.0,
                })
            }
            _ => false,
        }
    }

    /// Formal adjoint `D†` (constant coefficients: conjugate transpose).
    pub fn formal_adjoint(&self) -> Result<Self> {
        let coeffs = self
            .coefficients()
            .ok_or_else(|| Error::invalid("formal adjoint needs ambient coefficients"))?;
        let adj = coeffs.iter().map(|(k, m)| (*k, m.adjoint())).collect();
        let mut out = self.clone();
        out.form = OperatorForm::Ambient(adj);
        std::mem::swap(&mut out.rank_e, &mut out.rank_f);
        out.label = format!("{}^dagger", self.label);
        out.family = None;
        Ok(out.with_detected_family())
    }

    /// Full symbol `Σ C_α ξ^α` at a real covector (ambient form only).
    pub fn full_symbol(&self, xi: (f64, f64), principal_only: bool) -> Result<CMat> {
        let coeffs = self
            .coefficients()
            .ok_or_else(|| Error::invalid("full symbol needs ambient coefficients"))?;
        let mut out = CMat::zeros(self.rank_f, self.rank_e);
        for (&(a, b), m) in coeffs {
            if principal_only && (a + b) as usize != self.order {
                continue;
            }
            out += m * c(xi.0.powi(a as i32) * xi.1.powi(b as i32), 0.0);
        }
        Ok(out)
    }

    /// Rewrite in Wirtinger form `Σ M_{pq} ∂^p ∂̄^q`.
    pub fn z_operator(&self) -> Result<ZOperator> {
        let coeffs = self
            .coefficients()
            .ok_or_else(|| Error::invalid("Wirtinger form needs ambient coefficients"))?;
        let mut terms: BTreeMap<(u32, u32), CMat> = BTreeMap::new();
        for (&(a, b), m) in coeffs {
            // D_x = −i(∂ + ∂̄), D_y = ∂ − ∂̄
            for s in 0..=a {
                for t in 0..=b {
                    let coef = ipow(-(a as i64))
                        * binom(a, s)
                        * binom(b, t)
                        * c(-1.0, 0.0).powu(b - t);
                    let key = (s + t, (a - s) + (b - t));
                    let e = terms
                        .entry(key)
                        .or_insert_with(|| CMat::zeros(self.rank_f, self.rank_e));
                    *e += m * coef;
                }
            }
        }
        terms.retain(|_, m| m.norm() > 0.0);
        Ok(ZOperator { rank_e: self.rank_e, rank_f: self.rank_f, terms })
    }
}

/// Constant-coefficient operator in Wirtinger derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ZOperator {
    pub rank_e: usize,
    pub rank_f: usize,
    pub terms: BTreeMap<(u32, u32), CMat>,
}

impl ZOperator {
    pub fn apply(&self, f: &DiscSection) -> DiscSection {
        let mut out = vec![DiscPoly::zero(); self.rank_f];
        for (&(p, q), m) in &self.terms {
            let derivs: Vec<DiscPoly> = f.iter().map(|g| g.dz_dzbar(p, q)).collect();
            for (i, o) in out.iter_mut().enumerate() {
                for (j, d) in derivs.iter().enumerate() {
                    let s = m[(i, j)];
                    if s != c(0.0, 0.0) {
                        *o = &*o + &d.scale(s);
                    }
                }
            }
        }
        out
    }

    pub fn max_order(&self) -> u32 {
        self.terms.keys().map(|(p, q)| p + q).max().unwrap_or(0)
    }
}

/// Where a cosphere node sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPoint {
    Angle(f64),
    /// Endpoint 0 or 1 of the interval.
    Endpoint(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Node {
    pub index: usize,
    pub point: BoundaryPoint,
    /// Tangential covector, `±1` on the cosphere.
    pub xi: f64,
}

impl Node {
    pub fn disc(theta: f64, xi: f64) -> Self {
        Self { index: 0, point: BoundaryPoint::Angle(theta), xi }
    }

    pub fn describe(&self) -> String {
        match self.point {
            BoundaryPoint::Angle(t) => format!("theta={t:.6}, xi'={:+}", self.xi),
            BoundaryPoint::Endpoint(e) => format!("x={e}, xi'={:+}", self.xi),
        }
    }

    /// Fiber component: 0 for `ξ' > 0`, 1 otherwise.
    pub fn component(&self) -> usize {
        usize::from(self.xi <= 0.0)
    }
}

/// Sampled `S*∂Ω`: every boundary point carries `ξ' = +1` and `ξ' = −1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CosphereGrid {
    pub nodes: Vec<Node>,
}

impl CosphereGrid {
    pub const DEFAULT_POINTS: usize = 64;

    pub fn disc(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(2 * n);
        for i in 0..n {
            let th = 2.0 * PI * i as f64 / n as f64;
            for xi in [1.0, -1.0] {
                nodes.push(Node { index: nodes.len(), point: BoundaryPoint::Angle(th), xi });
            }
        }
        Self { nodes }
    }

    /// Interval endpoints. The boundary is zero-dimensional, so the two
    /// fiber components carry the same boundary polynomial.
    pub fn interval() -> Self {
        let mut nodes = Vec::new();
        for e in [0u8, 1] {
            for xi in [1.0, -1.0] {
                nodes.push(Node { index: nodes.len(), point: BoundaryPoint::Endpoint(e), xi });
            }
        }
        Self { nodes }
    }

    pub fn for_spec(spec: &OperatorSpec, n: usize) -> Self {
        match spec.domain {
            Domain::UnitDisc => Self::disc(n),
            Domain::Interval => Self::interval(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `a(ξ_n) = Σ_l a_l ξ_n^{m−l}` at a cosphere node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    pub coeffs: Vec<CMat>,
    pub node: Option<Node>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMat>) -> Self {
        Self { coeffs, node: None }
    }

    /// Scalar polynomial from coefficients `a_0..a_m` (descending powers).
    pub fn scalar(coeffs: &[C64]) -> Self {
        Self::new(coeffs.iter().map(|&v| CMat::from_element(1, 1, v)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn rank(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn eval(&self, x: C64) -> CMat {
        let mut acc = CMat::zeros(self.coeffs[0].nrows(), self.coeffs[0].ncols());
        for a in &self.coeffs {
            acc = acc * x + a;
        }
        acc
    }

    /// `a'(x)`.
    pub fn eval_derivative(&self, x: C64) -> CMat {
        let m = self.degree();
        let mut acc = CMat::zeros(self.coeffs[0].nrows(), self.coeffs[0].ncols());
        for (l, a) in self.coeffs.iter().enumerate().take(m) {
            let p = (m - l) as i32;
            acc += a * (x.powi(p - 1) * p as f64);
        }
        acc
    }

    /// Coefficients of `det a(ξ)` in ascending powers, by interpolation
    /// at scaled roots of unity.
    pub fn det_coefficients(&self) -> Vec<C64> {
        let n = self.degree() * self.rank();
        let pts = n + 1;
        let scale = 1.0;
        let samples: Vec<C64> = (0..pts)
            .map(|k| {
                let w = C64::from_polar(scale, 2.0 * PI * k as f64 / pts as f64);
                linalg::det(&self.eval(w))
            })
            .collect();
        (0..pts)
            .map(|p| {
                let s: C64 = samples
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * C64::from_polar(1.0, -2.0 * PI * (p * k) as f64 / pts as f64))
                    .sum();
                s / (pts as f64 * scale.powi(p as i32))
            })
            .collect()
    }

    /// Roots of `det a(ξ)`, computed from the companion linearization.
    pub fn roots(&self) -> Result<Vec<C64>> {
        let a = companion_matrix(self)?;
        Ok(linalg::eigenvalues(&a).into_iter().map(|mu| -linalg::I * mu).collect())
    }
}

/// Principal-part boundary polynomial at a node.
pub fn principal_symbol(spec: &OperatorSpec, node: &Node) -> Result<MatrixPolynomial> {
    let poly = boundary_polynomial(spec, node)?;
    let a0 = &poly.coeffs[0];
    if a0.nrows() != a0.ncols() || linalg::inverse(a0).is_none() || singular_leading_in(&poly) {
        return Err(Error::EllipticityViolation {
            node: node.describe(),
            detail: "leading coefficient a_0 = σ(dx_n) is singular".into(),
        });
    }
    Ok(poly)
}

/// `a_0` is numerically singular relative to the size of the whole
/// polynomial.
fn singular_leading_in(poly: &MatrixPolynomial) -> bool {
    let scale = poly.coeffs.iter().map(linalg::op_norm).fold(0.0, f64::max);
    let s = linalg::singular_values(&poly.coeffs[0]);
    scale == 0.0 || s.last().cloned().unwrap_or(0.0) <= 1e-12 * scale
}

/// Boundary polynomial without the invertibility check.
fn boundary_polynomial(spec: &OperatorSpec, node: &Node) -> Result<MatrixPolynomial> {
    let m = spec.order;
    let (rf, re) = (spec.rank_f, spec.rank_e);
    let mut coeffs = vec![CMat::zeros(rf, re); m + 1];
    match (&spec.form, node.point) {
        (OperatorForm::Ambient(map), BoundaryPoint::Angle(th)) => {
            let (s, co) = th.sin_cos();
            // ξ_x = −ξ' sin θ − ξ_n cos θ,  ξ_y = ξ' cos θ − ξ_n sin θ
            let lx = [c(-node.xi * s, 0.0), c(-co, 0.0)];
            let ly = [c(node.xi * co, 0.0), c(-s, 0.0)];
            for (&(a, b), mat) in map {
                if (a + b) as usize != m {
                    continue;
                }
                let mut p = vec![c(1.0, 0.0)];
                for _ in 0..a {
                    p = mul_linear(&p, lx);
                }
                for _ in 0..b {
                    p = mul_linear(&p, ly);
                }
                // p ascending in ξ_n; a_l multiplies ξ_n^{m−l}
                for (k, v) in p.iter().enumerate() {
                    coeffs[m - k] += mat * *v;
                }
            }
        }
        (OperatorForm::Collar(col), BoundaryPoint::Angle(th)) => {
            for (j, terms) in col.a.iter().enumerate() {
                for t in terms {
                    if t.power as usize == j {
                        let f = C64::from_polar(1.0, t.shift as f64 * th) * node.xi.powi(j as i32);
                        coeffs[j] += &t.matrix * f;
                    }
                }
            }
        }
        (OperatorForm::Collar(col), BoundaryPoint::Endpoint(e)) => {
            // Full frozen polynomial; at x = 1 the inward coordinate is 1 − x.
            for (j, coeff) in coeffs.iter_mut().enumerate() {
                let sign = if e == 1 && (m - j) % 2 == 1 { -1.0 } else { 1.0 };
                *coeff = col.constant_part(j, rf, re) * c(sign, 0.0);
            }
        }
        (OperatorForm::Ambient(_), BoundaryPoint::Endpoint(_)) => {
            return Err(Error::invalid("ambient operators live on the disc"));
        }
    }
    Ok(MatrixPolynomial { coeffs, node: Some(*node) })
}

fn mul_linear(p: &[C64], l: [C64; 2]) -> Vec<C64> {
    let mut out = vec![c(0.0, 0.0); p.len() + 1];
    for (k, &v) in p.iter().enumerate() {
        out[k] += v * l[0];
        out[k + 1] += v * l[1];
    }
    out
}

/// Linearization of `a(D_t) v = 0` in the frame `V = (v, ∂_t v, …)`.
///
/// Last block row: `∂_t^m v = Σ_k C_k ∂_t^k v` with
/// `C_k = −(−i)^{k−m} a_0^{-1} a_{m−k}`.
pub fn companion_matrix(poly: &MatrixPolynomial) -> Result<CMat> {
    let m = poly.degree();
    let r = poly.rank();
    let a0inv = linalg::inverse(&poly.coeffs[0])
        .filter(|_| !singular_leading_in(poly))
        .ok_or_else(|| Error::EllipticityViolation {
            node: poly.node.map(|n| n.describe()).unwrap_or_else(|| "-".into()),
            detail: "singular leading coefficient".into(),
        })?;
    let n = m * r;
    let mut a = CMat::zeros(n, n);
    for k in 0..m.saturating_sub(1) {
        for i in 0..r {
            a[(k * r + i, (k + 1) * r + i)] = c(1.0, 0.0);
        }
    }
    for k in 0..m {
        let f = -minus_i_pow(k as i64 - m as i64);
        let blk = &a0inv * &poly.coeffs[m - k] * f;
        a.view_mut(((m - 1) * r, k * r), (r, r)).copy_from(&blk);
    }
    Ok(a)
}

/// `(−i)^k`.
pub fn minus_i_pow(k: i64) -> C64 {
    ipow(-k)
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeEllipticity {
    pub node: Node,
    /// Smallest `|Im|` over the roots of `det a(ξ_n)`.
    pub min_distance: f64,
    #[serde(serialize_with = "crate::cli::json::ser_cvec")]
    pub roots: Vec<C64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub operator: String,
    pub pass: bool,
    pub tolerance: f64,
    pub min_distance: f64,
    pub worst_node: Node,
    #[serde(serialize_with = "crate::cli::json::ser_cvec")]
    pub worst_roots: Vec<C64>,
    /// `min |det σ(ξ)|` over sampled unit interior covectors (disc only).
    pub interior_min_abs_det: Option<f64>,
    pub nodes: Vec<NodeEllipticity>,
}

/// Check that `det a(ξ_n)` has no real roots at any grid node and that the
/// principal symbol is invertible on sampled interior covectors.
pub fn check_elliptic(
    spec: &OperatorSpec,
    grid: &CosphereGrid,
    tol: &Tolerances,
) -> Result<EllipticityReport> {
    if spec.rank_e != spec.rank_f {
        return Err(Error::EllipticityViolation {
            node: "-".into(),
            detail: format!("fiber ranks differ ({} vs {})", spec.rank_e, spec.rank_f),
        });
    }
    let per: Vec<Result<NodeEllipticity>> = grid
        .nodes
        .par_iter()
        .map(|node| {
            let poly = boundary_polynomial(spec, node)?;
            if singular_leading_in(&poly) {
                return Err(Error::EllipticityViolation {
                    node: node.describe(),
                    detail: "leading coefficient a_0 = σ(dx_n) is singular".into(),
                });
            }
            let roots = poly.roots()?;
            let min_distance = roots.iter().map(|r| r.im.abs()).fold(f64::INFINITY, f64::min);
            Ok(NodeEllipticity { node: *node, min_distance, roots })
        })
        .collect();
    let mut nodes = Vec::with_capacity(per.len());
    let mut degenerate = None;
    for r in per {
        match r {
            Ok(n) => nodes.push(n),
            Err(e) => {
                if degenerate.is_none() {
                    degenerate = Some(e);
                }
            }
        }
    }
    let worst = nodes
        .iter()
        .min_by(|a, b| a.min_distance.partial_cmp(&b.min_distance).unwrap())
        .cloned();
    if let Some(Error::EllipticityViolation { node, detail }) = degenerate {
        let extra = worst
            .filter(|w| w.min_distance <= tol.ell)
            .map(|w| {
                let real: Vec<String> = w
                    .roots
                    .iter()
                    .filter(|r| r.im.abs() <= tol.ell)
                    .map(|r| format!("{:.6}", r.re))
                    .collect();
                format!("; real roots {} at {}", real.join(", "), w.node.describe())
            })
            .unwrap_or_default();
        return Err(Error::EllipticityViolation { node, detail: format!("{detail}{extra}") });
    }
    let worst = worst.ok_or_else(|| Error::invalid("empty cosphere grid"))?;
    let interior_min_abs_det = match spec.form {
        OperatorForm::Ambient(_) => {
            let mut mn = f64::INFINITY;
            for k in 0..256 {
                let phi = 2.0 * PI * k as f64 / 256.0;
                let s = spec.full_symbol((phi.cos(), phi.sin()), true)?;
                mn = mn.min(linalg::det(&s).norm());
            }
            Some(mn)
        }
        OperatorForm::Collar(_) => None,
    };
    let pass = worst.min_distance > tol.ell && interior_min_abs_det.map_or(true, |d| d > tol.ell);
    Ok(EllipticityReport {
        operator: spec.label.clone(),
        pass,
        tolerance: tol.ell,
        min_distance: worst.min_distance,
        worst_node: worst.node,
        worst_roots: worst.roots.clone(),
        interior_min_abs_det,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    fn sorted_roots(p: &MatrixPolynomial) -> Vec<C64> {
        let mut r = p.roots().unwrap();
        r.sort_by(|a, b| (a.im, a.re).partial_cmp(&(b.im, b.re)).unwrap());
        r
    }

    #[test]
    fn laplacian_symbol_is_rotation_invariant() {
        let spec = OperatorSpec::builtin(Builtin::Laplacian);
        for k in 0..8 {
            let th = 0.7 * k as f64;
            for xi in [1.0, -1.0] {
                let p = principal_symbol(&spec, &Node::disc(th, xi)).unwrap();
                assert!((p.coeffs[0][(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
                assert!(p.coeffs[1][(0, 0)].norm() < 1e-14);
                assert!((p.coeffs[2][(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cauchy_riemann_root_location() {
        let spec = OperatorSpec::builtin(Builtin::DbarPower(1));
        let p = principal_symbol(&spec, &Node::disc(0.0, 1.0)).unwrap();
        assert_eq!(p.degree(), 1);
        let r = p.roots().unwrap();
        assert!((r[0] - c(0.0, 1.0)).norm() < 1e-12);
        let q = principal_symbol(&spec, &Node::disc(0.0, -1.0)).unwrap();
        assert!((q.roots().unwrap()[0] - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn symbol_periodic_in_theta() {
        let spec = OperatorSpec::builtin(Builtin::DbarPower(2));
        let a = principal_symbol(&spec, &Node::disc(0.3, 1.0)).unwrap();
        let b = principal_symbol(&spec, &Node::disc(0.3 + 2.0 * PI, 1.0)).unwrap();
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn lower_order_terms_do_not_change_principal_symbol() {
        let spec = OperatorSpec::builtin(Builtin::Laplacian);
        let pert = spec.perturbed((0, 0), CMat::from_element(1, 1, c(1.0, 0.0))).unwrap();
        let n = Node::disc(1.1, -1.0);
        assert_eq!(principal_symbol(&spec, &n).unwrap().coeffs, principal_symbol(&pert, &n).unwrap().coeffs);
        assert_eq!(pert.family, Some(Builtin::Laplacian));
        assert!(!pert.is_pure_builtin());
    }

    #[test]
    fn companion_examples() {
        let p = MatrixPolynomial::scalar(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let a = companion_matrix(&p).unwrap();
        let expect = from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        assert!((a - expect).norm() < 1e-15);
        let q = MatrixPolynomial::scalar(&[c(1.0, 0.0), c(0.0, -1.0)]);
        let a = companion_matrix(&q).unwrap();
        assert!((a[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn companion_eigenvalues_match_det_roots() {
        // 2x2 block-diagonal polynomial: diag(ξ²+1, ξ − 2i) padded to degree 2.
        let p = MatrixPolynomial::new(vec![
            linalg::diag(&[c(1.0, 0.0), c(1.0, 0.0)]),
            linalg::diag(&[c(0.0, 0.0), c(0.5, 0.0)]),
            linalg::diag(&[c(1.0, 0.0), c(4.0, 0.0)]),
        ]);
        let a = companion_matrix(&p).unwrap();
        // block-diagonal structure: the two components never couple
        for (i, j) in [(0, 1), (1, 0), (0, 3), (1, 2)] {
            assert!(a[(i, j)].norm() == 0.0 || i % 2 == j % 2);
        }
        let mut eig: Vec<C64> = linalg::eigenvalues(&a).into_iter().map(|mu| -linalg::I * mu).collect();
        let mut roots = linalg::poly_roots(&p.det_coefficients());
        let key = |z: &C64| (z.im, z.re);
        eig.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        roots.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        assert_eq!(eig.len(), roots.len());
        for (x, y) in eig.iter().zip(&roots) {
            assert!((x - y).norm() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn ellipticity_of_builtins() {
        let tol = Tolerances::default();
        let grid = CosphereGrid::disc(64);
        let r = check_elliptic(&OperatorSpec::builtin(Builtin::Laplacian), &grid, &tol).unwrap();
        assert!(r.pass);
        assert!((r.min_distance - 1.0).abs() < 1e-12);
        let r = check_elliptic(&OperatorSpec::builtin(Builtin::DbarPower(1)), &grid, &tol).unwrap();
        assert!(r.pass);
        let err = check_elliptic(&OperatorSpec::builtin(Builtin::Wave), &grid, &tol).unwrap_err();
        assert!(matches!(err, Error::EllipticityViolation { .. }));
        // A grid avoiding the null directions still sees the real roots.
        let r = check_elliptic(&OperatorSpec::builtin(Builtin::Wave), &CosphereGrid::disc(6), &tol).unwrap();
        assert!(!r.pass);
        assert!(r.worst_roots.iter().any(|z| (z.re.abs() - 1.0).abs() < 1e-9 && z.im.abs() < 1e-9));
    }

    #[test]
    fn partial_convention_converts() {
        let mut m = BTreeMap::new();
        m.insert((1, 0), CMat::from_element(1, 1, c(1.0, 0.0)));
        m.insert((0, 1), CMat::from_element(1, 1, c(0.0, 1.0)));
        let spec = OperatorSpec::ambient("cr", 1, 1, 1, Convention::Partial, m).unwrap();
        assert_eq!(spec.family, Some(Builtin::DbarPower(1)));
        assert!(spec.is_pure_builtin());
    }

    #[test]
    fn wirtinger_form_of_cauchy_riemann() {
        let z = OperatorSpec::builtin(Builtin::DbarPower(1)).z_operator().unwrap();
        assert_eq!(z.terms.len(), 1);
        assert!((z.terms[&(0, 1)][(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
        let l = OperatorSpec::builtin(Builtin::Laplacian).z_operator().unwrap();
        assert!((l.terms[&(1, 1)][(0, 0)] - c(-4.0, 0.0)).norm() < 1e-15);
        assert_eq!(l.terms.len(), 1);
    }

    #[test]
    fn interval_collar_symbol() {
        // D = D_x + i: root −i at x=0; at x=1 the polynomial is −ξ + i.
        let col = CollarForm::constant(vec![
            CMat::from_element(1, 1, c(1.0, 0.0)),
            CMat::from_element(1, 1, c(0.0, 1.0)),
        ]);
        let spec = OperatorSpec::collar("dx+i", Domain::Interval, 1, 1, col).unwrap();
        let grid = CosphereGrid::interval();
        let p0 = principal_symbol(&spec, &grid.nodes[0]).unwrap();
        assert!((sorted_roots(&p0)[0] - c(0.0, -1.0)).norm() < 1e-12);
        let p1 = principal_symbol(&spec, &grid.nodes[2]).unwrap();
        assert!((sorted_roots(&p1)[0] - c(0.0, 1.0)).norm() < 1e-12);
        assert!(check_elliptic(&spec, &grid, &Tolerances::default()).unwrap().pass);
    }
}
