//! Boundary operator algebra and the Green's-formula boundary matrix.
//!
//! A tangential operator is a finite sum of terms `e^{isθ} C D_θ^k`, acting on
//! Fourier series; on interval endpoints only `s = k = 0` occurs. The matrix
//! is stored against traces in the `D_{x_n}` frame, `ρ_k = D_{x_n}^k f|_∂`,
//! with the overall factor `−i` kept apart: the boundary term of Green's
//! formula is `⟨−i E ρf, ρg⟩`, `E[q][s]` pairing `ρ_s f` with `ρ_q g`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::linalg::{self, c, I};
use crate::symbolcore::{binom, Builtin, CollarTerm, Domain, OperatorForm, OperatorSpec};
use crate::{CMat, CVec, Error, Result, C64};

/// `Σ e^{i·shift·θ} · matrix · D_θ^power`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialOp {
    pub rows: usize,
    pub cols: usize,
    pub terms: Vec<CollarTerm>,
}

impl TangentialOp {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self { rows, cols, terms: Vec::new() }
    }

    pub fn term(shift: i64, matrix: CMat, power: u32) -> Self {
        let (rows, cols) = matrix.shape();
        Self { rows, cols, terms: vec![CollarTerm { power, shift, matrix }] }.normalized()
    }

    pub fn scalar(shift: i64, v: C64, power: u32) -> Self {
        Self::term(shift, CMat::from_element(1, 1, v), power)
    }

    pub fn identity(r: usize) -> Self {
        Self::term(0, CMat::identity(r, r), 0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merge equal `(shift, power)` terms and drop zeros.
    fn normalized(self) -> Self {
        let mut acc: BTreeMap<(i64, u32), CMat> = BTreeMap::new();
        for t in self.terms {
            *acc.entry((t.shift, t.power)).or_insert_with(|| CMat::zeros(self.rows, self.cols)) += t.matrix;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, m)| m.norm() > 0.0)
            .map(|((shift, power), matrix)| CollarTerm { power, shift, matrix })
            .collect();
        Self { rows: self.rows, cols: self.cols, terms }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { rows: self.rows, cols: self.cols, terms }.normalized()
    }

    pub fn scale(&self, s: C64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| CollarTerm { power: t.power, shift: t.shift, matrix: &t.matrix * s })
            .collect();
        Self { rows: self.rows, cols: self.cols, terms }.normalized()
    }

    /// `self ∘ other`, using `D_θ e^{itθ} = e^{itθ}(D_θ + t)`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                let cd = &a.matrix * &b.matrix;
                let t = b.shift as f64;
                // (T + t)^k T^l = Σ_i C(k,i) t^{k−i} T^{i+l}
                for i in 0..=a.power {
                    let coef = binom(a.power, i) * t.powi((a.power - i) as i32);
                    if coef == 0.0 {
                        continue;
                    }
                    terms.push(CollarTerm {
                        power: i + b.power,
                        shift: a.shift + b.shift,
                        matrix: &cd * c(coef, 0.0),
                    });
                }
            }
        }
        Self { rows: self.rows, cols: other.cols, terms }.normalized()
    }

    /// Inverse of a single multiplication term `e^{isθ} C`.
    pub fn invert_multiplier(&self) -> Option<Self> {
        if self.terms.len() != 1 || self.terms[0].power != 0 {
            return None;
        }
        let t = &self.terms[0];
        let inv = linalg::inverse(&t.matrix)?;
        let s = linalg::singular_values(&t.matrix);
        if s.last().cloned().unwrap_or(0.0) <= 1e-12 * s[0] {
            return None;
        }
        Some(Self::term(-t.shift, inv, 0))
    }

    /// Apply to a Fourier series (mode → vector of length `cols`).
    pub fn apply(&self, u: &BTreeMap<i64, CVec>) -> BTreeMap<i64, CVec> {
        let mut out: BTreeMap<i64, CVec> = BTreeMap::new();
        for t in &self.terms {
            for (&n, v) in u {
                let f = (n as f64).powi(t.power as i32);
                if f == 0.0 && t.power > 0 {
                    continue;
                }
                let w = &t.matrix * v * c(f, 0.0);
                let e = out.entry(n + t.shift).or_insert_with(|| CVec::zeros(self.rows));
                *e += w;
            }
        }
        out.retain(|_, v| v.norm() > 0.0);
        out
    }

    /// Highest `D_θ` power present.
    pub fn order(&self) -> Option<u32> {
        self.terms.iter().map(|t| t.power).max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryComponent {
    Circle,
    Endpoint(u8),
}

/// Anti-triangular `m × m` matrix of tangential operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SeeleyMatrix {
    pub boundary: BoundaryComponent,
    /// Overall scalar factor (`−i` for a built matrix, `i` for its inverse).
    pub prefactor: C64,
    pub entries: Vec<Vec<TangentialOp>>,
    pub rank: usize,
}

impl SeeleyMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    /// Entry `(q, s)` is structurally zero when `q + s > m − 1`.
    pub fn is_anti_triangular(&self) -> bool {
        let m = self.size();
        (0..m).all(|q| (0..m).all(|s| q + s < m || self.entries[q][s].is_zero()))
    }

    /// Skew-diagonal entries `(q, m−1−q)`.
    pub fn skew_diagonal(&self) -> Vec<&TangentialOp> {
        let m = self.size();
        (0..m).map(|q| &self.entries[q][m - 1 - q]).collect()
    }

    /// `prefactor · Σ_s E[q][s] u_s` for each row `q`.
    pub fn apply(&self, u: &[BTreeMap<i64, CVec>]) -> Vec<BTreeMap<i64, CVec>> {
        let m = self.size();
        (0..m)
            .map(|q| {
                let mut row: BTreeMap<i64, CVec> = BTreeMap::new();
                for (s, us) in u.iter().enumerate().take(m) {
                    for (n, v) in self.entries[q][s].apply(us) {
                        let e = row.entry(n).or_insert_with(|| CVec::zeros(v.len()));
                        *e += v * self.prefactor;
                    }
                }
                row.retain(|_, v| v.norm() > 0.0);
                row
            })
            .collect()
    }

    /// Entrywise product `self · other` (including prefactors).
    pub fn compose(&self, other: &Self) -> Self {
        let m = self.size();
        let entries = (0..m)
            .map(|q| {
                (0..m)
                    .map(|s| {
                        let mut acc = TangentialOp::zero(self.rank, self.rank);
                        for p in 0..m {
                            acc = acc.add(&self.entries[q][p].compose(&other.entries[p][s]));
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Self {
            boundary: self.boundary,
            prefactor: self.prefactor * other.prefactor,
            entries,
            rank: self.rank,
        }
    }
}

fn one(v: C64) -> TangentialOp {
    TangentialOp::scalar(0, v, 0)
}

fn zero1() -> TangentialOp {
    TangentialOp::zero(1, 1)
}

fn builtin_entries(b: Builtin) -> Option<Vec<Vec<TangentialOp>>> {
    let t = |shift: i64, v: C64, power: u32| TangentialOp::scalar(shift, v, power);
    let e = match b {
        Builtin::DbarPower(1) => vec![vec![t(1, -I, 0)]],
        Builtin::DbarPower(2) => vec![
            vec![t(2, 2.0 * I, 1).add(&t(2, 2.0 * I, 0)), t(2, c(-1.0, 0.0), 0)],
            vec![t(2, c(-1.0, 0.0), 0), zero1()],
        ],
        Builtin::Laplacian => vec![vec![zero1(), one(c(1.0, 0.0))], vec![one(c(1.0, 0.0)), zero1()]],
        Builtin::Bilaplacian => {
            let a = one(c(1.0, 0.0)).add(&t(0, c(2.0, 0.0), 2));
            vec![
                vec![zero1(), a.clone(), one(I), one(c(1.0, 0.0))],
                vec![a, zero1(), one(c(1.0, 0.0)), zero1()],
                vec![one(-I), one(c(1.0, 0.0)), zero1(), zero1()],
                vec![one(c(1.0, 0.0)), zero1(), zero1(), zero1()],
            ]
        }
        _ => return None,
    };
    Some(e)
}

/// Boundary matrix of Green's formula.
///
/// Interval operators in collar form give one matrix per endpoint; disc
/// operators must be a builtin family (plus zeroth-order terms).
pub fn build_seeley_matrix(spec: &OperatorSpec) -> Result<Vec<SeeleyMatrix>> {
    let m = spec.order;
    let r = spec.rank_e;
    match (&spec.form, spec.domain) {
        (OperatorForm::Collar(col), Domain::Interval) => {
            if spec.rank_e != spec.rank_f {
                return Err(Error::CollarUnavailable("rank_e must equal rank_f".into()));
            }
            let mut out = Vec::new();
            for e in [0u8, 1] {
                let mut entries = vec![vec![TangentialOp::zero(r, r); m]; m];
                for (q, row) in entries.iter_mut().enumerate() {
                    for (s, entry) in row.iter_mut().enumerate() {
                        if q + s > m - 1 {
                            continue;
                        }
                        let j = m - 1 - q - s;
                        let sign = if e == 1 && (m - j) % 2 == 1 { -1.0 } else { 1.0 };
                        let a = col.constant_part(j, r, r) * c(sign, 0.0);
                        *entry = TangentialOp::term(0, a, 0);
                    }
                }
                out.push(SeeleyMatrix {
                    boundary: BoundaryComponent::Endpoint(e),
                    prefactor: -I,
                    entries,
                    rank: r,
                });
            }
            Ok(out)
        }
        (OperatorForm::Ambient(coeffs), Domain::UnitDisc) => {
            let b = spec.family.ok_or_else(|| {
                Error::CollarUnavailable(format!("no polar collar expansion for `{}`", spec.label))
            })?;
            let reference = b.coefficients();
            let only_zeroth_order_extra = coeffs.iter().all(|(k, mat)| match reference.get(k) {
                Some(rm) => (rm - mat).norm() < 1e-14,
                None => *k == (0, 0) || mat.norm() == 0.0,
            });
            if !only_zeroth_order_extra {
                return Err(Error::CollarUnavailable(format!(
                    "`{}` has lower-order terms of positive order",
                    spec.label
                )));
            }
            let entries = builtin_entries(b).ok_or_else(|| {
                Error::CollarUnavailable(format!("no polar collar expansion for `{}`", b.name()))
            })?;
            Ok(vec![SeeleyMatrix { boundary: BoundaryComponent::Circle, prefactor: -I, entries, rank: 1 }])
        }
        _ => Err(Error::CollarUnavailable(format!(
            "`{}`: collar-form operators on the disc have no verified boundary matrix",
            spec.label
        ))),
    }
}

/// Inverse by anti-triangular back-substitution.
///
/// `E X = I` is solved row block by row block of `X`, starting from the
/// skew diagonal; the strictly anti-triangular part is nilpotent, so the
/// recursion closes after `m` steps.
#[allow(clippy::needless_range_loop)]
pub fn invert_seeley(a: &SeeleyMatrix) -> Result<SeeleyMatrix> {
    let m = a.size();
    let r = a.rank;
    let skew_inv: Vec<TangentialOp> = a
        .skew_diagonal()
        .iter()
        .map(|e| {
            e.invert_multiplier().ok_or_else(|| Error::EllipticityViolation {
                node: format!("{:?}", a.boundary),
                detail: "skew-diagonal entry A_0 is not invertible".into(),
            })
        })
        .collect::<Result<_>>()?;
    let mut x: Vec<Vec<TangentialOp>> = vec![vec![TangentialOp::zero(r, r); m]; m];
    for row in 0..m {
        let q = m - 1 - row;
        for s in 0..m {
            let mut rhs = if q == s { TangentialOp::identity(r) } else { TangentialOp::zero(r, r) };
            for p in 0..row {
                rhs = rhs.add(&a.entries[q][p].compose(&x[p][s]).scale(c(-1.0, 0.0)));
            }
            x[row][s] = skew_inv[q].compose(&rhs);
        }
    }
    let prefactor = C64::new(1.0, 0.0) / a.prefactor;
    Ok(SeeleyMatrix { boundary: a.boundary, prefactor, entries: x, rank: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolcore::CollarForm;

    fn series(pairs: &[(i64, C64)]) -> BTreeMap<i64, CVec> {
        pairs.iter().map(|&(n, v)| (n, CVec::from_element(1, v))).collect()
    }

    #[test]
    fn compose_commutes_shift_past_derivative() {
        // D_θ ∘ e^{iθ} = e^{iθ}(D_θ + 1)
        let d = TangentialOp::scalar(0, c(1.0, 0.0), 1);
        let e = TangentialOp::scalar(1, c(1.0, 0.0), 0);
        let de = d.compose(&e);
        let u = series(&[(3, c(1.0, 0.0))]);
        let direct = d.apply(&e.apply(&u));
        assert_eq!(de.apply(&u), direct);
        assert_eq!(direct[&4][0], c(4.0, 0.0));
    }

    #[test]
    fn interval_first_order() {
        let col = CollarForm::constant(vec![CMat::from_element(1, 1, c(2.0, 0.0)), CMat::from_element(1, 1, c(0.3, 0.0))]);
        let spec = OperatorSpec::collar("d", Domain::Interval, 1, 1, col).unwrap();
        let s = build_seeley_matrix(&spec).unwrap();
        assert_eq!(s[0].entries[0][0].terms[0].matrix[(0, 0)], c(2.0, 0.0));
        assert_eq!(s[0].prefactor, -I);
        let inv = invert_seeley(&s[0]).unwrap();
        // (−i A_0)^{-1} = i A_0^{-1}
        assert!((inv.prefactor - I).norm() < 1e-15);
        assert!((inv.entries[0][0].terms[0].matrix[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn structure_of_builtins() {
        for b in [Builtin::DbarPower(1), Builtin::DbarPower(2), Builtin::Laplacian, Builtin::Bilaplacian] {
            let s = build_seeley_matrix(&OperatorSpec::builtin(b)).unwrap().remove(0);
            assert!(s.is_anti_triangular());
            assert_eq!(s.size(), b.order());
        }
        assert!(matches!(
            build_seeley_matrix(&OperatorSpec::builtin(Builtin::DbarPower(3))),
            Err(Error::CollarUnavailable(_))
        ));
    }

    #[test]
    fn nilpotent_perturbation_terminates() {
        let m = 3;
        let mut entries = vec![vec![TangentialOp::zero(1, 1); m]; m];
        for q in 0..m {
            entries[q][m - 1 - q] = one(c(1.0, 0.0));
        }
        entries[0][0] = TangentialOp::scalar(0, c(0.5, 0.0), 1);
        entries[0][1] = TangentialOp::scalar(1, c(-2.0, 0.0), 0);
        entries[1][0] = one(c(3.0, 0.0));
        let a = SeeleyMatrix { boundary: BoundaryComponent::Circle, prefactor: c(1.0, 0.0), entries, rank: 1 };
        let inv = invert_seeley(&a).unwrap();
        let prod = a.compose(&inv);
        let u: Vec<_> = (0..m).map(|k| series(&[(k as i64 - 1, c(1.0, k as f64))])).collect();
        let back = prod.apply(&u);
        for (x, y) in back.iter().zip(&u) {
            for (n, v) in y {
                assert!((&x[n] - v).norm() < 1e-12);
            }
        }
    }
}
