//! Topological side of the boundary index formula on the disc.
//!
//! `S*S¹` is two circles (`ξ' = ±1`), the Todd class is trivial, and the
//! pairing reduces to
//!
//! ```text
//! index = Σ_{σ = ±} s_σ · rank E₊(D)|_σ · winding(det α|_{S¹})
//! ```
//!
//! The orientation signs `s_σ` are pinned once against the Bergman shift
//! (index of `T_z` on the holomorphic Bergman space is −1) and stored in a
//! small TOML file.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bergman::{self, IndexEstimate, ToeplitzProblem};
use crate::calderon;
use crate::linalg::{self, c};
use crate::poly::{DiscPoly, MatPoly};
use crate::symbolcore::{Builtin, CosphereGrid, OperatorSpec};
use crate::tolerances::Tolerances;
use crate::{CMat, Error, Result, C64};

/// Largest sample count the adaptive winding loop will try.
pub const MAX_SAMPLES: usize = 1 << 16;

/// `α` sampled on the boundary circle.
#[derive(Debug, Clone)]
pub struct BoundaryLoopSymbol {
    pub samples: Vec<CMat>,
    pub dets: Vec<C64>,
    pub min_abs_det: f64,
}

impl BoundaryLoopSymbol {
    pub fn sample(alpha: &MatPoly, n: usize) -> Self {
        let samples: Vec<CMat> = (0..n)
            .map(|k| alpha.eval(C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)))
            .collect();
        let dets: Vec<C64> = samples.iter().map(linalg::det).collect();
        let min_abs_det = dets.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min);
        Self { samples, dets, min_abs_det }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Winding {
    pub winding: i64,
    /// `|Δarg/2π − winding|`.
    pub defect: f64,
    pub max_jump: f64,
    pub samples: usize,
}

/// Winding of `det α` along the sampled loop.
pub fn winding_number(lp: &BoundaryLoopSymbol, tol: &Tolerances) -> Result<Winding> {
    if lp.min_abs_det < tol.inv {
        return Err(Error::NotInvertibleOnBoundary { min_abs_det: lp.min_abs_det });
    }
    let n = lp.dets.len();
    let mut total = 0.0;
    let mut max_jump: f64 = 0.0;
    for k in 0..n {
        let step = (lp.dets[(k + 1) % n] / lp.dets[k]).arg();
        if step.abs() >= PI / 2.0 {
            return Err(Error::UnderSampled { jump: step.abs(), at: k, next: 2 * n });
        }
        max_jump = max_jump.max(step.abs());
        total += step;
    }
    let w = total / (2.0 * PI);
    let winding = w.round() as i64;
    let defect = (w - winding as f64).abs();
    if defect > 0.01 {
        return Err(Error::UnderSampled { jump: max_jump, at: 0, next: 2 * n });
    }
    Ok(Winding { winding, defect, max_jump, samples: n })
}

/// Winding with sample doubling until the branch tracking is sound.
pub fn winding_of(alpha: &MatPoly, tol: &Tolerances) -> Result<Winding> {
    let mut n = 64 * (alpha.degree() as usize + 1);
    loop {
        match winding_number(&BoundaryLoopSymbol::sample(alpha, n), tol) {
            Err(Error::UnderSampled { next, .. }) if next <= MAX_SAMPLES => n = next,
            other => return other,
        }
    }
}

/// Persisted orientation signs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationStore {
    pub version: u32,
    pub reference_operator: String,
    pub reference_symbol: String,
    pub reference_index: i64,
    pub sign_plus: i64,
    pub sign_minus: i64,
}

pub const CALIBRATION_VERSION: u32 = 1;

impl CalibrationStore {
    pub fn signs(&self) -> [i64; 2] {
        [self.sign_plus, self.sign_minus]
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::CalibrationRequired,
            _ => Error::Io(e),
        })?;
        let store: Self = toml::from_str(&text)
            .map_err(|e| Error::CalibrationFailure(format!("unreadable store: {}", e.message())))?;
        if store.version != CALIBRATION_VERSION {
            return Err(Error::CalibrationFailure(format!("store version {} is not supported", store.version)));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let text = toml::to_string(self).map_err(|e| Error::CalibrationFailure(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Topological index of the reference problem under these signs.
    pub fn reproduces_reference(&self, tol: &Tolerances) -> Result<bool> {
        let (spec, alpha) = reference_problem();
        let rep = topological_index(&spec, &alpha, Some(self), CosphereGrid::DEFAULT_POINTS, tol)?;
        Ok(rep.combined == self.reference_index)
    }
}

fn reference_problem() -> (OperatorSpec, MatPoly) {
    (OperatorSpec::builtin(Builtin::DbarPower(1)), MatPoly::scalar(&DiscPoly::z()))
}

/// Pin `s_±` from the numerical index of `T_z` on the Bergman space.
///
/// Signs on the two cosphere components are opposite; the remaining
/// overall sign is the unique one reproducing the reference index.
pub fn calibrate_orientation(schedule: &[usize], tol: &Tolerances) -> Result<CalibrationStore> {
    let (spec, alpha) = reference_problem();
    let est = match ToeplitzProblem::new(&spec, alpha.clone(), schedule.to_vec(), *tol).and_then(|p| bergman::numerical_index(&p)) {
        Ok(e) => e,
        Err(Error::IndexUnstable(e)) => {
            return Err(Error::CalibrationFailure(format!(
                "reference index did not stabilize (last value {})",
                e.index
            )))
        }
        Err(e) => return Err(Error::CalibrationFailure(e.to_string())),
    };
    let ranks = calderon::e_plus_ranks(&spec, &CosphereGrid::for_spec(&spec, CosphereGrid::DEFAULT_POINTS), tol)?;
    let w = winding_of(&alpha, tol)?.winding;
    let solutions: Vec<i64> = [1i64, -1]
        .into_iter()
        .filter(|&s| s * ranks[0] as i64 * w - s * ranks[1] as i64 * w == est.index)
        .collect();
    let [s] = solutions[..] else {
        return Err(Error::CalibrationFailure(format!(
            "no unique sign reproduces reference index {} (ranks {ranks:?}, winding {w})",
            est.index
        )));
    };
    Ok(CalibrationStore {
        version: CALIBRATION_VERSION,
        reference_operator: spec.label.clone(),
        reference_symbol: "z".into(),
        reference_index: est.index,
        sign_plus: s,
        sign_minus: -s,
    })
}

/// Load the store at `path`, or calibrate and write it if absent.
pub fn load_or_calibrate(path: &Path, schedule: &[usize], tol: &Tolerances) -> Result<CalibrationStore> {
    match CalibrationStore::load(path) {
        Err(Error::CalibrationRequired) => {
            let store = calibrate_orientation(schedule, tol)?;
            store.save(path)?;
            Ok(store)
        }
        other => other,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologicalIndexReport {
    pub operator: String,
    /// Winding of `det α` seen from each cosphere component.
    pub windings: [i64; 2],
    pub ranks: [usize; 2],
    pub signs: [i64; 2],
    pub combined: i64,
    pub winding_samples: usize,
    pub winding_defect: f64,
    pub tolerance_inv: f64,
    pub calibration_version: u32,
    pub note: String,
}

impl TopologicalIndexReport {
    pub fn recompute(&self) -> i64 {
        (0..2).map(|s| self.signs[s] * self.ranks[s] as i64 * self.windings[s]).sum()
    }
}

pub fn topological_index(
    spec: &OperatorSpec,
    alpha: &MatPoly,
    store: Option<&CalibrationStore>,
    grid_points: usize,
    tol: &Tolerances,
) -> Result<TopologicalIndexReport> {
    let store = store.ok_or(Error::CalibrationRequired)?;
    let ranks = calderon::e_plus_ranks(spec, &CosphereGrid::for_spec(spec, grid_points), tol)?;
    let w = winding_of(alpha, tol)?;
    let windings = [w.winding, w.winding];
    let signs = store.signs();
    let mut rep = TopologicalIndexReport {
        operator: spec.label.clone(),
        windings,
        ranks,
        signs,
        combined: 0,
        winding_samples: w.samples,
        winding_defect: w.defect,
        tolerance_inv: tol.inv,
        calibration_version: store.version,
        note: format!(
            "signs calibrated on ({}, {}) with index {}",
            store.reference_operator, store.reference_symbol, store.reference_index
        ),
    };
    rep.combined = rep.recompute();
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheck {
    pub operator: String,
    pub numerical: IndexEstimate,
    pub topological: TopologicalIndexReport,
    pub equal: bool,
}

/// Numerical Toeplitz index against the topological formula. The store is
/// re-checked against its reference problem first.
pub fn cross_check(
    spec: &OperatorSpec,
    alpha: &MatPoly,
    store: &CalibrationStore,
    schedule: &[usize],
    tol: &Tolerances,
) -> Result<CrossCheck> {
    if !store.reproduces_reference(tol)? {
        return Err(Error::CalibrationFailure(
            "calibration store does not reproduce its reference index".into(),
        ));
    }
    let topological = topological_index(spec, alpha, Some(store), CosphereGrid::DEFAULT_POINTS, tol)?;
    let numerical = bergman::numerical_index(&ToeplitzProblem::new(spec, alpha.clone(), schedule.to_vec(), *tol)?)?;
    Ok(CrossCheck {
        operator: spec.label.clone(),
        equal: numerical.index == topological.combined,
        numerical,
        topological,
    })
}

/// Random scalar symbol `z^w · (1 + small harmonics)` (`z̄^{|w|}` for
/// negative `w`). The perturbation has total coefficient mass `≤ 0.3`, so
/// the symbol never vanishes on the closed disc's boundary and has winding `w`.
pub fn random_loop<R: Rng>(rng: &mut R, winding: i32) -> DiscPoly {
    let mut g = DiscPoly::constant(c(1.0, 0.0));
    let mut coeffs = Vec::new();
    for n in 1..=2u32 {
        coeffs.push(((n, 0), c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        coeffs.push(((0, n), c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
    }
    let mass: f64 = coeffs.iter().map(|(_, v)| v.norm()).sum();
    let scale = rng.gen_range(0.05..0.3) / mass;
    for ((a, b), v) in coeffs {
        g.add_term(a, b, v * scale);
    }
    let lead = if winding >= 0 {
        DiscPoly::monomial(winding as u32, 0, c(1.0, 0.0))
    } else {
        DiscPoly::monomial(0, winding.unsigned_abs(), c(1.0, 0.0))
    };
    &lead * &g
}

/// `diag(p_1, …, p_k)` as a matrix symbol.
pub fn diagonal_symbol(entries: &[DiscPoly]) -> MatPoly {
    let n = entries.len();
    let mut m = MatPoly::new(n);
    for (i, p) in entries.iter().enumerate() {
        for (&(a, b), &v) in &p.terms {
            let mut e = CMat::zeros(n, n);
            e[(i, i)] = v;
            m.add_term(a, b, e);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn store() -> CalibrationStore {
        CalibrationStore {
            version: CALIBRATION_VERSION,
            reference_operator: "cr".into(),
            reference_symbol: "z".into(),
            reference_index: -1,
            sign_plus: -1,
            sign_minus: 1,
        }
    }

    fn zk(k: u32) -> MatPoly {
        MatPoly::scalar(&DiscPoly::monomial(k, 0, c(1.0, 0.0)))
    }

    #[test]
    fn winding_examples() {
        for k in 0..4 {
            assert_eq!(winding_of(&zk(k), &tol()).unwrap().winding, k as i64);
        }
        let m = MatPoly::constant(linalg::from_rows(&[vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(0.0, 1.0), c(3.0, 0.0)]]));
        assert_eq!(winding_of(&m, &tol()).unwrap().winding, 0);
        let d = diagonal_symbol(&[DiscPoly::z(), DiscPoly::zbar()]);
        assert_eq!(winding_of(&d, &tol()).unwrap().winding, 0);
    }

    #[test]
    fn winding_errors() {
        let z5 = zk(5);
        assert!(matches!(
            winding_number(&BoundaryLoopSymbol::sample(&z5, 8), &tol()),
            Err(Error::UnderSampled { next: 16, .. })
        ));
        let mut a = DiscPoly::z();
        a.add_term(0, 0, c(1.0, 0.0));
        assert!(matches!(
            winding_of(&MatPoly::scalar(&a), &tol()),
            Err(Error::NotInvertibleOnBoundary { .. })
        ));
    }

    #[test]
    fn winding_is_additive_and_density_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (wa, wb) = (rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            let a = random_loop(&mut rng, wa);
            let b = random_loop(&mut rng, wb);
            let w = |p: &DiscPoly| winding_of(&MatPoly::scalar(p), &tol()).unwrap().winding;
            assert_eq!(w(&a), wa as i64);
            assert_eq!(w(&(&a * &b)), w(&a) + w(&b));
            let lp = BoundaryLoopSymbol::sample(&MatPoly::scalar(&a), 256);
            let lp2 = BoundaryLoopSymbol::sample(&MatPoly::scalar(&a), 512);
            assert_eq!(winding_number(&lp, &tol()).unwrap().winding, winding_number(&lp2, &tol()).unwrap().winding);
        }
    }

    #[test]
    fn topological_examples() {
        let s = store();
        let cr = OperatorSpec::builtin(Builtin::DbarPower(1));
        assert_eq!(topological_index(&cr, &zk(1), Some(&s), 16, &tol()).unwrap().combined, -1);
        assert_eq!(topological_index(&cr, &zk(0), Some(&s), 16, &tol()).unwrap().combined, 0);
        let d2 = OperatorSpec::builtin(Builtin::DbarPower(2));
        assert_eq!(topological_index(&d2, &zk(3), Some(&s), 16, &tol()).unwrap().combined, -6);
        let lap = OperatorSpec::builtin(Builtin::Laplacian);
        let rep = topological_index(&lap, &zk(2), Some(&s), 16, &tol()).unwrap();
        assert_eq!(rep.combined, 0);
        assert_eq!(rep.recompute(), rep.combined);
        assert!(matches!(topological_index(&cr, &zk(1), None, 16, &tol()), Err(Error::CalibrationRequired)));
    }

    #[test]
    fn order_zero_perturbation_keeps_report() {
        let s = store();
        let cr = OperatorSpec::builtin(Builtin::DbarPower(1));
        let p = cr.perturbed((0, 0), CMat::from_element(1, 1, c(0.1, 0.0))).unwrap();
        let a = topological_index(&cr, &zk(2), Some(&s), 16, &tol()).unwrap();
        let b = topological_index(&p, &zk(2), Some(&s), 16, &tol()).unwrap();
        assert_eq!((a.combined, a.ranks, a.windings), (b.combined, b.ranks, b.windings));
    }

    #[test]
    fn calibration_roundtrip_and_tamper() {
        let st = calibrate_orientation(&[20, 25, 30], &tol()).unwrap();
        assert_eq!(st, store());
        assert_eq!(calibrate_orientation(&[20, 25, 30], &tol()).unwrap(), st);
        let dir = std::env::temp_dir().join(format!("indexlab-cal-{}", std::process::id()));
        let path = dir.join("calibration.toml");
        st.save(&path).unwrap();
        assert_eq!(CalibrationStore::load(&path).unwrap(), st);
        let tampered = CalibrationStore { sign_plus: 1, sign_minus: -1, ..st.clone() };
        assert!(!tampered.reproduces_reference(&tol()).unwrap());
        let cr = OperatorSpec::builtin(Builtin::DbarPower(1));
        assert!(matches!(
            cross_check(&cr, &zk(2), &tampered, &[20, 25, 30], &tol()),
            Err(Error::CalibrationFailure(_))
        ));
        let _ = std::fs::remove_dir_all(dir);
        assert!(matches!(
            CalibrationStore::load(Path::new("/nonexistent/indexlab.toml")),
            Err(Error::CalibrationRequired)
        ));
    }

    #[test]
    fn cross_check_examples() {
        let s = store();
        let sched = [20, 25, 30];
        let lap = OperatorSpec::builtin(Builtin::Laplacian);
        let mut a = DiscPoly::monomial(3, 0, c(1.0, 0.0));
        a.add_term(0, 0, c(2.0, 0.0));
        let r = cross_check(&lap, &MatPoly::scalar(&a), &s, &sched, &tol()).unwrap();
        assert!(r.equal && r.numerical.index == 0);
        let cr = OperatorSpec::builtin(Builtin::DbarPower(1));
        let r = cross_check(&cr, &zk(2), &s, &sched, &tol()).unwrap();
        assert!(r.equal && r.numerical.index == -2);
        let mut b = DiscPoly::z().scale(c(0.5, 0.0));
        b.add_term(0, 0, c(3.0, 0.0));
        let r = cross_check(&cr, &MatPoly::scalar(&b), &s, &sched, &tol()).unwrap();
        assert!(r.equal && r.numerical.index == 0);
    }
}
