//! TOML readers for operator specs and matrix symbols.
//!
//! Operator spec:
//!
//! ```toml
//! label = "perturbed cr"          # optional
//! builtin = "cr"                  # cr | dbar<m> | laplacian | bilaplacian | wave
//! # or, without `builtin`:
//! order = 1
//! rank_e = 1
//! rank_f = 1
//! domain = "disc"                 # disc | interval
//! convention = "D"                # D (default) | partial
//!
//! [[coefficients]]                # ambient form, disc only
//! index = [1, 0]                  # D_x^1 D_y^0
//! matrix = [[[0.0, 1.0]]]         # rows of [re, im]
//!
//! [[collar]]                      # collar form: one term of A_j
//! j = 0
//! matrix = [[[1.0, 0.0]]]
//! power = 0                       # D_θ power (disc only)
//! shift = 0                       # e^{i shift θ} factor (disc only)
//! ```
//!
//! With `builtin`, any `[[coefficients]]` entries are added to the builtin
//! operator as lower-order terms.
//!
//! Symbol file:
//!
//! ```toml
//! size = 1
//! [[terms]]
//! degree = [1, 0]                 # z^1 z̄^0
//! matrix = [[[1.0, 0.0]]]
//! ```

use std::collections::BTreeMap;
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use super::{Builtin, CollarForm, CollarTerm, Convention, Domain, OperatorForm, OperatorSpec};
use crate::linalg::c;
use crate::poly::MatPoly;
use crate::{CMat, Error, Result};

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    label: Option<String>,
    builtin: Option<Spanned<String>>,
    order: Option<usize>,
    rank_e: Option<usize>,
    rank_f: Option<usize>,
    domain: Option<Spanned<String>>,
    convention: Option<Spanned<String>>,
    #[serde(default)]
    coefficients: Vec<Spanned<RawCoefficient>>,
    #[serde(default)]
    collar: Vec<Spanned<RawCollar>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficient {
    index: [u32; 2],
    matrix: RawMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCollar {
    j: usize,
    matrix: RawMatrix,
    #[serde(default)]
    power: u32,
    #[serde(default)]
    shift: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSymbol {
    size: usize,
    #[serde(default)]
    terms: Vec<Spanned<RawTerm>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    degree: [u32; 2],
    matrix: RawMatrix,
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn parse_err(text: &str, span: Option<Range<usize>>, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: span.map(|s| line_of(text, s.start)).unwrap_or(0),
        message: msg.into(),
    }
}

fn toml_err(text: &str, e: toml::de::Error) -> Error {
    parse_err(text, e.span(), e.message().to_string())
}

fn to_matrix(raw: &RawMatrix) -> std::result::Result<CMat, String> {
    let rows = raw.len();
    let cols = raw.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err("matrix must be non-empty".into());
    }
    if raw.iter().any(|r| r.len() != cols) {
        return Err("matrix rows have different lengths".into());
    }
    if raw.iter().flatten().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err("matrix entries must be finite".into());
    }
    Ok(CMat::from_fn(rows, cols, |i, j| c(raw[i][j][0], raw[i][j][1])))
}

pub fn parse_operator_spec(text: &str) -> Result<OperatorSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| toml_err(text, e))?;

    let domain = match &raw.domain {
        None => Domain::UnitDisc,
        Some(d) => match d.get_ref().as_str() {
            "disc" | "unit_disc" => Domain::UnitDisc,
            "interval" => Domain::Interval,
            other => return Err(parse_err(text, Some(d.span()), format!("unknown domain `{other}`"))),
        },
    };
    let convention = match &raw.convention {
        None => Convention::D,
        Some(cv) => match cv.get_ref().as_str() {
            "D" | "d" => Convention::D,
            "partial" => Convention::Partial,
            other => {
                return Err(parse_err(text, Some(cv.span()), format!("unknown convention `{other}`")))
            }
        },
    };

    let mut coeffs: BTreeMap<(u32, u32), CMat> = BTreeMap::new();
    for entry in &raw.coefficients {
        let m = to_matrix(&entry.get_ref().matrix)
            .map_err(|msg| parse_err(text, Some(entry.span()), msg))?;
        let [a, b] = entry.get_ref().index;
        if coeffs.contains_key(&(a, b)) {
            return Err(parse_err(text, Some(entry.span()), format!("duplicate index [{a},{b}]")));
        }
        coeffs.insert((a, b), m);
    }
    let first_span = |v: &[Spanned<RawCoefficient>]| v.first().map(|s| s.span());

    if let Some(name) = &raw.builtin {
        let b = Builtin::parse(name.get_ref())
            .ok_or_else(|| parse_err(text, Some(name.span()), format!("unknown builtin `{}`", name.get_ref())))?;
        if !raw.collar.is_empty() {
            return Err(parse_err(text, Some(raw.collar[0].span()), "builtin operators take no collar terms"));
        }
        if domain != Domain::UnitDisc {
            return Err(parse_err(text, raw.domain.as_ref().map(|d| d.span()), "builtin operators live on the disc"));
        }
        let mut spec = OperatorSpec::builtin(b);
        if let Some(order) = raw.order {
            if order != b.order() {
                return Err(parse_err(text, None, format!("order {order} contradicts builtin order {}", b.order())));
            }
        }
        for (entry, (k, m)) in raw.coefficients.iter().zip(coeffs) {
            let m = match convention {
                Convention::D => m,
                Convention::Partial => m * crate::linalg::ipow((k.0 + k.1) as i64),
            };
            spec = spec
                .perturbed(k, m)
                .map_err(|e| parse_err(text, Some(entry.span()), e.to_string()))?;
        }
        if let Some(l) = raw.label {
            spec.label = l;
        }
        return Ok(spec);
    }

    let order = raw.order.ok_or_else(|| parse_err(text, None, "missing `order`"))?;
    let rank_e = raw.rank_e.ok_or_else(|| parse_err(text, None, "missing `rank_e`"))?;
    let rank_f = raw.rank_f.ok_or_else(|| parse_err(text, None, "missing `rank_f`"))?;
    let label = raw.label.unwrap_or_else(|| "operator".into());

    match (coeffs.is_empty(), raw.collar.is_empty()) {
        (false, false) => Err(parse_err(
            text,
            Some(raw.collar[0].span()),
            "give either [[coefficients]] or [[collar]], not both",
        )),
        (true, true) => Err(parse_err(text, None, "no [[coefficients]] or [[collar]] entries")),
        (false, true) => {
            if domain != Domain::UnitDisc {
                return Err(parse_err(text, first_span(&raw.coefficients), "ambient coefficients require the disc"));
            }
            OperatorSpec::ambient(label, order, rank_e, rank_f, convention, coeffs)
                .map_err(|e| parse_err(text, first_span(&raw.coefficients), e.to_string()))
        }
        (true, false) => {
            let mut a: Vec<Vec<CollarTerm>> = vec![Vec::new(); order + 1];
            for entry in &raw.collar {
                let r = entry.get_ref();
                if r.j > order {
                    return Err(parse_err(text, Some(entry.span()), format!("collar index j={} exceeds order {order}", r.j)));
                }
                let m = to_matrix(&r.matrix).map_err(|msg| parse_err(text, Some(entry.span()), msg))?;
                a[r.j].push(CollarTerm { power: r.power, shift: r.shift, matrix: m });
            }
            let spec = OperatorSpec {
                label,
                order,
                rank_e,
                rank_f,
                domain,
                form: OperatorForm::Collar(CollarForm { a }),
                family: None,
            };
            spec.validate()
                .map_err(|e| parse_err(text, Some(raw.collar[0].span()), e.to_string()))?;
            Ok(spec)
        }
    }
}

pub fn parse_symbol(text: &str) -> Result<MatPoly> {
    let raw: RawSymbol = toml::from_str(text).map_err(|e| toml_err(text, e))?;
    if raw.size == 0 {
        return Err(parse_err(text, None, "size must be positive"));
    }
    let mut out = MatPoly::new(raw.size);
    for entry in &raw.terms {
        let m = to_matrix(&entry.get_ref().matrix)
            .map_err(|msg| parse_err(text, Some(entry.span()), msg))?;
        if m.shape() != (raw.size, raw.size) {
            return Err(parse_err(
                text,
                Some(entry.span()),
                format!("term matrix has shape {:?}, expected {}x{}", m.shape(), raw.size, raw.size),
            ));
        }
        let [a, b] = entry.get_ref().degree;
        out.add_term(a, b, m);
    }
    Ok(out)
}

/// Render a symbol back to the file format.
pub fn symbol_to_toml(p: &MatPoly) -> String {
    let mut s = format!("size = {}\n", p.size);
    for (&(a, b), m) in &p.terms {
        s.push_str(&format!("\n[[terms]]\ndegree = [{a}, {b}]\nmatrix = ["));
        let rows: Vec<String> = (0..m.nrows())
            .map(|i| {
                let cols: Vec<String> = (0..m.ncols())
                    .map(|j| format!("[{:?}, {:?}]", m[(i, j)].re, m[(i, j)].im))
                    .collect();
                format!("[{}]", cols.join(", "))
            })
            .collect();
        s.push_str(&rows.join(", "));
        s.push_str("]\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_with_perturbation() {
        let spec = parse_operator_spec(
            "builtin = \"cr\"\n[[coefficients]]\nindex = [0, 0]\nmatrix = [[[0.1, 0.0]]]\n",
        )
        .unwrap();
        assert_eq!(spec.family, Some(Builtin::DbarPower(1)));
        assert!(!spec.is_pure_builtin());
    }

    #[test]
    fn ambient_partial_convention() {
        let text = r#"
order = 1
rank_e = 1
rank_f = 1
convention = "partial"
[[coefficients]]
index = [1, 0]
matrix = [[[1.0, 0.0]]]
[[coefficients]]
index = [0, 1]
matrix = [[[0.0, 1.0]]]
"#;
        let spec = parse_operator_spec(text).unwrap();
        assert!(spec.is_pure_builtin());
    }

    #[test]
    fn errors_carry_lines() {
        let text = "order = 1\nrank_e = 1\nrank_f = 1\n\n[[coefficients]]\nindex = [1, 0]\nmatrix = [[[1.0, 0.0], [2.0, 0.0]]]\n";
        match parse_operator_spec(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        match parse_operator_spec("order = \"x\"\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_operator_spec("order = 1\nbogus = 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interval_collar() {
        let text = r#"
order = 1
rank_e = 1
rank_f = 1
domain = "interval"
[[collar]]
j = 0
matrix = [[[1.0, 0.0]]]
[[collar]]
j = 1
matrix = [[[0.0, 1.0]]]
"#;
        let spec = parse_operator_spec(text).unwrap();
        assert_eq!(spec.domain, Domain::Interval);
        assert!(matches!(spec.form, OperatorForm::Collar(_)));
    }

    #[test]
    fn symbol_roundtrip() {
        let text = "size = 1\n[[terms]]\ndegree = [2, 0]\nmatrix = [[[1.0, 0.0]]]\n[[terms]]\ndegree = [0, 0]\nmatrix = [[[2.0, 0.5]]]\n";
        let p = parse_symbol(text).unwrap();
        assert_eq!(p.degree(), 2);
        let q = parse_symbol(&symbol_to_toml(&p)).unwrap();
        assert_eq!(p, q);
        assert!(matches!(parse_symbol("size = 2\n[[terms]]\ndegree=[0,0]\nmatrix=[[[1.0,0.0]]]\n"), Err(Error::Parse { line: 2, .. })));
    }
}
