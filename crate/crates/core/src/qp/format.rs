//! Plain-text matrix file for QP problems.
//!
//! ```text
//! # minimize u'Pu + c'u  s.t.  A u <= b
//! [P] 2 2
//! 1 0
//! 0 1
//! [c] 2
//! -2 0
//! [A] 1 2
//! 1 0
//! [b] 1
//! 0.5
//! ```
//!
//! Each section starts with a header `[name] rows cols` (matrices) or
//! `[name] len` (vectors), followed by the entries in row-major order,
//! separated by any whitespace across any number of lines. `#` starts a
//! comment. `P` and `c` are required; `A` and `b` may be omitted together
//! for an unconstrained problem.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{QpError, QpProblem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("invalid problem: {0}")]
    Problem(#[from] QpError),
}

struct Section {
    name: String,
    header_line: usize,
    shape: (usize, usize),
    values: Vec<f64>,
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

pub fn parse_problem(text: &str) -> Result<QpProblem, ParseError> {
    let mut sections: Vec<Section> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let (name, dims) = rest
                .split_once(']')
                .ok_or_else(|| syntax(line_no, "unterminated section header"))?;
            let name = name.trim();
            let canonical = match name {
                "P" => "P",
                "c" => "c",
                "A" | "A_in" => "A",
                "b" | "b_in" => "b",
                other => return Err(syntax(line_no, format!("unknown section [{other}]"))),
            };
            if sections.iter().any(|s| s.name == canonical) {
                return Err(syntax(line_no, format!("duplicate section [{canonical}]")));
            }
            let dims: Vec<usize> = dims
                .split_whitespace()
                .map(|d| {
                    d.parse()
                        .map_err(|_| syntax(line_no, format!("invalid dimension '{d}'")))
                })
                .collect::<Result<_, _>>()?;
            let is_matrix = matches!(canonical, "P" | "A");
            let shape = match (is_matrix, dims.as_slice()) {
                (true, [r, c]) => (*r, *c),
                (false, [len]) => (*len, 1),
                (true, _) => {
                    return Err(syntax(line_no, format!("[{canonical}] needs 'rows cols'")))
                }
                (false, _) => return Err(syntax(line_no, format!("[{canonical}] needs a length"))),
            };
            sections.push(Section {
                name: canonical.to_string(),
                header_line: line_no,
                shape,
                values: Vec::new(),
            });
            continue;
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| syntax(line_no, "values before the first section header"))?;
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| syntax(line_no, format!("invalid number '{token}'")))?;
            if section.values.len() == section.shape.0 * section.shape.1 {
                return Err(syntax(
                    line_no,
                    format!(
                        "too many values for [{}] declared on line {}",
                        section.name, section.header_line
                    ),
                ));
            }
            section.values.push(v);
        }
    }

    for s in &sections {
        let expected = s.shape.0 * s.shape.1;
        if s.values.len() != expected {
            return Err(syntax(
                s.header_line,
                format!(
                    "[{}] expects {} values, found {}",
                    s.name,
                    expected,
                    s.values.len()
                ),
            ));
        }
    }

    let take = |name: &str| sections.iter().find(|s| s.name == name);
    let p = take("P").ok_or(ParseError::MissingSection("P"))?;
    let c = take("c").ok_or(ParseError::MissingSection("c"))?;
    let p_mat = DMatrix::from_row_slice(p.shape.0, p.shape.1, &p.values);
    let c_vec = DVector::from_column_slice(&c.values);
    match (take("A"), take("b")) {
        (None, None) => Ok(QpProblem::unconstrained(p_mat, c_vec)?),
        (Some(a), Some(b)) => Ok(QpProblem::new(
            p_mat,
            c_vec,
            DMatrix::from_row_slice(a.shape.0, a.shape.1, &a.values),
            DVector::from_column_slice(&b.values),
        )?),
        (Some(_), None) => Err(ParseError::MissingSection("b")),
        (None, Some(b)) if b.shape.0 == 0 => Ok(QpProblem::unconstrained(p_mat, c_vec)?),
        (None, Some(_)) => Err(ParseError::MissingSection("A")),
    }
}

/// Writes a problem in the format read by [`parse_problem`]; values use the
/// shortest representation that round-trips exactly.
pub fn write_problem(prob: &QpProblem) -> String {
    let mut out = String::new();
    let n = prob.num_vars();
    let m = prob.num_constraints();
    let row = |out: &mut String, vals: &mut dyn Iterator<Item = f64>| {
        let line: Vec<String> = vals.map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    };
    let _ = writeln!(out, "[P] {n} {n}");
    for i in 0..n {
        row(&mut out, &mut prob.p().row(i).iter().copied());
    }
    let _ = writeln!(out, "[c] {n}");
    row(&mut out, &mut prob.c().iter().copied());
    if m > 0 {
        let _ = writeln!(out, "[A] {m} {n}");
        for i in 0..m {
            row(&mut out, &mut prob.a_in().row(i).iter().copied());
        }
        let _ = writeln!(out, "[b] {m}");
        row(&mut out, &mut prob.b_in().iter().copied());
    }
    out
}
