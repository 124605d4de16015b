//! Line-oriented restriction spec files.
//!
//! ```text
//! # comment
//! vars: x y z w
//! theta_bar: 0 0 1 1
//! g: x*y; x*w; y*z
//! V: identity
//! V_check: definite        # or: semidefinite
//! d: 2                     # optional, square-free radicand of surd coefficients
//! ```
//!
//! `V` is either `identity` or rows separated by `;` with entries separated
//! by whitespace. Scalars use the polynomial grammar, e.g. `7/10*sqrt(2)`.
//! `g` may be split across several `g:` lines.

use std::fmt;
use std::path::Path;

use crate::matrix::ScalarMatrix;
use crate::poly::{parse_poly, parse_scalar, MultiPoly, Scalar};
use crate::rates::Covariance;
use crate::restriction::RestrictionSystem;

use super::CliError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VSpec {
    Identity,
    Matrix(ScalarMatrix),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecFile {
    pub var_names: Vec<String>,
    pub theta_bar: Vec<Scalar>,
    pub g: Vec<String>,
    pub v: VSpec,
    /// Accept a singular positive-semidefinite `V`.
    pub semidefinite: bool,
    pub d: Option<u64>,
}

struct Line<'a> {
    number: usize,
    /// 1-based column where `value` starts.
    column: usize,
    value: &'a str,
}

fn parse_err(line: &Line<'_>, offset: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        line: line.number,
        column: line.column + offset,
        message: message.into(),
    }
}

/// Splits on `sep`, yielding each piece with its character offset.
fn split_with_offsets(s: &str, sep: impl Fn(char) -> bool) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut start_chars = 0;
    for (chars, (i, c)) in s.char_indices().enumerate() {
        if sep(c) {
            out.push((start_chars, &s[start..i]));
            start = i + c.len_utf8();
            start_chars = chars + 1;
        }
    }
    out.push((start_chars, &s[start..]));
    out
}

fn trimmed(offset: usize, piece: &str) -> (usize, &str) {
    let lead = piece.chars().take_while(|c| c.is_whitespace()).count();
    (offset + lead, piece.trim())
}

fn scalars(line: &Line<'_>, text: &str, base: usize) -> Result<Vec<Scalar>, CliError> {
    split_with_offsets(text, char::is_whitespace)
        .into_iter()
        .filter(|(_, p)| !p.is_empty())
        .map(|(off, p)| parse_scalar(p).map_err(|e| parse_err(line, base + off + e.column - 1, e.message)))
        .collect()
}

fn is_square_free(d: u64) -> bool {
    d >= 2 && (2..).take_while(|k| k * k <= d).all(|k| !d.is_multiple_of(k * k))
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut vars: Option<(Vec<String>, usize)> = None;
        let mut theta: Option<(Vec<Scalar>, usize)> = None;
        let mut g: Vec<(String, usize, usize)> = Vec::new();
        let mut v: Option<(VSpec, usize)> = None;
        let mut semidefinite = false;
        let mut d = None;
        for (idx, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let number = idx + 1;
            let Some((key, rest)) = content.split_once(':') else {
                return Err(CliError::Parse {
                    line: number,
                    column: 1,
                    message: "expected 'key: value'".into(),
                });
            };
            let key_chars = key.chars().count() + 1;
            let lead = rest.chars().take_while(|c| c.is_whitespace()).count();
            let line = Line {
                number,
                column: key_chars + lead + 1,
                value: rest.trim(),
            };
            let key = key.trim();
            let dup = |seen: bool| -> Result<(), CliError> {
                if seen {
                    Err(parse_err(&line, 0, format!("duplicate key '{key}'")))
                } else {
                    Ok(())
                }
            };
            match key {
                "vars" => {
                    dup(vars.is_some())?;
                    let names: Vec<String> = line.value.split_whitespace().map(str::to_string).collect();
                    for (off, n) in split_with_offsets(line.value, char::is_whitespace) {
                        if n.is_empty() {
                            continue;
                        }
                        let ok = n.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                            && n.chars().all(|c| c.is_alphanumeric() || c == '_')
                            && n != "sqrt";
                        if !ok {
                            return Err(parse_err(&line, off, format!("invalid variable name '{n}'")));
                        }
                    }
                    if let Some(i) = (1..names.len()).find(|&i| names[..i].contains(&names[i])) {
                        return Err(parse_err(&line, 0, format!("variable '{}' declared twice", names[i])));
                    }
                    if names.is_empty() {
                        return Err(parse_err(&line, 0, "no variables declared"));
                    }
                    vars = Some((names, number));
                }
                "theta_bar" => {
                    dup(theta.is_some())?;
                    theta = Some((scalars(&line, line.value, 0)?, number));
                }
                "g" => {
                    for (off, piece) in split_with_offsets(line.value, |c| c == ';') {
                        let (off, piece) = trimmed(off, piece);
                        if piece.is_empty() {
                            return Err(parse_err(&line, off, "empty restriction"));
                        }
                        g.push((piece.to_string(), number, line.column + off));
                    }
                }
                "V" => {
                    dup(v.is_some())?;
                    let spec = if line.value == "identity" {
                        VSpec::Identity
                    } else {
                        let rows = split_with_offsets(line.value, |c| c == ';')
                            .into_iter()
                            .map(|(off, r)| scalars(&line, r, off))
                            .collect::<Result<Vec<_>, _>>()?;
                        let m = ScalarMatrix::from_rows(rows).map_err(|e| parse_err(&line, 0, e.to_string()))?;
                        VSpec::Matrix(m)
                    };
                    v = Some((spec, number));
                }
                "V_check" => match line.value {
                    "definite" => semidefinite = false,
                    "semidefinite" => semidefinite = true,
                    other => return Err(parse_err(&line, 0, format!("expected 'definite' or 'semidefinite', got '{other}'"))),
                },
                "d" => {
                    dup(d.is_some())?;
                    let n: u64 = line
                        .value
                        .parse()
                        .map_err(|_| parse_err(&line, 0, "expected a positive integer"))?;
                    if !is_square_free(n) {
                        return Err(parse_err(&line, 0, format!("{n} is not a square-free integer >= 2")));
                    }
                    d = Some(n);
                }
                other => {
                    return Err(CliError::Parse {
                        line: number,
                        column: 1,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        let (var_names, _) = vars.ok_or(CliError::MissingKey("vars"))?;
        let (theta_bar, theta_line) = theta.ok_or(CliError::MissingKey("theta_bar"))?;
        let (v, v_line) = v.ok_or(CliError::MissingKey("V"))?;
        if g.is_empty() {
            return Err(CliError::MissingKey("g"));
        }
        let p = var_names.len();
        if theta_bar.len() != p {
            return Err(CliError::Dimension {
                line: theta_line,
                what: "theta_bar",
                expected: p,
                found: theta_bar.len(),
            });
        }
        if let VSpec::Matrix(m) = &v {
            if m.rows() != p || m.cols() != p {
                return Err(CliError::Dimension {
                    line: v_line,
                    what: "V",
                    expected: p,
                    found: if m.rows() != p { m.rows() } else { m.cols() },
                });
            }
        }
        let mut g_text = Vec::with_capacity(g.len());
        for (text, line, column) in g {
            parse_poly(&text, &var_names).map_err(|e| CliError::Parse {
                line,
                column: column + e.column - 1,
                message: e.message,
            })?;
            g_text.push(text);
        }
        let spec = SpecFile {
            var_names,
            theta_bar,
            g: g_text,
            v,
            semidefinite,
            d,
        };
        spec.check_extension()?;
        spec.covariance()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        SpecFile::parse(&text)
    }

    fn check_extension(&self) -> Result<(), CliError> {
        let mut exts: Vec<u64> = self.theta_bar.iter().map(Scalar::ext).collect();
        exts.extend(self.polys()?.iter().map(MultiPoly::ext));
        if let VSpec::Matrix(m) = &self.v {
            exts.push(m.ext());
        }
        let mut seen = self.d;
        for e in exts.into_iter().filter(|&e| e != 0) {
            match seen {
                Some(s) if s != e => {
                    return Err(CliError::Validation(format!(
                        "coefficients use sqrt({e}) but the field is Q(sqrt({s}))"
                    )))
                }
                _ => seen = Some(e),
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.var_names.len()
    }

    pub fn polys(&self) -> Result<Vec<MultiPoly>, CliError> {
        self.g
            .iter()
            .map(|t| parse_poly(t, &self.var_names).map_err(|e| CliError::Validation(e.to_string())))
            .collect()
    }

    pub fn v_matrix(&self) -> ScalarMatrix {
        match &self.v {
            VSpec::Identity => ScalarMatrix::identity(self.p()),
            VSpec::Matrix(m) => m.clone(),
        }
    }

    pub fn covariance(&self) -> Result<Covariance, CliError> {
        let m = self.v_matrix();
        let c = if self.semidefinite {
            Covariance::semidefinite(m)
        } else {
            Covariance::new(m)
        };
        c.map_err(|e| CliError::NonSpdV(e.to_string()))
    }

    pub fn system(&self) -> Result<RestrictionSystem, CliError> {
        Ok(RestrictionSystem::new(self.var_names.clone(), self.polys()?, self.theta_bar.clone())?)
    }

    pub fn theta_bar_f64(&self) -> Vec<f64> {
        self.theta_bar.iter().map(Scalar::to_f64).collect()
    }
}

impl fmt::Display for SpecFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Scalar]| v.iter().map(Scalar::to_string).collect::<Vec<_>>().join(" ");
        writeln!(f, "vars: {}", self.var_names.join(" "))?;
        writeln!(f, "theta_bar: {}", join(&self.theta_bar))?;
        writeln!(f, "g: {}", self.g.join("; "))?;
        match &self.v {
            VSpec::Identity => writeln!(f, "V: identity")?,
            VSpec::Matrix(m) => {
                let rows: Vec<String> = (0..m.rows()).map(|i| join(m.row(i))).collect();
                writeln!(f, "V: {}", rows.join("; "))?;
            }
        }
        if self.semidefinite {
            writeln!(f, "V_check: semidefinite")?;
        }
        if let Some(d) = self.d {
            writeln!(f, "d: {d}")?;
        }
        Ok(())
    }
}
