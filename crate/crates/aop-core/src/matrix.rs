//! Dense operator matrices over the real or complex field, plus the
//! plain-text interchange format.
//!
//! Entries are stored as `Complex<f64>` regardless of field; a real
//! matrix is one whose entries all have zero imaginary part and whose
//! [`ScalarField`] tag is [`ScalarField::Real`]. Every quantity computed
//! downstream is field-agnostic, so a single storage type keeps one code
//! path for both cases.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AopError, Result};

/// Scalar field of a matrix: real entries or complex entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarField {
    #[serde(rename = "R")]
    Real,
    #[serde(rename = "C")]
    Complex,
}

impl ScalarField {
    /// One-letter tag used by the text format.
    pub fn tag(self) -> &'static str {
        match self {
            ScalarField::Real => "R",
            ScalarField::Complex => "C",
        }
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Real => write!(f, "real"),
            ScalarField::Complex => write!(f, "complex"),
        }
    }
}

/// A dense matrix representing a linear operator from a `cols`-dimensional
/// domain into a `rows`-dimensional codomain.
///
/// Invariants enforced at construction: dimensions at least 1x1 and all
/// entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    field: ScalarField,
    data: DMatrix<Complex<f64>>,
}

impl OperatorMatrix {
    /// Wraps an existing matrix, validating finiteness.
    pub fn new(field: ScalarField, data: DMatrix<Complex<f64>>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(AopError::EmptyMatrix {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        for col in 0..data.ncols() {
            for row in 0..data.nrows() {
                let z = data[(row, col)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(AopError::NonFiniteEntry { row, col });
                }
            }
        }
        Ok(Self { field, data })
    }

    /// Real matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        let data = DMatrix::from_row_iterator(
            rows,
            cols,
            entries.iter().map(|&x| Complex::new(x, 0.0)),
        );
        Self::new(ScalarField::Real, data)
    }

    /// Complex matrix from row-major entries.
    pub fn from_complex(rows: usize, cols: usize, entries: &[Complex<f64>]) -> Result<Self> {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        let data = DMatrix::from_row_iterator(rows, cols, entries.iter().copied());
        Self::new(ScalarField::Complex, data)
    }

    /// Real diagonal matrix.
    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let data = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex::new(entries[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        Self {
            field: ScalarField::Real,
            data,
        }
    }

    /// Real identity.
    pub fn identity(n: usize) -> Self {
        Self {
            field: ScalarField::Real,
            data: DMatrix::identity(n, n),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    pub fn matrix(&self) -> &DMatrix<Complex<f64>> {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// More columns than rows: the domain cannot embed isometrically.
    pub fn is_wide(&self) -> bool {
        self.cols() > self.rows()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Applies the operator to a vector.
    pub fn apply(&self, x: &DVector<Complex<f64>>) -> DVector<Complex<f64>> {
        assert_eq!(x.len(), self.cols(), "vector length mismatch");
        &self.data * x
    }

    /// Composition `self * rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.cols() != rhs.rows() {
            return Err(AopError::ShapeMismatch {
                left_rows: self.rows(),
                left_cols: self.cols(),
                right_rows: rhs.rows(),
                right_cols: rhs.cols(),
            });
        }
        let field = if self.field == ScalarField::Complex || rhs.field == ScalarField::Complex {
            ScalarField::Complex
        } else {
            ScalarField::Real
        };
        OperatorMatrix::new(field, &self.data * &rhs.data)
    }

    /// Scalar multiple. A complex scalar promotes a real matrix to complex.
    pub fn scale(&self, c: Complex<f64>) -> OperatorMatrix {
        let field = if c.im != 0.0 {
            ScalarField::Complex
        } else {
            self.field
        };
        OperatorMatrix {
            field,
            data: self.data.map(|z| z * c),
        }
    }

    /// Entrywise difference; shapes must match.
    pub fn sub(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.rows() != rhs.rows() || self.cols() != rhs.cols() {
            return Err(AopError::ShapeMismatch {
                left_rows: self.rows(),
                left_cols: self.cols(),
                right_rows: rhs.rows(),
                right_cols: rhs.cols(),
            });
        }
        let field = if self.field == ScalarField::Complex || rhs.field == ScalarField::Complex {
            ScalarField::Complex
        } else {
            ScalarField::Real
        };
        OperatorMatrix::new(field, &self.data - &rhs.data)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            field: self.field,
            data: self.data.adjoint(),
        }
    }

    /// Largest absolute imaginary part over all entries.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Serializes to the plain-text format (see [`parse_matrix`]).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {}\n",
            self.rows(),
            self.cols(),
            self.field.tag()
        ));
        for row in 0..self.rows() {
            let mut line = String::new();
            for col in 0..self.cols() {
                if col > 0 {
                    line.push(' ');
                }
                let z = self.data[(row, col)];
                match self.field {
                    ScalarField::Real => line.push_str(&format_real(z.re)),
                    ScalarField::Complex => line.push_str(&format_complex(z)),
                }
            }
            line.push('\n');
            out.push_str(&line);
        }
        out
    }
}

impl fmt::Display for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Formats a real scalar so it parses back to the identical `f64`.
///
/// Plain decimal for moderate magnitudes, scientific otherwise (Rust's
/// `Display` never switches to scientific on its own and would print
/// hundreds of digits for extreme exponents).
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        // Keep the sign bit; `-0` parses back to negative zero.
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let a = x.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Formats a complex entry as `a+bi` / `a-bi` with no interior spaces.
pub fn format_complex(z: Complex<f64>) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", format_real(z.re), format_real(-z.im))
    } else {
        format!("{}+{}i", format_real(z.re), format_real(z.im))
    }
}

/// Parses one scalar token: a plain real, or `a+bi` / `a-bi` / `bi` / `i`
/// forms when `field` is complex.
pub fn parse_scalar(token: &str, field: ScalarField) -> std::result::Result<Complex<f64>, String> {
    if token.is_empty() {
        return Err("empty entry".to_string());
    }
    match field {
        ScalarField::Real => {
            let x: f64 = token
                .parse()
                .map_err(|_| format!("invalid real number {token:?}"))?;
            Ok(Complex::new(x, 0.0))
        }
        ScalarField::Complex => parse_complex_token(token),
    }
}

fn parse_complex_token(token: &str) -> std::result::Result<Complex<f64>, String> {
    let bad = || format!("invalid complex number {token:?}");
    if let Some(body) = token.strip_suffix(['i', 'I']) {
        // Split body at the last sign that starts the imaginary part:
        // not at position 0 and not part of an exponent.
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            let c = bytes[idx];
            if c == b'+' || c == b'-' {
                let prev = bytes[idx - 1];
                if prev == b'e' || prev == b'E' {
                    continue;
                }
                split = Some(idx);
                break;
            }
        }
        let (re_str, im_str) = match split {
            Some(idx) => (&body[..idx], &body[idx..]),
            None => ("", body),
        };
        let re: f64 = if re_str.is_empty() {
            0.0
        } else {
            re_str.parse().map_err(|_| bad())?
        };
        let im: f64 = match im_str {
            "" | "+" => 1.0,
            "-" => -1.0,
            s => s.parse().map_err(|_| bad())?,
        };
        Ok(Complex::new(re, im))
    } else {
        let re: f64 = token.parse().map_err(|_| bad())?;
        Ok(Complex::new(re, 0.0))
    }
}

/// Parses the plain-text matrix format.
///
/// First line: `rows cols field` with field `R` or `C`; then `rows` lines
/// of `cols` whitespace-separated entries. Complex entries use the
/// `a+bi` / `a-bi` token forms with no interior spaces.
pub fn parse_matrix(text: &str) -> Result<OperatorMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| AopError::Parse {
        line: 1,
        msg: "empty input".to_string(),
    })?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(AopError::Parse {
            line: 1,
            msg: format!("expected header `rows cols field`, got {header:?}"),
        });
    }
    let rows: usize = parts[0].parse().map_err(|_| AopError::Parse {
        line: 1,
        msg: format!("invalid row count {:?}", parts[0]),
    })?;
    let cols: usize = parts[1].parse().map_err(|_| AopError::Parse {
        line: 1,
        msg: format!("invalid column count {:?}", parts[1]),
    })?;
    let field = match parts[2] {
        "R" => ScalarField::Real,
        "C" => ScalarField::Complex,
        other => {
            return Err(AopError::Parse {
                line: 1,
                msg: format!("field must be R or C, got {other:?}"),
            })
        }
    };
    if rows == 0 || cols == 0 {
        return Err(AopError::Parse {
            line: 1,
            msg: format!("dimensions must be positive, got {rows}x{cols}"),
        });
    }

    let mut entries = Vec::with_capacity(rows * cols);
    let mut filled = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            if filled < rows {
                return Err(AopError::Parse {
                    line: line_no,
                    msg: format!("blank line before all {rows} rows were read"),
                });
            }
            continue;
        }
        if filled >= rows {
            return Err(AopError::Parse {
                line: line_no,
                msg: format!("unexpected extra data after {rows} rows"),
            });
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != cols {
            return Err(AopError::Parse {
                line: line_no,
                msg: format!("expected {cols} entries, found {}", tokens.len()),
            });
        }
        for tok in tokens {
            let z = parse_scalar(tok, field).map_err(|msg| AopError::Parse {
                line: line_no,
                msg,
            })?;
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(AopError::Parse {
                    line: line_no,
                    msg: format!("non-finite entry {tok:?}"),
                });
            }
            entries.push(z);
        }
        filled += 1;
    }
    if filled < rows {
        return Err(AopError::Parse {
            line: text.lines().count().max(1),
            msg: format!("expected {rows} rows, found {filled}"),
        });
    }
    let data = DMatrix::from_row_iterator(rows, cols, entries.into_iter());
    OperatorMatrix::new(field, data)
}
