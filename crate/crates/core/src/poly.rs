//! Pure-power polynomials and their coefficient tensors.
//!
//! A polynomial whose degree in each variable `x_k` is at most `ñ_k` has one
//! coefficient per monomial `∏ x_k^{e_k}` with `0 <= e_k <= ñ_k`. Storing the
//! coefficient of that monomial at multi-index `(e_1, ..., e_d)` gives a
//! bijection with tensors of shape `(ñ_1+1) × ... × (ñ_d+1)`, and evaluation
//! becomes a contraction with Vandermonde vectors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::dense::{outer_product, vandermonde, DenseTensor};
use crate::error::{Error, Result};

/// Per-variable maximal degrees `(ñ_1, ..., ñ_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DegreeVector(Vec<usize>);

impl DegreeVector {
    pub fn new(degrees: Vec<usize>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::Empty("degree vector"));
        }
        Ok(Self(degrees))
    }

    pub fn uniform(degree: usize, d: usize) -> Result<Self> {
        Self::new(vec![degree; d])
    }

    pub fn degrees(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mode sizes `n_k = ñ_k + 1`.
    pub fn dims(&self) -> Vec<usize> {
        self.0.iter().map(|&n| n + 1).collect()
    }

    /// Vandermonde vectors `v(x_1), ..., v(x_d)`.
    pub fn vandermonde_vectors(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.0.len() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, degree vector has {}",
                x.len(),
                self.0.len()
            )));
        }
        Ok(x.iter()
            .zip(&self.0)
            .map(|(&xk, &deg)| vandermonde(xk, deg))
            .collect())
    }
}

/// A polynomial given as a list of monomials with real coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsePolynomial {
    terms: Vec<(Vec<usize>, f64)>,
}

impl SparsePolynomial {
    pub fn new(terms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let mut seen = BTreeMap::new();
        let d = terms.first().map_or(0, |t| t.0.len());
        for (exps, _) in &terms {
            if exps.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "monomial {exps:?} has {} variables, expected {d}",
                    exps.len()
                )));
            }
            if seen.insert(exps.clone(), ()).is_some() {
                return Err(Error::DuplicateMonomial(exps.clone()));
            }
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[(Vec<usize>, f64)] {
        &self.terms
    }

    /// Number of variables, or `None` for the empty (zero) polynomial.
    pub fn num_vars(&self) -> Option<usize> {
        self.terms.first().map(|t| t.0.len())
    }

    /// Smallest degree vector that contains every term.
    pub fn min_degree(&self) -> Option<DegreeVector> {
        let d = self.num_vars()?;
        let mut deg = vec![0; d];
        for (exps, _) in &self.terms {
            for (m, &e) in deg.iter_mut().zip(exps) {
                *m = (*m).max(e);
            }
        }
        DegreeVector::new(deg).ok()
    }

    /// Term-by-term evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for (exps, c) in &self.terms {
            if exps.len() != x.len() {
                return Err(Error::DimensionMismatch(format!(
                    "point has {} coordinates, polynomial has {}",
                    x.len(),
                    exps.len()
                )));
            }
            sum += c * exps
                .iter()
                .zip(x)
                .map(|(&e, &xk)| xk.powi(e as i32))
                .product::<f64>();
        }
        Ok(sum)
    }
}

/// The rank-1 tensor `v(x_1) ∘ ... ∘ v(x_d)` of all monomials evaluated at `x`.
pub fn feature_map(x: &[f64], degree: &DegreeVector) -> Result<DenseTensor> {
    outer_product(&degree.vandermonde_vectors(x)?)
}

/// The coefficient tensor of a pure-power polynomial.
pub fn poly_to_tensor(f: &SparsePolynomial, degree: &DegreeVector) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros(&degree.dims())?;
    for (exps, c) in f.terms() {
        if exps.len() != degree.len() {
            return Err(Error::DimensionMismatch(format!(
                "monomial {exps:?} for a degree vector of length {}",
                degree.len()
            )));
        }
        for (var, (&e, &deg)) in exps.iter().zip(degree.degrees()).enumerate() {
            if e > deg {
                return Err(Error::DegreeExceeded {
                    var: var + 1,
                    exponent: e,
                    degree: deg,
                });
            }
        }
        t.set(exps, *c)?;
    }
    Ok(t)
}

/// Evaluates the polynomial with coefficient tensor `a` at `x`.
pub fn poly_eval_dense(a: &DenseTensor, x: &[f64]) -> Result<f64> {
    if x.len() != a.order() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, tensor has order {}",
            x.len(),
            a.order()
        )));
    }
    let vs: Vec<Vec<f64>> = x
        .iter()
        .zip(a.dims())
        .map(|(&xk, &n)| vandermonde(xk, n - 1))
        .collect();
    a.contract_all(&vs)
}

impl fmt::Display for SparsePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (t, (exps, c)) in self.terms.iter().enumerate() {
            if t > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{c:?}")?;
            let mut first = true;
            for (k, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                write!(f, "{}x{}", if first { " * " } else { " " }, k + 1)?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
                first = false;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var(usize),
    Star,
    Caret,
    Plus,
    Minus,
    Semi,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            ';' => {
                out.push(Token::Semi);
                i += 1;
            }
            'x' | 'X' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let idx: usize = chars[start..j]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| Error::PolySyntax(format!("expected variable index after 'x' at {i}")))?;
                if idx == 0 {
                    return Err(Error::PolySyntax("variables are numbered from x1".into()));
                }
                out.push(Token::Var(idx));
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                // scientific notation: 1e-3, 2.5E+4
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = chars[start..j].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::PolySyntax(format!("bad number '{text}'")))?;
                out.push(Token::Num(v));
                i = j;
            }
            other => {
                return Err(Error::PolySyntax(format!("unexpected character '{other}'")));
            }
        }
    }
    Ok(out)
}

impl FromStr for SparsePolynomial {
    type Err = Error;

    /// Parses terms such as `"4*x1 + 1*x1^3 - 2*x1 x2 x3"` or
    /// `"4 * x1; -2 * x1 x2 x3"`. The number of variables is the largest
    /// index that appears.
    fn from_str(s: &str) -> Result<Self> {
        let tokens = tokenize(s)?;
        if tokens.is_empty() {
            return Err(Error::PolySyntax("empty polynomial".into()));
        }
        // (coefficient, var -> exponent)
        let mut raw: Vec<(f64, BTreeMap<usize, usize>)> = Vec::new();
        let mut pos = 0;
        let mut sign = 1.0;
        let mut expect_term = true;
        while pos < tokens.len() {
            match tokens[pos] {
                Token::Plus if expect_term => pos += 1,
                Token::Minus if expect_term => {
                    sign = -sign;
                    pos += 1;
                }
                Token::Plus | Token::Semi if !expect_term => {
                    expect_term = true;
                    sign = 1.0;
                    pos += 1;
                }
                Token::Minus if !expect_term => {
                    expect_term = true;
                    sign = -1.0;
                    pos += 1;
                }
                _ if expect_term => {
                    let (term, next) = parse_term(&tokens, pos)?;
                    raw.push((sign * term.0, term.1));
                    pos = next;
                    expect_term = false;
                }
                ref t => {
                    return Err(Error::PolySyntax(format!("unexpected token {t:?}")));
                }
            }
        }
        if expect_term {
            return Err(Error::PolySyntax("polynomial ends with an operator".into()));
        }
        let d = raw
            .iter()
            .flat_map(|(_, m)| m.keys().copied())
            .max()
            .unwrap_or(1);
        let terms = raw
            .into_iter()
            .map(|(c, m)| {
                let mut exps = vec![0; d];
                for (var, e) in m {
                    exps[var - 1] = e;
                }
                (exps, c)
            })
            .collect();
        Self::new(terms)
    }
}

type RawTerm = (f64, BTreeMap<usize, usize>);

fn parse_term(tokens: &[Token], mut pos: usize) -> Result<(RawTerm, usize)> {
    let mut coef = 1.0;
    let mut vars = BTreeMap::new();
    let mut any = false;
    if let Some(Token::Num(c)) = tokens.get(pos) {
        coef = *c;
        pos += 1;
        any = true;
        if let Some(Token::Star) = tokens.get(pos) {
            pos += 1;
            if !matches!(tokens.get(pos), Some(Token::Var(_))) {
                return Err(Error::PolySyntax("expected a variable after '*'".into()));
            }
        }
    }
    while let Some(Token::Var(v)) = tokens.get(pos) {
        let v = *v;
        pos += 1;
        let mut e = 1;
        if let Some(Token::Caret) = tokens.get(pos) {
            pos += 1;
            match tokens.get(pos) {
                Some(Token::Num(x)) if x.fract() == 0.0 && *x >= 0.0 => {
                    e = *x as usize;
                    pos += 1;
                }
                _ => return Err(Error::PolySyntax("exponent must be a nonnegative integer".into())),
            }
        }
        *vars.entry(v).or_insert(0) += e;
        any = true;
        if let Some(Token::Star) = tokens.get(pos) {
            if matches!(tokens.get(pos + 1), Some(Token::Var(_))) {
                pos += 1;
            }
        }
    }
    if !any {
        return Err(Error::PolySyntax(format!(
            "expected a coefficient or variable, found {:?}",
            tokens.get(pos)
        )));
    }
    Ok(((coef, vars), pos))
}
