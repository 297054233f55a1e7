//! Homogeneous polynomials with exact multi-index coefficient tables.
//!
//! Terms are kept in a `BTreeMap` keyed by exponent vectors. Since every key
//! of a homogeneous polynomial has the same total degree, the map order is
//! graded-lex order with `z_0 > z_1 > ... > z_n`, and the last key is the
//! leading monomial.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// Exponent multi-index, one entry per homogeneous variable.
pub type Exponent = Vec<u32>;

#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousPolynomial {
    num_vars: usize,
    degree: u32,
    terms: BTreeMap<Exponent, C>,
}

/// Powers `z_i^k` for `k <= degree`, shared by every monomial evaluated at `z`.
pub(crate) struct PowerTable {
    powers: Vec<Vec<C>>,
}

impl PowerTable {
    pub(crate) fn new(z: &[C], degree: u32) -> Self {
        let powers = z
            .iter()
            .map(|&zi| {
                let mut row = Vec::with_capacity(degree as usize + 1);
                let mut acc = C::new(1.0, 0.0);
                row.push(acc);
                for _ in 0..degree {
                    acc *= zi;
                    row.push(acc);
                }
                row
            })
            .collect();
        PowerTable { powers }
    }

    #[inline]
    pub(crate) fn monomial(&self, exp: &[u32]) -> C {
        let mut v = C::new(1.0, 0.0);
        for (row, &e) in self.powers.iter().zip(exp) {
            if e > 0 {
                v *= row[e as usize];
            }
        }
        v
    }
}

/// All exponent vectors of `num_vars` variables with total degree `degree`,
/// in descending graded-lex order (`z_0^degree` first).
pub fn monomials(num_vars: usize, degree: u32) -> Vec<Exponent> {
    fn rec(prefix: &mut Vec<u32>, left: usize, remaining: u32, out: &mut Vec<Exponent>) {
        if left == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(prefix, left - 1, remaining - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if num_vars == 0 {
        return out;
    }
    rec(&mut Vec::with_capacity(num_vars), num_vars, degree, &mut out);
    out
}

/// Values of the given monomials at `z`.
pub fn monomial_values(exps: &[Exponent], z: &[C]) -> Vec<C> {
    let degree = exps.first().map(|e| e.iter().sum()).unwrap_or(0);
    let table = PowerTable::new(z, degree);
    exps.iter().map(|e| table.monomial(e)).collect()
}

/// Values and first partial derivatives of monomials at `z`.
/// `jac[k][i]` is `d(z^exps[k]) / dz_i`.
pub fn monomial_jacobian(exps: &[Exponent], z: &[C]) -> (Vec<C>, Vec<Vec<C>>) {
    let degree = exps.first().map(|e| e.iter().sum()).unwrap_or(0);
    let table = PowerTable::new(z, degree);
    let mut vals = Vec::with_capacity(exps.len());
    let mut jac = Vec::with_capacity(exps.len());
    let mut scratch = Vec::new();
    for e in exps {
        vals.push(table.monomial(e));
        let mut row = vec![C::new(0.0, 0.0); z.len()];
        for i in 0..z.len() {
            if e[i] == 0 {
                continue;
            }
            scratch.clear();
            scratch.extend_from_slice(e);
            scratch[i] -= 1;
            row[i] = table.monomial(&scratch) * e[i] as f64;
        }
        jac.push(row);
    }
    (vals, jac)
}

fn divides(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

impl HomogeneousPolynomial {
    /// Builds a polynomial from `(exponent, coefficient)` pairs. Repeated
    /// exponents are summed and exact zeros dropped.
    pub fn new<I>(num_vars: usize, degree: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, C)>,
    {
        if num_vars == 0 {
            return Err(Error::InvalidPolynomial("num_vars must be positive".into()));
        }
        let mut map: BTreeMap<Exponent, C> = BTreeMap::new();
        for (exp, c) in terms {
            if exp.len() != num_vars {
                return Err(Error::InvalidPolynomial(format!(
                    "exponent {exp:?} has {} entries, expected {num_vars}",
                    exp.len()
                )));
            }
            let total: u32 = exp.iter().sum();
            if total != degree {
                return Err(Error::InvalidPolynomial(format!(
                    "exponent {exp:?} has total degree {total}, expected {degree}"
                )));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidPolynomial(format!(
                    "non-finite coefficient for {exp:?}"
                )));
            }
            *map.entry(exp).or_insert(C::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| *c != C::new(0.0, 0.0));
        Ok(HomogeneousPolynomial {
            num_vars,
            degree,
            terms: map,
        })
    }

    pub fn from_real_terms(num_vars: usize, degree: u32, terms: &[(&[u32], f64)]) -> Result<Self> {
        Self::new(
            num_vars,
            degree,
            terms.iter().map(|(e, c)| (e.to_vec(), C::new(*c, 0.0))),
        )
    }

    pub fn zero(num_vars: usize, degree: u32) -> Self {
        HomogeneousPolynomial {
            num_vars,
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(exp: Exponent, coeff: C) -> Result<Self> {
        let n = exp.len();
        let d = exp.iter().sum();
        Self::new(n, d, [(exp, coeff)])
    }

    /// Fermat polynomial `sum_i sign_i * z_i^degree`.
    pub fn fermat(signs: &[f64], degree: u32) -> Result<Self> {
        let n = signs.len();
        Self::new(
            n,
            degree,
            signs.iter().enumerate().map(|(i, &s)| {
                let mut e = vec![0; n];
                e[i] = degree;
                (e, C::new(s, 0.0))
            }),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exp: &[u32]) -> C {
        self.terms.get(exp).copied().unwrap_or_default()
    }

    /// True when every coefficient has exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.im == 0.0)
    }

    /// Largest `|Im c| / max|c|` over the coefficient table.
    pub fn imaginary_residual(&self) -> f64 {
        let scale = self.max_abs_coefficient();
        if scale == 0.0 {
            return 0.0;
        }
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max) / scale
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Sum of coefficient moduli; bounds `|p(z)|` on the unit sphere.
    pub fn coefficient_scale(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    pub fn leading_term(&self) -> Option<(&Exponent, &C)> {
        self.terms.iter().next_back()
    }

    pub fn eval(&self, z: &[C]) -> Result<C> {
        if z.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: z.len(),
            });
        }
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: &[C]) -> C {
        let table = PowerTable::new(z, self.degree);
        self.eval_table(&table)
    }

    pub(crate) fn eval_table(&self, table: &PowerTable) -> C {
        self.terms
            .iter()
            .map(|(e, c)| c * table.monomial(e))
            .sum()
    }

    /// `sum |c_a| |z^a|`, the scale against which `|p(z)|` is measured.
    pub fn monomial_norm(&self, z: &[C]) -> f64 {
        let table = PowerTable::new(z, self.degree);
        self.terms
            .iter()
            .map(|(e, c)| c.norm() * table.monomial(e).norm())
            .sum()
    }

    /// Partial derivative with respect to `z_i`.
    pub fn partial(&self, i: usize) -> Self {
        let degree = self.degree.saturating_sub(1);
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                terms.insert(f, c * e[i] as f64);
            }
        }
        HomogeneousPolynomial {
            num_vars: self.num_vars,
            degree,
            terms,
        }
    }

    pub fn conj(&self) -> Self {
        HomogeneousPolynomial {
            num_vars: self.num_vars,
            degree: self.degree,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c.conj())).collect(),
        }
    }

    pub fn scale(&self, s: C) -> Self {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c *= s);
        out.terms.retain(|_, c| *c != C::new(0.0, 0.0));
        out
    }

    /// Adds `s * other` in place.
    pub fn add_scaled(&mut self, other: &Self, s: C) -> Result<()> {
        if other.num_vars != self.num_vars || (other.degree != self.degree && !other.is_zero()) {
            return Err(Error::InvalidPolynomial(format!(
                "cannot add degree {} in {} vars to degree {} in {} vars",
                other.degree, other.num_vars, self.degree, self.num_vars
            )));
        }
        for (e, c) in &other.terms {
            let entry = self.terms.entry(e.clone()).or_default();
            *entry += c * s;
            if *entry == C::new(0.0, 0.0) {
                self.terms.remove(e);
            }
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if other.num_vars != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: other.num_vars,
            });
        }
        let mut terms: BTreeMap<Exponent, C> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Exponent = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *terms.entry(e).or_default() += c1 * c2;
            }
        }
        terms.retain(|_, c| *c != C::new(0.0, 0.0));
        Ok(HomogeneousPolynomial {
            num_vars: self.num_vars,
            degree: self.degree + other.degree,
            terms,
        })
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        let exp = vec![0; self.num_vars];
        let mut acc = HomogeneousPolynomial::new(self.num_vars, 0, [(exp, C::new(1.0, 0.0))])?;
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Normal form modulo the principal ideal `(f)`: no remaining term is
    /// divisible by the leading monomial of `f`. Two polynomials that differ
    /// by a multiple of `f` reduce to the same normal form (up to rounding).
    pub fn reduce_mod(&self, f: &Self) -> Result<Self> {
        if f.num_vars != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: f.num_vars,
            });
        }
        let Some((lead_exp, &lead_coeff)) = f.leading_term() else {
            return Err(Error::InvalidPolynomial("reduction by the zero polynomial".into()));
        };
        if self.degree < f.degree {
            return Ok(self.clone());
        }
        let mut rem = self.clone();
        // Terms are processed from the top of the graded-lex order down; each
        // subtraction only introduces strictly smaller monomials.
        let mut cursor: Option<Exponent> = None;
        loop {
            let next = match &cursor {
                None => rem.terms.iter().next_back(),
                Some(c) => rem.terms.range(..c.clone()).next_back(),
            }
            .map(|(e, c)| (e.clone(), *c));
            let Some((exp, coeff)) = next else { break };
            if divides(lead_exp, &exp) {
                let quot: Exponent = exp.iter().zip(lead_exp).map(|(a, b)| a - b).collect();
                let factor = coeff / lead_coeff;
                for (fe, fc) in &f.terms {
                    let e: Exponent = fe.iter().zip(&quot).map(|(a, b)| a + b).collect();
                    let entry = rem.terms.entry(e).or_default();
                    *entry -= factor * fc;
                }
                // The leading product cancels exactly by construction.
                rem.terms.remove(&exp);
                rem.terms.retain(|_, c| *c != C::new(0.0, 0.0));
            }
            cursor = Some(exp);
        }
        Ok(rem)
    }

    /// Coefficients (ascending powers of `s`) of `p(s * a + b)`.
    pub fn restrict_to_line(&self, a: &[C], b: &[C]) -> Result<Vec<C>> {
        if a.len() != self.num_vars || b.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: a.len().min(b.len()),
            });
        }
        let d = self.degree as usize;
        let mut out = vec![C::new(0.0, 0.0); d + 1];
        // (s a_i + b_i)^k for each variable, as coefficient vectors.
        let factor_powers: Vec<Vec<Vec<C>>> = (0..self.num_vars)
            .map(|i| {
                let mut pows = vec![vec![C::new(1.0, 0.0)]];
                for k in 1..=d {
                    let prev = &pows[k - 1];
                    let mut next = vec![C::new(0.0, 0.0); k + 1];
                    for (j, &c) in prev.iter().enumerate() {
                        next[j] += c * b[i];
                        next[j + 1] += c * a[i];
                    }
                    pows.push(next);
                }
                pows
            })
            .collect();
        for (e, c) in &self.terms {
            let mut acc = vec![*c];
            for (i, &ei) in e.iter().enumerate() {
                if ei == 0 {
                    continue;
                }
                let f = &factor_powers[i][ei as usize];
                let mut next = vec![C::new(0.0, 0.0); acc.len() + f.len() - 1];
                for (j, x) in acc.iter().enumerate() {
                    for (k, y) in f.iter().enumerate() {
                        next[j + k] += x * y;
                    }
                }
                acc = next;
            }
            for (j, v) in acc.into_iter().enumerate() {
                out[j] += v;
            }
        }
        Ok(out)
    }

    /// Serializes to the plain-text polynomial record format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "num_vars {}", self.num_vars);
        let _ = writeln!(s, "degree {}", self.degree);
        for (e, c) in self.terms.iter().rev() {
            let exps: Vec<String> = e.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "term {} {:?} {:?}", exps.join(" "), c.re, c.im);
        }
        s
    }

    /// Parses one polynomial record.
    pub fn parse(text: &str) -> Result<Self> {
        let mut all = Self::parse_many(text)?;
        match all.len() {
            1 => Ok(all.pop().unwrap()),
            n => Err(Error::Parse {
                line: 0,
                msg: format!("expected one polynomial record, found {n}"),
            }),
        }
    }

    /// Parses a sequence of records. Each record starts with `num_vars`;
    /// `#` starts a comment and blank lines are ignored.
    pub fn parse_many(text: &str) -> Result<Vec<Self>> {
        struct Pending {
            num_vars: usize,
            degree: Option<u32>,
            terms: Vec<(Exponent, C)>,
            line: usize,
        }
        fn finish(p: Pending) -> Result<HomogeneousPolynomial> {
            let degree = p.degree.ok_or(Error::Parse {
                line: p.line,
                msg: "record has no degree line".into(),
            })?;
            HomogeneousPolynomial::new(p.num_vars, degree, p.terms).map_err(|e| Error::Parse {
                line: p.line,
                msg: e.to_string(),
            })
        }
        let perr = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };

        let mut out = Vec::new();
        let mut cur: Option<Pending> = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap();
            let rest: Vec<&str> = toks.collect();
            match key {
                "num_vars" => {
                    if let Some(p) = cur.take() {
                        out.push(finish(p)?);
                    }
                    let n: usize = rest
                        .first()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| perr(lineno, "bad num_vars"))?;
                    cur = Some(Pending {
                        num_vars: n,
                        degree: None,
                        terms: Vec::new(),
                        line: lineno,
                    });
                }
                "degree" => {
                    let p = cur.as_mut().ok_or_else(|| perr(lineno, "degree before num_vars"))?;
                    p.degree = Some(
                        rest.first()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| perr(lineno, "bad degree"))?,
                    );
                }
                "term" => {
                    let p = cur.as_mut().ok_or_else(|| perr(lineno, "term before num_vars"))?;
                    if rest.len() != p.num_vars + 2 {
                        return Err(perr(
                            lineno,
                            &format!("term needs {} exponents and re/im parts", p.num_vars),
                        ));
                    }
                    let exp = rest[..p.num_vars]
                        .iter()
                        .map(|t| t.parse::<u32>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| perr(lineno, "bad exponent"))?;
                    let re: f64 = rest[p.num_vars]
                        .parse()
                        .map_err(|_| perr(lineno, "bad real part"))?;
                    let im: f64 = rest[p.num_vars + 1]
                        .parse()
                        .map_err(|_| perr(lineno, "bad imaginary part"))?;
                    p.terms.push((exp, C::new(re, im)));
                }
                other => return Err(perr(lineno, &format!("unknown key `{other}`"))),
            }
        }
        if let Some(p) = cur.take() {
            out.push(finish(p)?);
        }
        Ok(out)
    }
}

impl fmt::Display for HomogeneousPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*z{i}")?,
                    _ => write!(f, "*z{i}^{k}")?,
                }
            }
        }
        Ok(())
    }
}
