//! Exact bookkeeping of bound exponents `c·|J|^a·N^{b±ε}` with `a`, `b`
//! affine in the regularity `s`.
//!
//! Constants are dropped; the infinitesimal losses `N^{b+}`/`N^{b−}` are kept
//! as a signed rational multiple of a single `ε`, compared after the finite
//! part.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Q = Ratio<i64>;

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

/// `constant + slope·s + eps·ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AffineExp {
    pub constant: Q,
    pub slope: Q,
    pub eps: Q,
}

/// A value at fixed `s`: finite part and `ε` count, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpsValue {
    pub value: Q,
    pub eps: Q,
}

impl Ord for EpsValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.cmp(&other.value).then(self.eps.cmp(&other.eps))
    }
}

impl PartialOrd for EpsValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EpsValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)?;
        write_eps(f, self.eps, false)
    }
}

impl AffineExp {
    pub const ZERO: AffineExp = AffineExp {
        constant: Ratio::new_raw(0, 1),
        slope: Ratio::new_raw(0, 1),
        eps: Ratio::new_raw(0, 1),
    };

    pub fn new(constant: Q, slope: Q) -> Self {
        AffineExp {
            constant,
            slope,
            eps: Q::zero(),
        }
    }

    pub fn constant(c: Q) -> Self {
        AffineExp::new(c, Q::zero())
    }

    /// The exponent `s`.
    pub fn s() -> Self {
        AffineExp::new(Q::zero(), Q::one())
    }

    /// `c·(1 − s)`.
    pub fn one_minus_s(c: Q) -> Self {
        AffineExp::new(c, -c)
    }

    pub fn with_eps(mut self, eps: Q) -> Self {
        self.eps = eps;
        self
    }

    pub fn plus_eps(self, units: i64) -> Self {
        let eps = self.eps + Q::from_integer(units);
        self.with_eps(eps)
    }

    pub fn at(&self, s: Q) -> EpsValue {
        EpsValue {
            value: self.constant + self.slope * s,
            eps: self.eps,
        }
    }

    pub fn scale(&self, c: Q) -> AffineExp {
        AffineExp {
            constant: self.constant * c,
            slope: self.slope * c,
            eps: self.eps * c,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == AffineExp::ZERO
    }

    /// Compares the values at `s`: finite part first, then `ε` count.
    pub fn cmp_at(&self, other: &AffineExp, s: Q) -> Ordering {
        self.at(s).cmp(&other.at(s))
    }
}

impl Add for AffineExp {
    type Output = AffineExp;
    fn add(self, o: AffineExp) -> AffineExp {
        AffineExp {
            constant: self.constant + o.constant,
            slope: self.slope + o.slope,
            eps: self.eps + o.eps,
        }
    }
}

impl Sub for AffineExp {
    type Output = AffineExp;
    fn sub(self, o: AffineExp) -> AffineExp {
        self + (-o)
    }
}

impl Neg for AffineExp {
    type Output = AffineExp;
    fn neg(self) -> AffineExp {
        self.scale(-Q::one())
    }
}

impl Mul<Q> for AffineExp {
    type Output = AffineExp;
    fn mul(self, c: Q) -> AffineExp {
        self.scale(c)
    }
}

fn rational_gcd(a: Q, b: Q) -> Q {
    let a = a.abs();
    let b = b.abs();
    Q::new(
        a.numer().gcd(b.numer()),
        a.denom().lcm(b.denom()),
    )
}

fn write_coeff_s(f: &mut fmt::Formatter<'_>, c: Q) -> fmt::Result {
    if c == Q::one() {
        write!(f, "s")
    } else if c.is_integer() {
        write!(f, "{}s", c.numer())
    } else {
        write!(f, "({c})s")
    }
}

fn write_eps(f: &mut fmt::Formatter<'_>, eps: Q, leading: bool) -> fmt::Result {
    if eps.is_zero() {
        return Ok(());
    }
    let sign = if eps.is_negative() { "-" } else if leading { "" } else { "+" };
    let mag = eps.abs();
    if mag == Q::one() {
        write!(f, "{sign}ε")
    } else if mag.is_integer() {
        write!(f, "{sign}{}ε", mag.numer())
    } else {
        write!(f, "{sign}({mag})ε")
    }
}

impl fmt::Display for AffineExp {
    /// Factored form, e.g. `(3/7)(8s-5)`, `2s-1-ε`, `(1/4)(12-17s)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, k) = (self.constant, self.slope);
        if k.is_zero() {
            if p.is_zero() && !self.eps.is_zero() {
                return write_eps(f, self.eps, true);
            }
            write!(f, "{p}")?;
        } else if p.is_zero() {
            if k == -Q::one() {
                write!(f, "-s")?;
            } else if k.is_negative() {
                write!(f, "-")?;
                write_coeff_s(f, -k)?;
            } else {
                write_coeff_s(f, k)?;
            }
        } else {
            let g = rational_gcd(p, k);
            let (a, b) = ((k / g).to_integer(), (p / g).to_integer());
            let prefix = if g == Q::one() {
                String::new()
            } else if g.is_integer() {
                g.to_string()
            } else {
                format!("({g})")
            };
            let inner = if a > 0 {
                let s_part = if a == 1 { "s".to_string() } else { format!("{a}s") };
                if b < 0 {
                    format!("{s_part}-{}", -b)
                } else {
                    format!("{s_part}+{b}")
                }
            } else {
                let s_part = if a == -1 { "s".to_string() } else { format!("{}s", -a) };
                format!("{b}-{s_part}")
            };
            if prefix.is_empty() {
                write!(f, "{inner}")?;
            } else {
                write!(f, "{prefix}({inner})")?;
            }
        }
        write_eps(f, self.eps, false)
    }
}

fn parse_rational(text: &str) -> Result<Q> {
    let bad = || Error::config(format!("not a rational number: {text:?}"));
    let t = text.trim();
    let t = t.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(t);
    match t.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(t.parse().map_err(|_| bad())?)),
    }
}

/// Splits `c(body)tail` or `(c)(body)tail` into its three parts.
fn split_factored(text: &str) -> Option<(&str, &str, &str)> {
    let factor_end = if let Some(rest) = text.strip_prefix('(') {
        let close = rest.find(')')? + 1;
        text[1..close].chars().all(|c| c.is_ascii_digit() || c == '/' || c == '-').then_some(close + 1)?
    } else {
        let n = text.find(|c: char| !(c.is_ascii_digit() || c == '/'))?;
        (n > 0).then_some(n)?
    };
    let rest = text[factor_end..].strip_prefix('(')?;
    let close = rest.find(')')?;
    Some((&text[..factor_end], &rest[..close], &rest[close + 1..]))
}

/// Parses a signed sum of terms `c`, `cs`, `cε` (`eps` also accepted), with
/// coefficients written as integers or fractions, optionally prefixed by a
/// rational factor `(c)(…)`.
impl FromStr for AffineExp {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let compact: String = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .replace('−', "-")
            .replace("eps", "ε");
        if compact.is_empty() {
            return Err(Error::config("empty exponent"));
        }
        if let Some((factor, body, tail)) = split_factored(&compact) {
            let factor = parse_rational(factor)?;
            let body: AffineExp = body.parse()?;
            let tail = if tail.is_empty() {
                AffineExp::ZERO
            } else {
                tail.parse()?
            };
            return Ok(body.scale(factor) + tail);
        }
        let mut out = AffineExp::ZERO;
        let mut terms = Vec::new();
        let mut current = String::new();
        let mut depth = 0;
        for ch in compact.chars() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                '+' | '-' if depth == 0 && !current.is_empty() => {
                    terms.push(std::mem::take(&mut current));
                }
                _ => {}
            }
            current.push(ch);
        }
        terms.push(current);
        for term in terms {
            let (sign, body) = match term.strip_prefix('-') {
                Some(b) => (-Q::one(), b),
                None => (Q::one(), term.strip_prefix('+').unwrap_or(&term)),
            };
            let coeff = |c: &str| -> Result<Q> {
                if c.is_empty() {
                    Ok(Q::one())
                } else {
                    parse_rational(c)
                }
            };
            if let Some(c) = body.strip_suffix('s') {
                out.slope += sign * coeff(c)?;
            } else if let Some(c) = body.strip_suffix('ε') {
                out.eps += sign * coeff(c)?;
            } else {
                out.constant += sign * parse_rational(body)?;
            }
        }
        Ok(out)
    }
}

/// `|J|^a N^b` with a name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentTerm {
    pub label: String,
    pub a: AffineExp,
    pub b: AffineExp,
}

impl ExponentTerm {
    pub fn new(label: &str, a: AffineExp, b: AffineExp) -> Self {
        ExponentTerm {
            label: label.to_string(),
            a,
            b,
        }
    }

    /// The `N`-exponent once `|J| = N^j`: `a·j + b`. Requires `a` free of `s`
    /// and `ε` whenever `j` depends on them, which holds for every term here.
    pub fn substitute(&self, j: &AffineExp) -> Result<AffineExp> {
        let a = constant_part(&self.a)?;
        Ok(j.scale(a) + self.b)
    }
}

fn constant_part(a: &AffineExp) -> Result<Q> {
    if !a.slope.is_zero() || !a.eps.is_zero() {
        return Err(Error::Structural(format!(
            "|J| exponent {a} depends on s; only constant powers are supported"
        )));
    }
    Ok(a.constant)
}

impl fmt::Display for ExponentTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.label)?;
        if self.a.is_zero() {
            write!(f, "N^({})", self.b)
        } else {
            write!(f, "|J|^({}) N^({})", self.a, self.b)
        }
    }
}

/// Maximum of a nonempty set of terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundExpr {
    terms: Vec<ExponentTerm>,
}

impl BoundExpr {
    pub fn new(terms: Vec<ExponentTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Structural("a bound needs at least one term".into()));
        }
        Ok(BoundExpr { terms })
    }

    pub fn terms(&self) -> &[ExponentTerm] {
        &self.terms
    }

    pub fn term(&self, label: &str) -> Option<&ExponentTerm> {
        self.terms.iter().find(|t| t.label == label)
    }

    pub fn with_term(mut self, term: ExponentTerm) -> Self {
        self.terms.push(term);
        self
    }

    /// Largest `N`-exponent at `s` when `|J| = N^j`.
    pub fn exponent_at(&self, s: Q, j: &AffineExp) -> Result<EpsValue> {
        let mut best: Option<EpsValue> = None;
        for t in &self.terms {
            let v = t.substitute(j)?.at(s);
            best = Some(best.map_or(v, |b| b.max(v)));
        }
        Ok(best.expect("nonempty"))
    }
}

/// `N^{4(1−s)}(|J|^{3/4} N^{−5/4+} + |J|^{1/2} N^{−3/2+})`: the variation of
/// the mollified energy over one window.
pub fn make_variation_bound() -> BoundExpr {
    let four = AffineExp::one_minus_s(Q::from_integer(4));
    BoundExpr::new(vec![
        ExponentTerm::new(
            "var1",
            AffineExp::constant(q(3, 4)),
            (four + AffineExp::constant(q(-5, 4))).plus_eps(1),
        ),
        ExponentTerm::new(
            "var2",
            AffineExp::constant(q(1, 2)),
            (four + AffineExp::constant(q(-3, 2))).plus_eps(1),
        ),
    ])
    .expect("nonempty")
}

fn alpha1() -> ExponentTerm {
    ExponentTerm::new(
        "α1",
        AffineExp::constant(Q::one()),
        (AffineExp::one_minus_s(Q::from_integer(2)) + AffineExp::constant(-Q::one())).plus_eps(1),
    )
}

fn alpha2() -> ExponentTerm {
    ExponentTerm::new(
        "α2",
        AffineExp::constant(q(1, 2)),
        AffineExp::one_minus_s(Q::from_integer(2)) + AffineExp::constant(q(-3, 2)),
    )
}

fn alpha3() -> ExponentTerm {
    ExponentTerm::new(
        "α3",
        AffineExp::constant(q(7, 12)),
        AffineExp::one_minus_s(q(3, 2)) + AffineExp::constant(q(-3, 4)),
    )
}

/// `α₄` with `⟨|J|N^{1−s}⟩^{1/8}` expanded as `|J|^{1/8} N^{(1−s)/8}`.
fn alpha4() -> ExponentTerm {
    ExponentTerm::new(
        "α4",
        AffineExp::constant(q(1, 2) + q(1, 8)),
        AffineExp::one_minus_s(Q::from_integer(2) + q(1, 8)) + AffineExp::constant(q(-3, 2)),
    )
}

/// The four smallness quantities bounding the nonlinear part on a window,
/// under the regime `|J| N^{1−s} ≥ 1`.
pub fn make_alpha_terms() -> BoundExpr {
    BoundExpr::new(vec![alpha1(), alpha2(), alpha3(), alpha4()]).expect("nonempty")
}

/// `|J| N^{1−s}`.
fn alpha_bar1() -> ExponentTerm {
    ExponentTerm::new(
        "ᾱ1",
        AffineExp::constant(Q::one()),
        AffineExp::one_minus_s(Q::one()),
    )
}

/// `|J|^{11/12} N^{(5/3)(1−s)} / N^{3/4}`.
fn alpha_bar_bar1() -> ExponentTerm {
    ExponentTerm::new(
        "ᾱ̄1",
        AffineExp::constant(q(11, 12)),
        AffineExp::one_minus_s(q(5, 3)) + AffineExp::constant(q(-3, 4)),
    )
}

/// `|J|^{7/12} N^{2(1−s)} / N^{3/4−}`.
fn alpha_bar3() -> ExponentTerm {
    ExponentTerm::new(
        "ᾱ3",
        AffineExp::constant(q(7, 12)),
        (AffineExp::one_minus_s(Q::from_integer(2)) + AffineExp::constant(q(-3, 4))).plus_eps(1),
    )
}

/// Substitutes `|J| = N^j` and multiplies by the `N^{−j}` windows needed to
/// cover a unit interval.
pub fn iterate_total(bound: &BoundExpr, j: &AffineExp) -> Result<BoundExpr> {
    let terms = bound
        .terms
        .iter()
        .map(|t| {
            Ok(ExponentTerm::new(
                &t.label,
                AffineExp::ZERO,
                t.substitute(j)? - *j,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    BoundExpr::new(terms)
}

/// The `j` with `a·j + b = 0`.
pub fn invert_to_unit(term: &ExponentTerm) -> Result<AffineExp> {
    let a = constant_part(&term.a)?;
    if a.is_zero() {
        return Err(Error::domain(format!(
            "term {} does not involve |J| and cannot be inverted",
            term.label
        )));
    }
    Ok(term.b.scale(-a.recip()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureThreshold {
    pub s0: Q,
    /// Whether `s = s₀` itself closes (only the `ε` parts decide this).
    pub inclusive: bool,
    /// Set when some term coincides with the target identically.
    pub degenerate: bool,
    /// Terms whose root equals `s₀`.
    pub binding: Vec<String>,
}

/// Least `s₀ ≥ 0` such that every term's `N`-exponent is at most `target`
/// for all `s > s₀`.
pub fn closure_threshold(total: &BoundExpr, target: &AffineExp) -> Result<ClosureThreshold> {
    let mut s0 = Q::zero();
    let mut binding: Vec<(String, Q)> = Vec::new();
    let mut degenerate = false;
    for t in &total.terms {
        let a = constant_part(&t.a)?;
        if !a.is_zero() {
            return Err(Error::Structural(format!(
                "term {} still depends on |J|; iterate it first",
                t.label
            )));
        }
        let margin = t.b - *target;
        if margin.slope.is_zero() {
            match margin.constant.cmp(&Q::zero()) {
                Ordering::Less => continue,
                Ordering::Equal if margin.eps <= Q::zero() => {
                    degenerate = true;
                    continue;
                }
                _ => {
                    return Err(Error::Structural(format!(
                        "term {} exceeds the target for every s",
                        t.label
                    )))
                }
            }
        }
        if margin.slope.is_positive() {
            return Err(Error::Structural(format!(
                "margin of term {} ({margin}) is not decreasing in s",
                t.label
            )));
        }
        let root = -margin.constant / margin.slope;
        binding.push((t.label.clone(), root));
        if root > s0 {
            s0 = root;
        }
    }
    let names: Vec<String> = binding
        .iter()
        .filter(|(_, r)| *r == s0)
        .map(|(l, _)| l.clone())
        .collect();
    let inclusive = names.iter().all(|l| {
        let t = total.term(l).expect("label from the same bound");
        (t.b - *target).eps <= Q::zero()
    });
    Ok(ClosureThreshold {
        s0,
        inclusive,
        degenerate: degenerate && names.is_empty(),
        binding: names,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowEntry {
    pub label: String,
    pub j: AffineExp,
    pub value: EpsValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowReport {
    pub s: Q,
    pub entries: Vec<WindowEntry>,
    /// Label of the smallest inverted exponent at `s`.
    pub min_label: String,
    pub expected_label: String,
    /// The smallest exponent is not attained by the expected term.
    pub discrepancy: bool,
}

impl WindowReport {
    pub fn min(&self) -> &WindowEntry {
        self.entries
            .iter()
            .find(|e| e.label == self.min_label)
            .expect("min label present")
    }
}

impl fmt::Display for WindowReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "s = {}", self.s)?;
        for e in &self.entries {
            writeln!(f, "  {}: j = {} = {}", e.label, e.j, e.value)?;
        }
        let m = self.min();
        write!(f, "window exponent j = {} (attained by {})", m.j, m.label)?;
        if self.discrepancy {
            write!(
                f,
                "\ndiscrepancy: expected {} to attain the minimum",
                self.expected_label
            )?;
        }
        Ok(())
    }
}

/// Inverts every term at `s` and reports the smallest exponent. Ties in the
/// finite part go to the smaller `ε` count; exact ties keep the expected term.
pub fn window_size(bound: &BoundExpr, s: Q, expected: &str) -> Result<(AffineExp, WindowReport)> {
    let mut entries = Vec::new();
    for t in &bound.terms {
        let j = invert_to_unit(t)?;
        entries.push(WindowEntry {
            label: t.label.clone(),
            j,
            value: j.at(s),
        });
    }
    let best = entries.iter().map(|e| e.value).min().expect("nonempty");
    let min_entry = entries
        .iter()
        .filter(|e| e.value == best)
        .find(|e| e.label == expected)
        .or_else(|| entries.iter().find(|e| e.value == best))
        .expect("minimum attained");
    let report = WindowReport {
        s,
        min_label: min_entry.label.clone(),
        expected_label: expected.to_string(),
        discrepancy: min_entry.label != expected,
        entries: entries.clone(),
    };
    Ok((min_entry.j, report))
}

/// Closure computations reproduced by the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Windows `|J| ∼ N^{s−1}` with the variation bound: `s > 4/9`.
    Gwp49,
    /// Windows `|J| ∼ α₁⁻¹(1)`: `s > 2/5`.
    Gwp25,
    /// The family whose smallest window is `N^{s−1}`.
    RemarkSMinus1,
    /// The family whose smallest window is `N^{(3/7)(8s−5)}`.
    Remark8sMinus5,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::Gwp49,
        Stage::Gwp25,
        Stage::RemarkSMinus1,
        Stage::Remark8sMinus5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gwp49 => "gwp_4_9",
            Stage::Gwp25 => "gwp_2_5",
            Stage::RemarkSMinus1 => "remark_s_minus_1",
            Stage::Remark8sMinus5 => "remark_8s_minus_5",
        }
    }

    /// Window family and the term expected to give the smallest window.
    pub fn window_family(self) -> (BoundExpr, &'static str) {
        let build = |terms| BoundExpr::new(terms).expect("nonempty");
        match self {
            Stage::Gwp49 => (
                build(vec![ExponentTerm::new(
                    "window",
                    AffineExp::constant(Q::one()),
                    AffineExp::one_minus_s(Q::one()),
                )]),
                "window",
            ),
            Stage::Gwp25 => (make_alpha_terms(), "α1"),
            Stage::RemarkSMinus1 => (
                build(vec![alpha_bar1(), alpha_bar_bar1(), alpha2(), alpha3(), alpha4()]),
                "ᾱ1",
            ),
            Stage::Remark8sMinus5 => (build(vec![alpha1(), alpha2(), alpha_bar3(), alpha4()]), "ᾱ3"),
        }
    }

    /// Window exponent used downstream: the inversion of the expected term.
    pub fn window_exponent(self) -> AffineExp {
        let (family, expected) = self.window_family();
        invert_to_unit(family.term(expected).expect("expected term in family"))
            .expect("expected term is invertible")
    }

    pub fn target() -> AffineExp {
        AffineExp::one_minus_s(Q::from_integer(2))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Stage::ALL.iter().map(|s| s.name()).collect();
                Error::config(format!("unknown stage {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

pub fn stage_threshold(stage: Stage) -> Result<ClosureThreshold> {
    let total = iterate_total(&make_variation_bound(), &stage.window_exponent())?;
    closure_threshold(&total, &Stage::target())
}

pub fn stage_window(stage: Stage, s: Q) -> Result<(AffineExp, WindowReport)> {
    let (family, expected) = stage.window_family();
    window_size(&family, s, expected)
}

/// Human-readable derivation: window terms, inversion, iteration, threshold.
pub fn derivation_trace(stage: Stage) -> Result<String> {
    use std::fmt::Write;
    let mut out = String::new();
    let (family, expected) = stage.window_family();
    let target = Stage::target();
    writeln!(out, "stage {stage}").unwrap();
    writeln!(out, "regime: |J| N^(1-s) >= 1, brackets <x>^(1/8) expanded as x^(1/8)").unwrap();
    writeln!(out, "window terms:").unwrap();
    for t in family.terms() {
        writeln!(out, "  {t}").unwrap();
    }
    writeln!(out, "inversions |J| = N^j:").unwrap();
    for t in family.terms() {
        writeln!(out, "  {}: j = {}", t.label, invert_to_unit(t)?).unwrap();
    }
    let j = stage.window_exponent();
    writeln!(out, "window: j = {j} (from {expected})").unwrap();
    let bound = make_variation_bound();
    writeln!(out, "variation per window:").unwrap();
    for t in bound.terms() {
        writeln!(out, "  {t}").unwrap();
    }
    let total = iterate_total(&bound, &j)?;
    writeln!(out, "after N^(-j) windows:").unwrap();
    for t in total.terms() {
        writeln!(out, "  {t}").unwrap();
    }
    writeln!(out, "target: N^({target})").unwrap();
    writeln!(out, "margins against the target:").unwrap();
    for t in total.terms() {
        let margin = t.b - target;
        let root = -margin.constant / margin.slope;
        writeln!(out, "  {}: {} <= 0 for s > {}", t.label, margin, root).unwrap();
    }
    let threshold = closure_threshold(&total, &target)?;
    write!(out, "s₀ = {}", threshold.s0).unwrap();
    Ok(out)
}
