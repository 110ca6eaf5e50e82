//! The scenario expression grammar: finite sums of terms
//! `coef · t^a · s^b · waves · bumps · dx_J`, where a wave is
//! `cos/sin/exp(2π k·x)` for an integer wave vector `k` and a bump is a smooth
//! radial cutoff. Parameter derivatives are exact; spatial gradients are
//! available for 0-forms.
//!
//! ```text
//! expr   := ["-"] term (("+" | "-") term)*      |  "0"
//! term   := factor (["*"] factor)*
//! factor := NUMBER ["i"] | "i" | "pi" | "(" NUMBER "," NUMBER ")"
//!         | ("t" | "s") ["^" INT]
//!         | ("cos" | "sin" | "exp") "[" INT ("," INT)* "]"
//!         | "bump" "[" NUMBER ("," NUMBER)* ";" NUMBER "]"
//!         | "dx" DIGITS
//! ```

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

const TAU: f64 = 2.0 * PI;

#[derive(Clone, Debug, PartialEq)]
pub enum Wave {
    Cos(Vec<i64>),
    Sin(Vec<i64>),
    Exp(Vec<i64>),
}

impl Wave {
    pub fn wave_vector(&self) -> &[i64] {
        match self {
            Wave::Cos(k) | Wave::Sin(k) | Wave::Exp(k) => k,
        }
    }

    fn phase(&self, x: &[f64]) -> f64 {
        TAU * self.wave_vector().iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>()
    }

    fn value(&self, x: &[f64]) -> Complex64 {
        let ph = self.phase(x);
        match self {
            Wave::Cos(_) => Complex64::new(ph.cos(), 0.0),
            Wave::Sin(_) => Complex64::new(ph.sin(), 0.0),
            Wave::Exp(_) => Complex64::new(ph.cos(), ph.sin()),
        }
    }

    fn gradient(&self, x: &[f64], axis: usize) -> Complex64 {
        let ph = self.phase(x);
        let k = TAU * self.wave_vector().get(axis).copied().unwrap_or(0) as f64;
        match self {
            Wave::Cos(_) => Complex64::new(-k * ph.sin(), 0.0),
            Wave::Sin(_) => Complex64::new(k * ph.cos(), 0.0),
            Wave::Exp(_) => Complex64::new(ph.cos(), ph.sin()) * Complex64::new(0.0, k),
        }
    }
}

/// `exp(1 − 1/(1 − |x−c|²/r²))` inside the ball of radius `r`, zero outside.
/// Distances are Euclidean in the unit box, without periodic wrapping.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Bump {
    fn rho(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x)
            .map(|(c, xi)| (xi - c) * (xi - c))
            .sum::<f64>()
            / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let rho = self.rho(x);
        if rho >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - rho)).exp()
        }
    }

    fn gradient(&self, x: &[f64], axis: usize) -> f64 {
        let rho = self.rho(x);
        if rho >= 1.0 || axis >= self.center.len() {
            return 0.0;
        }
        let drho = 2.0 * (x[axis] - self.center[axis]) / (self.radius * self.radius);
        let q = 1.0 - rho;
        (1.0 - 1.0 / q).exp() * (-1.0 / (q * q)) * drho
    }

    /// Whether `x` lies in the open ball.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.rho(x) < 1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coef: Complex64,
    pub t_pow: u32,
    pub s_pow: u32,
    pub waves: Vec<Wave>,
    pub bumps: Vec<Bump>,
    /// Sorted, distinct axes of `dx_J`; empty for a 0-form.
    pub axes: Vec<usize>,
}

/// `d^k/dx^k x^n` at `x`.
fn poly_derivative(x: f64, n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let falling: f64 = (0..k).map(|i| (n - i) as f64).product();
    falling * x.powi((n - k) as i32)
}

impl Term {
    fn spatial(&self, x: &[f64]) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for w in &self.waves {
            v *= w.value(x);
        }
        for b in &self.bumps {
            v *= b.value(x);
        }
        v
    }

    fn spatial_gradient(&self, x: &[f64], axis: usize) -> Complex64 {
        let factors: Vec<(Complex64, Complex64)> = self
            .waves
            .iter()
            .map(|w| (w.value(x), w.gradient(x, axis)))
            .chain(
                self.bumps
                    .iter()
                    .map(|b| (Complex64::new(b.value(x), 0.0), Complex64::new(b.gradient(x, axis), 0.0))),
            )
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..factors.len() {
            let mut prod = factors[i].1;
            for (j, f) in factors.iter().enumerate() {
                if j != i {
                    prod *= f.0;
                }
            }
            total += prod;
        }
        total
    }

    fn param(&self, s: f64, t: f64, ds: u32, dt: u32) -> f64 {
        poly_derivative(t, self.t_pow, dt) * poly_derivative(s, self.s_pow, ds)
    }
}

/// A finite sum of terms. The empty sum is zero in every degree.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expr {
    pub terms: Vec<Term>,
}

/// Parse failure at a byte offset of the expression.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at offset {})", self.message, self.offset)
    }
}

impl std::error::Error for ExprError {}

impl Expr {
    pub fn parse(text: &str) -> std::result::Result<Self, ExprError> {
        Parser { src: text.as_bytes(), pos: 0 }.expr()
    }

    /// Common form degree of the terms, `None` for the empty sum.
    pub fn degree(&self) -> std::result::Result<Option<usize>, String> {
        let mut deg = None;
        for term in &self.terms {
            match deg {
                None => deg = Some(term.axes.len()),
                Some(d) if d != term.axes.len() => {
                    return Err(format!("mixes {d}-form and {}-form terms", term.axes.len()))
                }
                _ => {}
            }
        }
        Ok(deg)
    }

    pub fn max_t_power(&self) -> u32 {
        self.terms.iter().map(|t| t.t_pow).max().unwrap_or(0)
    }

    pub fn max_s_power(&self) -> u32 {
        self.terms.iter().map(|t| t.s_pow).max().unwrap_or(0)
    }

    pub fn waves(&self) -> impl Iterator<Item = &Wave> {
        self.terms.iter().flat_map(|t| t.waves.iter())
    }

    pub fn bumps(&self) -> impl Iterator<Item = &Bump> {
        self.terms.iter().flat_map(|t| t.bumps.iter())
    }

    pub fn axes(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().flat_map(|t| t.axes.iter().copied())
    }

    /// `∂_s^ds ∂_t^dt` of the `dx_axes` coefficient at `x`.
    pub fn component(&self, x: &[f64], axes: &[usize], s: f64, t: f64, ds: u32, dt: u32) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in self.terms.iter().filter(|term| term.axes == axes) {
            let p = term.param(s, t, ds, dt);
            if p != 0.0 {
                acc += term.coef * p * term.spatial(x);
            }
        }
        acc
    }

    /// `∂_axis` of a 0-form at `(s, t, x)`.
    pub fn gradient(&self, x: &[f64], axis: usize, s: f64, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in self.terms.iter().filter(|term| term.axes.is_empty()) {
            let p = term.param(s, t, 0, 0);
            if p != 0.0 {
                acc += term.coef * p * term.spatial_gradient(x, axis);
            }
        }
        acc
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, v) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?},{:?})", self.coef.re, self.coef.im)?;
        if self.t_pow > 0 {
            write!(f, "*t^{}", self.t_pow)?;
        }
        if self.s_pow > 0 {
            write!(f, "*s^{}", self.s_pow)?;
        }
        for w in &self.waves {
            let name = match w {
                Wave::Cos(_) => "cos",
                Wave::Sin(_) => "sin",
                Wave::Exp(_) => "exp",
            };
            write!(f, "*{name}[")?;
            write_list(f, w.wave_vector())?;
            f.write_str("]")?;
        }
        for b in &self.bumps {
            f.write_str("*bump[")?;
            let centre: Vec<String> = b.center.iter().map(|c| format!("{c:?}")).collect();
            write_list(f, &centre)?;
            write!(f, ";{:?}]", b.radius)?;
        }
        if !self.axes.is_empty() {
            f.write_str(" dx")?;
            for a in &self.axes {
                write!(f, "{a}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<&Term> = self.terms.iter().filter(|t| t.coef != Complex64::new(0.0, 0.0)).collect();
        if terms.is_empty() {
            return f.write_str("0");
        }
        for (i, term) in terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{term}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Expr::parse(&text).map_err(|e| {
            serde::de::Error::custom(format!(
                "expression error: {} [offset {} of {}]",
                e.message,
                e.offset,
                text.len()
            ))
        })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

type PResult<T> = std::result::Result<T, ExprError>;

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ExprError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> PResult<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn expr(mut self) -> PResult<Expr> {
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        let rest = std::str::from_utf8(&self.src[self.pos..]).unwrap_or("").trim();
        if rest == "0" {
            return Ok(Expr::default());
        }
        let mut terms = Vec::new();
        let mut sign = 1.0;
        if self.peek() == Some(b'-') {
            self.pos += 1;
            sign = -1.0;
        } else if self.peek() == Some(b'+') {
            self.pos += 1;
        }
        loop {
            let mut term = self.term()?;
            term.coef *= sign;
            if term.coef != Complex64::new(0.0, 0.0) {
                terms.push(term);
            }
            match self.peek() {
                None => break,
                Some(b'+') => sign = 1.0,
                Some(b'-') => sign = -1.0,
                Some(c) => return self.err(format!("unexpected '{}'", c as char)),
            }
            self.pos += 1;
        }
        Ok(Expr { terms })
    }

    fn term(&mut self) -> PResult<Term> {
        let mut term = Term {
            coef: Complex64::new(1.0, 0.0),
            t_pow: 0,
            s_pow: 0,
            waves: Vec::new(),
            bumps: Vec::new(),
            axes: Vec::new(),
        };
        let mut have_dx = false;
        self.factor(&mut term, &mut have_dx)?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    self.factor(&mut term, &mut have_dx)?;
                }
                Some(c) if c.is_ascii_alphanumeric() || c == b'(' || c == b'.' => {
                    self.factor(&mut term, &mut have_dx)?;
                }
                _ => break,
            }
        }
        if !term.coef.re.is_finite() || !term.coef.im.is_finite() {
            return self.err("coefficient is not finite");
        }
        Ok(term)
    }

    fn number(&mut self, signed: bool) -> PResult<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        if signed && i < s.len() && (s[i] == b'-' || s[i] == b'+') {
            i += 1;
        }
        let digits_start = i;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i == digits_start {
            return self.err("expected a number");
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'-' || s[j] == b'+') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) => {
                self.pos = i;
                Ok(v)
            }
            Err(_) => self.err(format!("malformed number '{text}'")),
        }
    }

    fn integer(&mut self) -> PResult<i64> {
        self.skip_ws();
        let start = self.pos;
        let mut i = self.pos;
        if i < self.src.len() && self.src[i] == b'-' {
            i += 1;
        }
        let ds = i;
        while i < self.src.len() && self.src[i].is_ascii_digit() {
            i += 1;
        }
        if i == ds {
            return self.err("expected an integer");
        }
        let text = std::str::from_utf8(&self.src[start..i]).unwrap_or("");
        let v = text.parse::<i64>().or_else(|_| self.err("integer out of range"))?;
        self.pos = i;
        Ok(v)
    }

    fn power(&mut self) -> PResult<u32> {
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let at = self.pos;
            let v = self.integer()?;
            if !(0..=16).contains(&v) {
                self.pos = at;
                return self.err("exponent must be between 0 and 16");
            }
            Ok(v as u32)
        } else {
            Ok(1)
        }
    }

    fn word(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn factor(&mut self, term: &mut Term, have_dx: &mut bool) -> PResult<()> {
        let Some(c) = self.peek() else {
            return self.err("expected a factor");
        };
        if c.is_ascii_digit() || c == b'.' {
            let v = self.number(false)?;
            let imaginary = self.src.get(self.pos) == Some(&b'i')
                && !self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|b| b.is_ascii_alphanumeric());
            if imaginary {
                self.pos += 1;
                term.coef *= Complex64::new(0.0, v);
            } else {
                term.coef *= v;
            }
            return Ok(());
        }
        if c == b'(' {
            self.pos += 1;
            let re = self.number(true)?;
            self.expect(b',')?;
            let im = self.number(true)?;
            self.expect(b')')?;
            term.coef *= Complex64::new(re, im);
            return Ok(());
        }
        let start = self.pos;
        let word = self.word().to_string();
        match word.as_str() {
            "i" => term.coef *= Complex64::new(0.0, 1.0),
            "pi" => term.coef *= PI,
            "t" => term.t_pow += self.power()?,
            "s" => term.s_pow += self.power()?,
            "cos" | "sin" | "exp" => {
                self.expect(b'[')?;
                let mut k = vec![self.integer()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    k.push(self.integer()?);
                }
                self.expect(b']')?;
                term.waves.push(match word.as_str() {
                    "cos" => Wave::Cos(k),
                    "sin" => Wave::Sin(k),
                    _ => Wave::Exp(k),
                });
            }
            "bump" => {
                self.expect(b'[')?;
                let mut center = vec![self.number(true)?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    center.push(self.number(true)?);
                }
                self.expect(b';')?;
                let at = self.pos;
                let radius = self.number(false)?;
                if !(radius > 0.0 && radius.is_finite()) {
                    self.pos = at;
                    return self.err("bump radius must be positive");
                }
                self.expect(b']')?;
                term.bumps.push(Bump { center, radius });
            }
            "dx" => {
                if *have_dx {
                    self.pos = start;
                    return self.err("a term carries at most one dx factor");
                }
                *have_dx = true;
                let ds = self.pos;
                let mut axes = Vec::new();
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    axes.push((self.src[self.pos] - b'0') as usize);
                    self.pos += 1;
                }
                if axes.is_empty() {
                    self.pos = ds;
                    return self.err("dx needs at least one axis digit");
                }
                // Sort the axes, tracking the sign of the permutation.
                let mut sign = 1.0;
                for i in 0..axes.len() {
                    for j in 0..axes.len() - 1 - i {
                        if axes[j] > axes[j + 1] {
                            axes.swap(j, j + 1);
                            sign = -sign;
                        }
                    }
                }
                if axes.windows(2).any(|w| w[0] == w[1]) {
                    self.pos = ds;
                    return self.err("repeated axis in dx");
                }
                term.coef *= sign;
                term.axes = axes;
            }
            "" => return self.err(format!("unexpected '{}'", c as char)),
            other => {
                self.pos = start;
                return self.err(format!("unknown factor '{other}'"));
            }
        }
        Ok(())
    }
}
