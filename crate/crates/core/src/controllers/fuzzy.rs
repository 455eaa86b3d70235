//! Mamdani fuzzy inference over error and change-of-error.
//!
//! AND is `min`, implication clips the consequent at the rule strength,
//! aggregation is `max`, and the crisp output is the centroid of the
//! aggregated set sampled on a uniform grid of the output universe.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sample count for centroid defuzzification.
pub const CENTROID_POINTS: usize = 201;

/// Triangular membership function `(left foot, peak, right foot)`.
///
/// A foot equal to the peak gives a shoulder: membership is 1 at the peak
/// and drops to 0 only on the other side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct MembershipFunction {
    left: f64,
    peak: f64,
    right: f64,
}

impl TryFrom<[f64; 3]> for MembershipFunction {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        MembershipFunction::triangle(v[0], v[1], v[2])
    }
}

impl From<MembershipFunction> for [f64; 3] {
    fn from(mf: MembershipFunction) -> Self {
        [mf.left, mf.peak, mf.right]
    }
}

impl fmt::Display for MembershipFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tri({}, {}, {})", self.left, self.peak, self.right)
    }
}

impl MembershipFunction {
    pub fn triangle(left: f64, peak: f64, right: f64) -> Result<Self> {
        if !(left.is_finite() && peak.is_finite() && right.is_finite()) || !(left <= peak && peak <= right) {
            return Err(Error::invalid(format!(
                "triangle needs left <= peak <= right, got ({left}, {peak}, {right})"
            )));
        }
        Ok(MembershipFunction { left, peak, right })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    /// Degree of membership of `x`, by linear interpolation on each flank.
    pub fn degree(&self, x: f64) -> f64 {
        if x < self.left || x > self.right {
            0.0
        } else if x == self.peak {
            1.0
        } else if x < self.peak {
            (x - self.left) / (self.peak - self.left)
        } else {
            (self.right - x) / (self.right - self.peak)
        }
    }
}

/// Degree of membership of `x` in `mf`.
pub fn fuzzify(x: f64, mf: &MembershipFunction) -> f64 {
    mf.degree(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub mf: MembershipFunction,
}

impl Term {
    fn new(name: &str, left: f64, peak: f64, right: f64) -> Self {
        Term {
            name: name.to_string(),
            mf: MembershipFunction::triangle(left, peak, right).expect("valid built-in triangle"),
        }
    }
}

/// A universe of discourse with its named terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinguisticVariable {
    pub min: f64,
    pub max: f64,
    pub terms: Vec<Term>,
}

impl LinguisticVariable {
    pub fn new(min: f64, max: f64, terms: Vec<Term>) -> Result<Self> {
        let var = LinguisticVariable { min, max, terms };
        var.validate()?;
        Ok(var)
    }

    fn validate(&self) -> Result<()> {
        if !(self.min < self.max) {
            return Err(Error::invalid(format!(
                "universe needs min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.terms.is_empty() {
            return Err(Error::invalid("linguistic variable has no terms"));
        }
        for (k, t) in self.terms.iter().enumerate() {
            if self.terms[..k].iter().any(|o| o.name == t.name) {
                return Err(Error::invalid(format!("duplicate term `{}`", t.name)));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }

    pub fn term_index(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.name == name)
    }

    /// Default error universe: low / okay / high on [-1, 1].
    pub fn default_error() -> Self {
        LinguisticVariable {
            min: -1.0,
            max: 1.0,
            terms: vec![
                Term::new("low", -1.0, -1.0, 0.0),
                Term::new("okay", -0.5, 0.0, 0.5),
                Term::new("high", 0.0, 1.0, 1.0),
            ],
        }
    }

    /// Default change-of-error universe: negative / zero / positive on [-1, 1].
    pub fn default_derror() -> Self {
        LinguisticVariable {
            min: -1.0,
            max: 1.0,
            terms: vec![
                Term::new("negative", -1.0, -1.0, 0.0),
                Term::new("zero", -0.5, 0.0, 0.5),
                Term::new("positive", 0.0, 1.0, 1.0),
            ],
        }
    }

    /// Default output universe: five symmetric triangles on [-1, 1].
    pub fn default_output() -> Self {
        LinguisticVariable {
            min: -1.0,
            max: 1.0,
            terms: vec![
                Term::new("NL", -1.0, -1.0, -0.5),
                Term::new("NS", -1.0, -0.5, 0.0),
                Term::new("Zero", -0.5, 0.0, 0.5),
                Term::new("PS", 0.0, 0.5, 1.0),
                Term::new("PL", 0.5, 1.0, 1.0),
            ],
        }
    }
}

/// Controller input a rule antecedent refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Input {
    Error,
    ChangeOfError,
}

impl Input {
    fn keyword(self) -> &'static str {
        match self {
            Input::Error => "error",
            Input::ChangeOfError => "derror",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Antecedent {
    pub input: Input,
    pub term: String,
}

/// `IF <antecedents joined by AND> THEN output IS <consequent> (weight)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedents: Vec<Antecedent>,
    pub consequent: String,
    pub weight: f64,
}

impl Rule {
    pub fn new(antecedents: &[(Input, &str)], consequent: &str) -> Self {
        Rule {
            antecedents: antecedents
                .iter()
                .map(|&(input, term)| Antecedent {
                    input,
                    term: term.to_string(),
                })
                .collect(),
            consequent: consequent.to_string(),
            weight: 1.0,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IF ")?;
        for (k, a) in self.antecedents.iter().enumerate() {
            if k > 0 {
                write!(f, " AND ")?;
            }
            write!(f, "{} IS {}", a.input.keyword(), a.term)?;
        }
        write!(f, " THEN output IS {}", self.consequent)?;
        if self.weight != 1.0 {
            write!(f, " ({})", self.weight)?;
        }
        Ok(())
    }
}

impl FromStr for Rule {
    type Err = Error;

    /// Parses `IF error IS okay AND derror IS positive THEN output IS NS`,
    /// with an optional trailing `(weight)`. Keywords are case-insensitive;
    /// term names are not.
    fn from_str(line: &str) -> Result<Rule> {
        let bad = |why: &str| Error::invalid(format!("{why} in rule `{}`", line.trim()));
        let mut tokens: Vec<&str> = line.split_whitespace().collect();

        let mut weight = 1.0;
        if let Some(last) = tokens.last() {
            if let Some(inner) = last.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
                weight = inner.parse::<f64>().map_err(|_| bad("unparsable weight"))?;
                tokens.pop();
            }
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(bad("weight must lie in (0, 1]"));
        }

        let kw = |tok: Option<&&str>, want: &str| tok.is_some_and(|t| t.eq_ignore_ascii_case(want));
        if !kw(tokens.first(), "if") {
            return Err(bad("expected `IF`"));
        }
        let then = tokens
            .iter()
            .position(|t| t.eq_ignore_ascii_case("then"))
            .ok_or_else(|| bad("expected `THEN`"))?;

        let mut antecedents = Vec::new();
        for (k, clause) in tokens[1..then].split(|t| t.eq_ignore_ascii_case("and")).enumerate() {
            if clause.len() != 3 || !kw(clause.get(1), "is") {
                return Err(bad(&format!("antecedent {} is not `<input> IS <term>`", k + 1)));
            }
            let input = match clause[0].to_ascii_lowercase().as_str() {
                "error" | "e" => Input::Error,
                "derror" | "de" | "change_of_error" => Input::ChangeOfError,
                other => return Err(bad(&format!("unknown input `{other}`"))),
            };
            antecedents.push(Antecedent {
                input,
                term: clause[2].to_string(),
            });
        }

        let tail = &tokens[then + 1..];
        if tail.len() != 3 || !kw(tail.first(), "output") || !kw(tail.get(1), "is") {
            return Err(bad("consequent is not `output IS <term>`"));
        }
        Ok(Rule {
            antecedents,
            consequent: tail[2].to_string(),
            weight,
        })
    }
}

/// Parses a rules file: one rule per line, blank lines and `#` comments
/// ignored. Errors carry the 1-based line number.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let rule = line.parse::<Rule>().map_err(|e| match e {
            Error::Invalid(msg) => Error::invalid(format!("line {}: {msg}", n + 1)),
            other => other,
        })?;
        rules.push(rule);
    }
    Ok(rules)
}

/// The published four-rule base.
pub fn table1_rules() -> Vec<Rule> {
    use Input::*;
    vec![
        Rule::new(&[(Error, "okay")], "Zero"),
        Rule::new(&[(Error, "low")], "PL"),
        Rule::new(&[(Error, "high")], "NL"),
        Rule::new(&[(Error, "okay"), (ChangeOfError, "positive")], "NS"),
    ]
}

#[derive(Debug, Clone, PartialEq)]
struct CompiledRule {
    antecedents: Vec<(Input, usize)>,
    consequent: usize,
    weight: f64,
}

/// Validated rule base with its three linguistic variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyRuleBase {
    error: LinguisticVariable,
    derror: LinguisticVariable,
    output: LinguisticVariable,
    rules: Vec<Rule>,
    compiled: Vec<CompiledRule>,
}

impl FuzzyRuleBase {
    pub fn new(
        error: LinguisticVariable,
        derror: LinguisticVariable,
        output: LinguisticVariable,
        rules: Vec<Rule>,
    ) -> Result<Self> {
        error.validate()?;
        derror.validate()?;
        output.validate()?;
        let mut compiled = Vec::with_capacity(rules.len());
        for rule in &rules {
            if rule.antecedents.is_empty() {
                return Err(Error::invalid(format!("rule `{rule}` has no antecedent")));
            }
            if !(rule.weight > 0.0 && rule.weight <= 1.0) {
                return Err(Error::invalid(format!("rule `{rule}` weight must lie in (0, 1]")));
            }
            let antecedents = rule
                .antecedents
                .iter()
                .map(|a| {
                    let var = match a.input {
                        Input::Error => &error,
                        Input::ChangeOfError => &derror,
                    };
                    var.term_index(&a.term).map(|k| (a.input, k)).ok_or_else(|| {
                        Error::invalid(format!(
                            "rule `{rule}` references undefined {} term `{}`",
                            a.input.keyword(),
                            a.term
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let consequent = output.term_index(&rule.consequent).ok_or_else(|| {
                Error::invalid(format!(
                    "rule `{rule}` references undefined output term `{}`",
                    rule.consequent
                ))
            })?;
            compiled.push(CompiledRule {
                antecedents,
                consequent,
                weight: rule.weight,
            });
        }
        Ok(FuzzyRuleBase {
            error,
            derror,
            output,
            rules,
            compiled,
        })
    }

    /// Default universes with the published four rules.
    pub fn table1() -> Self {
        Self::new(
            LinguisticVariable::default_error(),
            LinguisticVariable::default_derror(),
            LinguisticVariable::default_output(),
            table1_rules(),
        )
        .expect("built-in rule base is valid")
    }

    pub fn error(&self) -> &LinguisticVariable {
        &self.error
    }

    pub fn derror(&self) -> &LinguisticVariable {
        &self.derror
    }

    pub fn output(&self) -> &LinguisticVariable {
        &self.output
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Firing strength of every rule at the (clamped) inputs.
    pub fn firing_strengths(&self, e: f64, de: f64) -> Vec<f64> {
        let e = self.error.clamp(e);
        let de = self.derror.clamp(de);
        self.compiled
            .iter()
            .map(|rule| {
                let strength = rule
                    .antecedents
                    .iter()
                    .map(|&(input, k)| match input {
                        Input::Error => self.error.terms[k].mf.degree(e),
                        Input::ChangeOfError => self.derror.terms[k].mf.degree(de),
                    })
                    .fold(1.0, f64::min);
                strength * rule.weight
            })
            .collect()
    }

    /// Aggregated output membership at `x`.
    pub fn aggregate(&self, strengths: &[f64], x: f64) -> f64 {
        self.compiled
            .iter()
            .zip(strengths)
            .map(|(rule, &w)| w.min(self.output.terms[rule.consequent].mf.degree(x)))
            .fold(0.0, f64::max)
    }
}

/// Crisp output for normalized error `e` and change of error `de`.
///
/// Returns 0 when no rule fires.
pub fn fuzzy_infer(rb: &FuzzyRuleBase, e: f64, de: f64) -> f64 {
    let strengths = rb.firing_strengths(e, de);
    if strengths.iter().all(|&w| w <= 0.0) {
        return 0.0;
    }
    let (lo, width) = (rb.output.min, rb.output.width());
    let step = width / (CENTROID_POINTS - 1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..CENTROID_POINTS {
        let x = lo + k as f64 * step;
        let mu = rb.aggregate(&strengths, x);
        num += x * mu;
        den += mu;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn unit() -> f64 {
    1.0
}

fn positive() -> f64 {
    1.0
}

/// Fuzzy controller configuration: scaling gains around a rule base.
///
/// Rules come from `rules` (one rule string per entry), else from
/// `rules_file`, else the published four rules. Universes default to the
/// symmetric layout of [`LinguisticVariable::default_error`] and friends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyConfig {
    /// Error scaling into the normalized universe.
    #[serde(default = "unit")]
    pub error_gain: f64,
    /// Change-of-error scaling, s.
    #[serde(default = "unit")]
    pub derror_gain: f64,
    /// Output denormalization gain.
    #[serde(default = "unit")]
    pub output_gain: f64,
    #[serde(default = "positive")]
    pub output_sign: f64,
    #[serde(default)]
    pub rules: Option<Vec<String>>,
    #[serde(default)]
    pub rules_file: Option<PathBuf>,
    #[serde(default)]
    pub error_universe: Option<LinguisticVariable>,
    #[serde(default)]
    pub derror_universe: Option<LinguisticVariable>,
    #[serde(default)]
    pub output_universe: Option<LinguisticVariable>,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        FuzzyConfig {
            error_gain: 1.0,
            derror_gain: 1.0,
            output_gain: 1.0,
            output_sign: 1.0,
            rules: None,
            rules_file: None,
            error_universe: None,
            derror_universe: None,
            output_universe: None,
        }
    }
}

impl FuzzyConfig {
    /// Builds the rule base, reading `rules_file` if no inline rules are
    /// given. Relative paths are taken as-is; callers resolve them first.
    pub fn build_rule_base(&self) -> Result<FuzzyRuleBase> {
        for (name, v) in [
            ("error_gain", self.error_gain),
            ("derror_gain", self.derror_gain),
            ("output_gain", self.output_gain),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("fuzzy `{name}` must be finite")));
            }
        }
        super::check_sign(self.output_sign)?;
        let rules = match (&self.rules, &self.rules_file) {
            (Some(lines), _) => lines
                .iter()
                .enumerate()
                .map(|(k, l)| {
                    l.parse::<Rule>()
                        .map_err(|e| Error::invalid(format!("rules[{k}]: {e}")))
                })
                .collect::<Result<Vec<_>>>()?,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::invalid(format!("cannot read rules file {}: {e}", path.display())))?;
                parse_rules(&text)?
            }
            (None, None) => table1_rules(),
        };
        FuzzyRuleBase::new(
            self.error_universe
                .clone()
                .unwrap_or_else(LinguisticVariable::default_error),
            self.derror_universe
                .clone()
                .unwrap_or_else(LinguisticVariable::default_derror),
            self.output_universe
                .clone()
                .unwrap_or_else(LinguisticVariable::default_output),
            rules,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FuzzyState {
    pub prev_error: Option<f64>,
}

/// One fuzzy controller update on raw error `e`. The change of error is a
/// backward difference, zero on the first call.
pub fn fuzzy_step(cfg: &FuzzyConfig, rb: &FuzzyRuleBase, state: &FuzzyState, e: f64, dt: f64) -> (f64, FuzzyState) {
    let de = state.prev_error.map_or(0.0, |prev| (e - prev) / dt);
    let out = fuzzy_infer(rb, cfg.error_gain * e, cfg.derror_gain * de);
    (
        cfg.output_sign * cfg.output_gain * out,
        FuzzyState { prev_error: Some(e) },
    )
}
