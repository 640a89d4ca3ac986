//! Experiment definition format.
//!
//! ```text
//! # comment
//! experiment fig4_5
//! model thermistor { delta=0.1mW/K r0=8kOhm t0=298K beta=3460K c=1mJ/K }
//! drive current sinusoid { amplitude=0.5mA frequency=10mHz }
//! sim { dt=0.05s transient_cycles=20 record_cycles=2 }
//! analyze { pinch loop_area phi_q sweep(1uHz, 10mHz, 10Hz) }
//! output csv "fig4_5.csv" json "fig4_5.json"
//! ```
//!
//! Statements may span lines; whitespace and line endings are not
//! significant. Bare numbers are SI. A unit suffix must belong to the closed
//! table in [`UNITS`] and match the dimension of its key.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::integrate::SimControls;
use crate::models::{Axon, CapacitorCircuit, Model, SwitchedNetwork, Thermistor, R1};
use crate::oneport::{Drive, OnePort, SourceKind, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Current,
    Voltage,
    ThermalConductance,
    Resistance,
    Temperature,
    HeatCapacity,
    Frequency,
    Time,
    Conductance,
    Capacitance,
    Charge,
    Angle,
    /// Plain number, no suffix allowed.
    Number,
}

/// Accepted unit suffixes: `(suffix, dimension, power of ten)`.
pub const UNITS: &[(&str, Dim, i32)] = &[
    ("A", Dim::Current, 0),
    ("mA", Dim::Current, -3),
    ("V", Dim::Voltage, 0),
    ("W/K", Dim::ThermalConductance, 0),
    ("mW/K", Dim::ThermalConductance, -3),
    ("mW/C", Dim::ThermalConductance, -3),
    ("Ohm", Dim::Resistance, 0),
    ("kOhm", Dim::Resistance, 3),
    ("K", Dim::Temperature, 0),
    ("J/K", Dim::HeatCapacity, 0),
    ("mJ/K", Dim::HeatCapacity, -3),
    ("Hz", Dim::Frequency, 0),
    ("mHz", Dim::Frequency, -3),
    ("uHz", Dim::Frequency, -6),
    ("s", Dim::Time, 0),
    ("S", Dim::Conductance, 0),
    ("F", Dim::Capacitance, 0),
    ("C", Dim::Charge, 0),
    ("rad", Dim::Angle, 0),
];

/// Suffixes that name a quantity but not a complete unit for any key.
const INCOMPLETE_UNITS: &[&str] = &["W", "mW", "J", "mJ"];

#[derive(Debug, Clone, PartialEq)]
pub struct Analyses {
    pub pinch: bool,
    pub loop_area: bool,
    pub phi_q: bool,
    pub linearity: bool,
    pub sweep: Option<Vec<f64>>,
}

impl Analyses {
    pub fn none() -> Self {
        Analyses {
            pinch: false,
            loop_area: false,
            phi_q: false,
            linearity: false,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub csv: Option<String>,
    pub json: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: Model,
    pub drive: Drive,
    pub controls: SimControls,
    pub analyses: Analyses,
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedExperiment {
    pub config: ExperimentConfig,
    /// Model keys that fell back to defaults.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical(String),
    Syntax(String),
    UnknownKey { block: String, key: String },
    DuplicateKey(String),
    MalformedNumber(String),
    Unit(String),
    KindMismatch(String),
    Missing(&'static str),
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Lexical(m) => write!(f, "lexical error: {m}"),
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UnknownKey { block, key } => {
                write!(f, "unknown key `{key}` in {block}")
            }
            ParseErrorKind::DuplicateKey(k) => write!(f, "duplicate `{k}`"),
            ParseErrorKind::MalformedNumber(m) => write!(f, "malformed number: {m}"),
            ParseErrorKind::Unit(m) => write!(f, "unit error: {m}"),
            ParseErrorKind::KindMismatch(m) => write!(f, "kind mismatch: {m}"),
            ParseErrorKind::Missing(what) => write!(f, "missing {what}"),
            ParseErrorKind::Invalid(m) => write!(f, "invalid experiment: {m}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Number with optional unit suffix, kept verbatim.
    Value(String),
    Str(String),
    Sym(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
}

fn err(pos: Pos, kind: ParseErrorKind) -> ParseError {
    ParseError {
        line: pos.line,
        column: pos.column,
        kind,
    }
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || "{}(),=#\"".contains(c)
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().expect("peeked");
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
        } else if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars);
            }
        } else if "{}(),=".contains(c) {
            bump(&mut chars);
            out.push(Token {
                tok: Tok::Sym(c),
                pos,
            });
        } else if c == '"' {
            bump(&mut chars);
            let mut s = String::new();
            loop {
                match chars.peek() {
                    None | Some('\n') | Some('\r') => {
                        return Err(err(
                            pos,
                            ParseErrorKind::Lexical("unterminated string".into()),
                        ))
                    }
                    Some('"') => {
                        bump(&mut chars);
                        break;
                    }
                    Some(_) => s.push(bump(&mut chars)),
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                pos,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            if let Some(&c) = chars.peek() {
                if !is_delim(c) {
                    let p = Pos { line, column };
                    return Err(err(p, ParseErrorKind::Lexical(format!("unexpected `{c}`"))));
                }
            }
            out.push(Token {
                tok: Tok::Ident(s),
                pos,
            });
        } else if c.is_ascii_digit() || "+-.".contains(c) {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if is_delim(c) {
                    break;
                }
                s.push(bump(&mut chars));
            }
            out.push(Token {
                tok: Tok::Value(s),
                pos,
            });
        } else {
            return Err(err(
                pos,
                ParseErrorKind::Lexical(format!("unexpected `{c}`")),
            ));
        }
    }
    Ok(out)
}

/// Splits a value token into mantissa, decimal exponent and unit suffix.
fn split_number(raw: &str) -> Option<(&str, i32, &str)> {
    let b = raw.as_bytes();
    let mut k = 0;
    if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
        k += 1;
    }
    let digits_start = k;
    while k < b.len() && b[k].is_ascii_digit() {
        k += 1;
    }
    let mut digits = k - digits_start;
    if k < b.len() && b[k] == b'.' {
        k += 1;
        let frac = k;
        while k < b.len() && b[k].is_ascii_digit() {
            k += 1;
        }
        digits += k - frac;
    }
    if digits == 0 {
        return None;
    }
    let mantissa_end = k;
    let mut exponent = 0;
    if k < b.len() && (b[k] == b'e' || b[k] == b'E') {
        let mut j = k + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_digits = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j == exp_digits {
            return None;
        }
        exponent = raw[k + 1..j].parse().ok()?;
        k = j;
    }
    Some((&raw[..mantissa_end], exponent, &raw[k..]))
}

fn parse_quantity(raw: &str, pos: Pos, dim: Dim, key: &str) -> Result<f64, ParseError> {
    let malformed = || err(pos, ParseErrorKind::MalformedNumber(format!("`{raw}`")));
    let (mantissa, exponent, suffix) = split_number(raw).ok_or_else(malformed)?;
    if suffix
        .chars()
        .next()
        .is_some_and(|c| !c.is_ascii_alphabetic())
    {
        return Err(malformed());
    }
    let unit_pos = Pos {
        line: pos.line,
        column: pos.column + raw.len() - suffix.len(),
    };
    let shift = if suffix.is_empty() {
        0
    } else if let Some(&(_, d, p)) = UNITS.iter().find(|(u, _, _)| *u == suffix) {
        if d != dim {
            return Err(err(
                unit_pos,
                ParseErrorKind::Unit(format!("`{suffix}` is not a valid unit for `{key}`")),
            ));
        }
        p
    } else if INCOMPLETE_UNITS.contains(&suffix) {
        return Err(err(
            unit_pos,
            ParseErrorKind::Unit(format!(
                "ambiguous unit `{suffix}` for `{key}` (missing denominator?)"
            )),
        ));
    } else {
        return Err(err(
            unit_pos,
            ParseErrorKind::Unit(format!("unknown unit `{suffix}`")),
        ));
    };
    let value: f64 = format!("{mantissa}e{}", exponent + shift)
        .parse()
        .map_err(|_| malformed())?;
    if !value.is_finite() {
        return Err(err(
            pos,
            ParseErrorKind::MalformedNumber(format!("`{raw}` is not finite")),
        ));
    }
    Ok(value)
}

fn parse_count(raw: &str, pos: Pos) -> Result<u32, ParseError> {
    if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err(
            pos,
            ParseErrorKind::MalformedNumber(format!("`{raw}` is not a non-negative integer")),
        ));
    }
    raw.parse().map_err(|_| {
        err(
            pos,
            ParseErrorKind::MalformedNumber(format!("`{raw}` is out of range")),
        )
    })
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone)]
struct Entry {
    key_pos: Pos,
    value: Tok,
    value_pos: Pos,
}

#[derive(Debug, Clone)]
struct Block {
    pos: Pos,
    entries: BTreeMap<String, Entry>,
}

impl Block {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn quantity(&mut self, key: &str, dim: Dim) -> Result<Option<f64>, ParseError> {
        match self.take(key) {
            None => Ok(None),
            Some(Entry {
                value: Tok::Value(raw),
                value_pos,
                ..
            }) => parse_quantity(&raw, value_pos, dim, key).map(Some),
            Some(e) => Err(err(
                e.value_pos,
                ParseErrorKind::MalformedNumber(format!("`{key}` expects a number")),
            )),
        }
    }

    fn count(&mut self, key: &str) -> Result<Option<u32>, ParseError> {
        match self.take(key) {
            None => Ok(None),
            Some(Entry {
                value: Tok::Value(raw),
                value_pos,
                ..
            }) => parse_count(&raw, value_pos).map(Some),
            Some(e) => Err(err(
                e.value_pos,
                ParseErrorKind::MalformedNumber(format!("`{key}` expects an integer")),
            )),
        }
    }

    fn flag(&mut self, key: &str) -> Result<Option<bool>, ParseError> {
        match self.take(key) {
            None => Ok(None),
            Some(Entry {
                value: Tok::Ident(s),
                value_pos,
                ..
            }) => match s.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(err(
                    value_pos,
                    ParseErrorKind::Syntax(format!("`{key}` expects true or false")),
                )),
            },
            Some(e) => Err(err(
                e.value_pos,
                ParseErrorKind::Syntax(format!("`{key}` expects true or false")),
            )),
        }
    }

    fn reject_leftovers(&self, block: &str) -> Result<(), ParseError> {
        match self
            .entries
            .iter()
            .min_by_key(|(_, e)| (e.key_pos.line, e.key_pos.column))
        {
            Some((key, e)) => Err(err(
                e.key_pos,
                ParseErrorKind::UnknownKey {
                    block: block.to_string(),
                    key: key.clone(),
                },
            )),
            None => Ok(()),
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.at)
    }

    fn next(&mut self, what: &str) -> Result<Token, ParseError> {
        let t = self.toks.get(self.at).cloned().ok_or_else(|| {
            err(
                self.end,
                ParseErrorKind::Syntax(format!("expected {what}, found end of input")),
            )
        })?;
        self.at += 1;
        Ok(t)
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        let t = self.next(what)?;
        match t.tok {
            Tok::Ident(s) => Ok((s, t.pos)),
            other => Err(err(
                t.pos,
                ParseErrorKind::Syntax(format!("expected {what}, found {}", describe(&other))),
            )),
        }
    }

    fn sym(&mut self, c: char) -> Result<Pos, ParseError> {
        let t = self.next(&format!("`{c}`"))?;
        match t.tok {
            Tok::Sym(s) if s == c => Ok(t.pos),
            other => Err(err(
                t.pos,
                ParseErrorKind::Syntax(format!("expected `{c}`, found {}", describe(&other))),
            )),
        }
    }

    fn string(&mut self) -> Result<(String, Pos), ParseError> {
        let t = self.next("a quoted path")?;
        match t.tok {
            Tok::Str(s) => Ok((s, t.pos)),
            other => Err(err(
                t.pos,
                ParseErrorKind::Syntax(format!(
                    "expected a quoted path, found {}",
                    describe(&other)
                )),
            )),
        }
    }

    fn block(&mut self, pos: Pos) -> Result<Block, ParseError> {
        self.sym('{')?;
        let mut entries = BTreeMap::new();
        loop {
            let t = self.next("a key or `}`")?;
            match t.tok {
                Tok::Sym('}') => break,
                Tok::Ident(key) => {
                    self.sym('=')?;
                    let v = self.next("a value")?;
                    match v.tok {
                        Tok::Value(_) | Tok::Ident(_) => {}
                        ref other => {
                            return Err(err(
                                v.pos,
                                ParseErrorKind::Syntax(format!(
                                    "expected a value, found {}",
                                    describe(other)
                                )),
                            ))
                        }
                    }
                    if entries.contains_key(&key) {
                        return Err(err(t.pos, ParseErrorKind::DuplicateKey(key)));
                    }
                    entries.insert(
                        key,
                        Entry {
                            key_pos: t.pos,
                            value: v.tok,
                            value_pos: v.pos,
                        },
                    );
                }
                other => {
                    return Err(err(
                        t.pos,
                        ParseErrorKind::Syntax(format!(
                            "expected a key or `}}`, found {}",
                            describe(&other)
                        )),
                    ))
                }
            }
        }
        Ok(Block { pos, entries })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Value(s) => format!("`{s}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Sym(c) => format!("`{c}`"),
    }
}

struct Statements {
    name: Option<(String, Pos)>,
    model: Option<(String, Pos, Block)>,
    drive: Option<(SourceKind, Pos, String, Pos, Block)>,
    sim: Option<Block>,
    analyze: Option<(Analyses, Pos)>,
    outputs: Option<(Outputs, Pos)>,
}

fn once<T>(slot: &Option<T>, what: &str, pos: Pos) -> Result<(), ParseError> {
    if slot.is_some() {
        Err(err(
            pos,
            ParseErrorKind::DuplicateKey(format!("{what} statement")),
        ))
    } else {
        Ok(())
    }
}

fn parse_statements(p: &mut Parser) -> Result<Statements, ParseError> {
    let mut st = Statements {
        name: None,
        model: None,
        drive: None,
        sim: None,
        analyze: None,
        outputs: None,
    };
    while p.peek().is_some() {
        let (kw, pos) = p.ident("a statement keyword")?;
        match kw.as_str() {
            "experiment" => {
                once(&st.name, "experiment", pos)?;
                st.name = Some(p.ident("an experiment name")?);
            }
            "model" => {
                once(&st.model, "model", pos)?;
                let (kind, kpos) = p.ident("a model kind")?;
                if !matches!(
                    kind.as_str(),
                    "thermistor" | "axon" | "switched" | "capacitor"
                ) {
                    return Err(err(
                        kpos,
                        ParseErrorKind::Syntax(format!("unknown model kind `{kind}`")),
                    ));
                }
                let block = p.block(pos)?;
                st.model = Some((kind, kpos, block));
            }
            "drive" => {
                once(&st.drive, "drive", pos)?;
                let (kind, kpos) = p.ident("`current` or `voltage`")?;
                let kind = match kind.as_str() {
                    "current" => SourceKind::CurrentSource,
                    "voltage" => SourceKind::VoltageSource,
                    _ => {
                        return Err(err(
                            kpos,
                            ParseErrorKind::Syntax(format!("unknown drive kind `{kind}`")),
                        ))
                    }
                };
                let (shape, spos) = p.ident("`sinusoid` or `square`")?;
                if shape != "sinusoid" && shape != "square" {
                    return Err(err(
                        spos,
                        ParseErrorKind::Syntax(format!("unknown waveform `{shape}`")),
                    ));
                }
                let block = p.block(pos)?;
                st.drive = Some((kind, kpos, shape, spos, block));
            }
            "sim" => {
                once(&st.sim, "sim", pos)?;
                st.sim = Some(p.block(pos)?);
            }
            "analyze" => {
                once(&st.analyze, "analyze", pos)?;
                st.analyze = Some((parse_analyses(p)?, pos));
            }
            "output" => {
                once(&st.outputs, "output", pos)?;
                st.outputs = Some((parse_outputs(p, pos)?, pos));
            }
            other => {
                return Err(err(
                    pos,
                    ParseErrorKind::Syntax(format!("unknown statement `{other}`")),
                ))
            }
        }
    }
    Ok(st)
}

fn parse_analyses(p: &mut Parser) -> Result<Analyses, ParseError> {
    p.sym('{')?;
    let mut a = Analyses::none();
    loop {
        let t = p.next("an analysis or `}`")?;
        let (name, pos) = match t.tok {
            Tok::Sym('}') => break,
            Tok::Ident(s) => (s, t.pos),
            other => {
                return Err(err(
                    t.pos,
                    ParseErrorKind::Syntax(format!(
                        "expected an analysis, found {}",
                        describe(&other)
                    )),
                ))
            }
        };
        let flag = match name.as_str() {
            "pinch" => &mut a.pinch,
            "loop_area" => &mut a.loop_area,
            "phi_q" => &mut a.phi_q,
            "linearity" => &mut a.linearity,
            "sweep" => {
                if a.sweep.is_some() {
                    return Err(err(pos, ParseErrorKind::DuplicateKey("sweep".into())));
                }
                p.sym('(')?;
                let mut freqs = Vec::new();
                loop {
                    let v = p.next("a frequency")?;
                    match v.tok {
                        Tok::Value(raw) => {
                            freqs.push(parse_quantity(&raw, v.pos, Dim::Frequency, "sweep")?)
                        }
                        other => {
                            return Err(err(
                                v.pos,
                                ParseErrorKind::Syntax(format!(
                                    "expected a frequency, found {}",
                                    describe(&other)
                                )),
                            ))
                        }
                    }
                    let sep = p.next("`,` or `)`")?;
                    match sep.tok {
                        Tok::Sym(',') => continue,
                        Tok::Sym(')') => break,
                        other => {
                            return Err(err(
                                sep.pos,
                                ParseErrorKind::Syntax(format!(
                                    "expected `,` or `)`, found {}",
                                    describe(&other)
                                )),
                            ))
                        }
                    }
                }
                let ok = freqs.iter().all(|f| *f > 0.0) && freqs.windows(2).all(|w| w[1] > w[0]);
                if !ok {
                    return Err(err(
                        pos,
                        ParseErrorKind::Invalid(
                            "frequencies must be strictly increasing and positive".into(),
                        ),
                    ));
                }
                a.sweep = Some(freqs);
                continue;
            }
            other => {
                return Err(err(
                    pos,
                    ParseErrorKind::UnknownKey {
                        block: "analyze".into(),
                        key: other.to_string(),
                    },
                ))
            }
        };
        if *flag {
            return Err(err(pos, ParseErrorKind::DuplicateKey(name)));
        }
        *flag = true;
    }
    Ok(a)
}

fn parse_outputs(p: &mut Parser, pos: Pos) -> Result<Outputs, ParseError> {
    let mut o = Outputs::default();
    while let Some(Token {
        tok: Tok::Ident(kind),
        ..
    }) = p.peek()
    {
        let slot = match kind.as_str() {
            "csv" => &mut o.csv,
            "json" => &mut o.json,
            _ => break,
        };
        let t = p.next("an output kind")?;
        if slot.is_some() {
            return Err(err(t.pos, ParseErrorKind::DuplicateKey(kind_name(&t.tok))));
        }
        let (path, ppos) = p.string()?;
        if path.is_empty() {
            return Err(err(
                ppos,
                ParseErrorKind::Invalid("output path must not be empty".into()),
            ));
        }
        *slot = Some(path);
    }
    if o.csv.is_none() && o.json.is_none() {
        return Err(err(
            pos,
            ParseErrorKind::Syntax("`output` needs `csv \"path\"` and/or `json \"path\"`".into()),
        ));
    }
    Ok(o)
}

fn kind_name(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => s.clone(),
        _ => String::new(),
    }
}

fn resolve_drive(kind: SourceKind, shape: &str, mut b: Block) -> Result<Drive, ParseError> {
    let amp_dim = match kind {
        SourceKind::CurrentSource => Dim::Current,
        SourceKind::VoltageSource => Dim::Voltage,
    };
    let amplitude = b
        .quantity("amplitude", amp_dim)?
        .ok_or_else(|| err(b.pos, ParseErrorKind::Missing("drive `amplitude`")))?;
    let frequency = b
        .quantity("frequency", Dim::Frequency)?
        .ok_or_else(|| err(b.pos, ParseErrorKind::Missing("drive `frequency`")))?;
    let waveform = if shape == "sinusoid" {
        Waveform::Sinusoid {
            amplitude,
            frequency,
            phase: b.quantity("phase", Dim::Angle)?.unwrap_or(0.0),
        }
    } else {
        Waveform::SquareWave {
            amplitude,
            frequency,
            duty: b.quantity("duty", Dim::Number)?.unwrap_or(0.5),
        }
    };
    b.reject_leftovers("drive")?;
    let drive = Drive { kind, waveform };
    drive
        .validate()
        .map_err(|e| err(b.pos, ParseErrorKind::Invalid(e.to_string())))?;
    Ok(drive)
}

fn resolve_network(
    b: &mut Block,
    drive: &Drive,
    default_r1: f64,
    warnings: &mut Vec<String>,
) -> Result<SwitchedNetwork, ParseError> {
    let mut warn = |key: &str, value: String| {
        warnings.push(format!("model key `{key}` missing, using default {value}"))
    };
    let constant = b.quantity("r1", Dim::Resistance)?;
    let high_pos = b
        .entries
        .get("r1_high")
        .or(b.entries.get("r1_low"))
        .or(b.entries.get("r1_period"))
        .map(|e| e.key_pos);
    let high = b.quantity("r1_high", Dim::Resistance)?;
    let low = b.quantity("r1_low", Dim::Resistance)?;
    let period = b.quantity("r1_period", Dim::Time)?;
    let r1 = match (constant, high_pos) {
        (Some(_), Some(p)) => {
            return Err(err(
                p,
                ParseErrorKind::Invalid(
                    "`r1` conflicts with `r1_high`/`r1_low`/`r1_period`".into(),
                ),
            ))
        }
        (Some(ohms), None) => R1::Constant { ohms },
        (None, Some(_)) => R1::Piecewise {
            high: high.unwrap_or_else(|| {
                warn("r1_high", "3 Ohm".into());
                3.0
            }),
            low: low.unwrap_or_else(|| {
                warn("r1_low", "1 Ohm".into());
                1.0
            }),
            period: period.unwrap_or_else(|| {
                warn("r1_period", "the drive period".into());
                drive.period()
            }),
        },
        (None, None) => {
            warn("r1", format!("{default_r1} Ohm"));
            R1::Constant { ohms: default_r1 }
        }
    };
    let r_branch = b.quantity("r_branch", Dim::Resistance)?.unwrap_or_else(|| {
        warn("r_branch", "0.3 Ohm".into());
        0.3
    });
    let n_switches = b.count("n_switches")?.unwrap_or_else(|| {
        warn("n_switches", "10".into());
        10
    });
    let q0_pos = b.entries.get("q0").map(|e| e.key_pos);
    let q0 = b.quantity("q0", Dim::Charge)?;
    let f_ref = b.quantity("q0_ref_frequency", Dim::Frequency)?;
    let q0 = match (q0, f_ref) {
        (Some(_), Some(_)) => {
            return Err(err(
                q0_pos.unwrap_or(b.pos),
                ParseErrorKind::Invalid("give either `q0` or `q0_ref_frequency`".into()),
            ))
        }
        (Some(q0), None) => q0,
        (None, Some(f)) => SwitchedNetwork::q0_for(drive.amplitude(), f, n_switches),
        (None, None) => {
            warn("q0", "2A/((n+1) w) at the drive frequency".into());
            SwitchedNetwork::q0_for(drive.amplitude(), drive.frequency(), n_switches)
        }
    };
    Ok(SwitchedNetwork {
        r1,
        r_branch,
        n_switches,
        q0,
    })
}

fn resolve_model(
    kind: &str,
    mut b: Block,
    drive: &Drive,
    warnings: &mut Vec<String>,
) -> Result<Model, ParseError> {
    let model = match kind {
        "thermistor" => {
            let d = Thermistor::default();
            let mut get = |key: &str, dim: Dim, default: f64| -> Result<f64, ParseError> {
                Ok(b.quantity(key, dim)?.unwrap_or_else(|| {
                    warnings.push(format!(
                        "model key `{key}` missing, using default {default}"
                    ));
                    default
                }))
            };
            Model::Thermistor(Thermistor {
                delta: get("delta", Dim::ThermalConductance, d.delta)?,
                r0: get("r0", Dim::Resistance, d.r0)?,
                t0: get("t0", Dim::Temperature, d.t0)?,
                beta: get("beta", Dim::Temperature, d.beta)?,
                c: get("c", Dim::HeatCapacity, d.c)?,
            })
        }
        "axon" => {
            let d = Axon::default();
            let hh_form = b.flag("hh_form")?.unwrap_or(false);
            let mut get = |key: &str, dim: Dim, default: f64| -> Result<f64, ParseError> {
                Ok(b.quantity(key, dim)?.unwrap_or_else(|| {
                    warnings.push(format!(
                        "model key `{key}` missing, using default {default}"
                    ));
                    default
                }))
            };
            Model::Axon(Axon {
                g_k: get("g_k", Dim::Conductance, d.g_k)?,
                e_k: get("e_k", Dim::Voltage, d.e_k)?,
                gamma: get("gamma", Dim::Number, d.gamma)?,
                v_hat: get("v_hat", Dim::Voltage, d.v_hat)?,
                tau: get("tau", Dim::Time, d.tau)?,
                hh_form,
            })
        }
        "switched" => Model::Switched(resolve_network(&mut b, drive, 1.0, warnings)?),
        "capacitor" => {
            let base = resolve_network(&mut b, drive, 3.0, warnings)?;
            let cap = b.quantity("cap", Dim::Capacitance)?.unwrap_or_else(|| {
                warnings.push("model key `cap` missing, using default 0.1 F".into());
                0.1
            });
            Model::Capacitor(CapacitorCircuit { base, cap })
        }
        _ => unreachable!("model kind checked while parsing"),
    };
    b.reject_leftovers(&format!("model {kind}"))?;
    model
        .validate()
        .map_err(|e| err(b.pos, ParseErrorKind::Invalid(e.to_string())))?;
    Ok(model)
}

fn resolve_controls(sim: Option<Block>, drive: &Drive) -> Result<SimControls, ParseError> {
    let mut c = SimControls::for_drive(drive);
    let Some(mut b) = sim else {
        return Ok(c);
    };
    if let Some(dt) = b.quantity("dt", Dim::Time)? {
        c.dt = dt;
        c.event_tolerance = dt * 1e-9;
    }
    if let Some(n) = b.count("transient_cycles")? {
        c.transient_cycles = n;
    }
    if let Some(n) = b.count("record_cycles")? {
        c.record_cycles = n;
    }
    if let Some(tol) = b.quantity("event_tolerance", Dim::Time)? {
        c.event_tolerance = tol;
    }
    if let Some(tol) = b.quantity("steady_state_rel_tol", Dim::Number)? {
        c.steady_state_rel_tol = tol;
    }
    b.reject_leftovers("sim")?;
    c.validate(drive.period())
        .map_err(|e| err(b.pos, ParseErrorKind::Invalid(e.to_string())))?;
    Ok(c)
}

/// Parses an experiment definition.
pub fn parse_experiment(text: &str) -> Result<ParsedExperiment, ParseError> {
    let toks = lex(text)?;
    let end = toks.last().map_or(Pos { line: 1, column: 1 }, |t| t.pos);
    let mut p = Parser { toks, at: 0, end };
    let st = parse_statements(&mut p)?;
    let start = Pos { line: 1, column: 1 };

    let (name, _) = st
        .name
        .ok_or_else(|| err(start, ParseErrorKind::Missing("`experiment` statement")))?;
    let (kind, kpos, shape, _, dblock) = st
        .drive
        .ok_or_else(|| err(start, ParseErrorKind::Missing("`drive` statement")))?;
    let (mkind, _, mblock) = st
        .model
        .ok_or_else(|| err(start, ParseErrorKind::Missing("`model` statement")))?;
    let drive = resolve_drive(kind, &shape, dblock)?;
    let mut warnings = Vec::new();
    let model = resolve_model(&mkind, mblock, &drive, &mut warnings)?;
    if !drive.kind.drives(model.input_kind()) {
        return Err(err(
            kpos,
            ParseErrorKind::KindMismatch(format!(
                "model `{mkind}` cannot be driven by a {} source",
                source_word(kind)
            )),
        ));
    }
    let controls = resolve_controls(st.sim, &drive)?;
    let analyses = st.analyze.map_or_else(Analyses::none, |(a, _)| a);
    let outputs = st.outputs.map(|(o, _)| o).unwrap_or_default();
    Ok(ParsedExperiment {
        config: ExperimentConfig {
            name,
            model,
            drive,
            controls,
            analyses,
            outputs,
        },
        warnings,
    })
}

fn source_word(kind: SourceKind) -> &'static str {
    match kind {
        SourceKind::CurrentSource => "current",
        SourceKind::VoltageSource => "voltage",
    }
}

// ---------------------------------------------------------------------------
// Serialization

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_network(out: &mut String, n: &SwitchedNetwork) {
    match n.r1 {
        R1::Constant { ohms } => write!(out, " r1={}", num(ohms)),
        R1::Piecewise { high, low, period } => write!(
            out,
            " r1_high={} r1_low={} r1_period={}",
            num(high),
            num(low),
            num(period)
        ),
    }
    .unwrap();
    write!(
        out,
        " r_branch={} n_switches={} q0={}",
        num(n.r_branch),
        n.n_switches,
        num(n.q0)
    )
    .unwrap();
}

/// Renders a configuration in the text format, with every value in bare SI
/// so that parsing the result reproduces `config` exactly.
pub fn to_dsl(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    writeln!(out, "experiment {}", config.name).unwrap();
    match &config.model {
        Model::Thermistor(m) => writeln!(
            out,
            "model thermistor {{ delta={} r0={} t0={} beta={} c={} }}",
            num(m.delta),
            num(m.r0),
            num(m.t0),
            num(m.beta),
            num(m.c)
        )
        .unwrap(),
        Model::Axon(m) => writeln!(
            out,
            "model axon {{ g_k={} e_k={} gamma={} v_hat={} tau={} hh_form={} }}",
            num(m.g_k),
            num(m.e_k),
            num(m.gamma),
            num(m.v_hat),
            num(m.tau),
            m.hh_form
        )
        .unwrap(),
        Model::Switched(n) => {
            out.push_str("model switched {");
            write_network(&mut out, n);
            out.push_str(" }\n");
        }
        Model::Capacitor(c) => {
            out.push_str("model capacitor {");
            write_network(&mut out, &c.base);
            writeln!(out, " cap={} }}", num(c.cap)).unwrap();
        }
    }
    let kind = source_word(config.drive.kind);
    match config.drive.waveform {
        Waveform::Sinusoid {
            amplitude,
            frequency,
            phase,
        } => writeln!(
            out,
            "drive {kind} sinusoid {{ amplitude={} frequency={} phase={} }}",
            num(amplitude),
            num(frequency),
            num(phase)
        ),
        Waveform::SquareWave {
            amplitude,
            frequency,
            duty,
        } => writeln!(
            out,
            "drive {kind} square {{ amplitude={} frequency={} duty={} }}",
            num(amplitude),
            num(frequency),
            num(duty)
        ),
    }
    .unwrap();
    let c = &config.controls;
    writeln!(
        out,
        "sim {{ dt={} transient_cycles={} record_cycles={} event_tolerance={} steady_state_rel_tol={} }}",
        num(c.dt),
        c.transient_cycles,
        c.record_cycles,
        num(c.event_tolerance),
        num(c.steady_state_rel_tol)
    )
    .unwrap();
    let a = &config.analyses;
    out.push_str("analyze {");
    for (on, name) in [
        (a.pinch, "pinch"),
        (a.loop_area, "loop_area"),
        (a.phi_q, "phi_q"),
        (a.linearity, "linearity"),
    ] {
        if on {
            write!(out, " {name}").unwrap();
        }
    }
    if let Some(freqs) = &a.sweep {
        let list: Vec<String> = freqs.iter().map(|f| num(*f)).collect();
        write!(out, " sweep({})", list.join(", ")).unwrap();
    }
    out.push_str(" }\n");
    if config.outputs.csv.is_some() || config.outputs.json.is_some() {
        out.push_str("output");
        if let Some(p) = &config.outputs.csv {
            write!(out, " csv \"{p}\"").unwrap();
        }
        if let Some(p) = &config.outputs.json {
            write!(out, " json \"{p}\"").unwrap();
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Presets

/// Name, one-line description and source text of each shipped preset,
/// sorted by name.
pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "fig12_13_sweep",
        "switched network, loop area vs frequency at fixed q0",
        include_str!("../presets/fig12_13_sweep.mlab"),
    ),
    (
        "fig14_15_tdr1",
        "switched network with periodic R1 at 0.1 Hz: flux drifts each cycle",
        include_str!("../presets/fig14_15_tdr1.mlab"),
    ),
    (
        "fig16_cap",
        "switched network with a capacitor across R1: loop no longer pinched",
        include_str!("../presets/fig16_cap.mlab"),
    ),
    (
        "fig17_tdr1_fast",
        "switched network with periodic R1 at 10 Hz: two linear segments",
        include_str!("../presets/fig17_tdr1_fast.mlab"),
    ),
    (
        "fig2_3",
        "thermistor at 1 uHz: no hysteresis, single-valued phi-q",
        include_str!("../presets/fig2_3.mlab"),
    ),
    (
        "fig4_5",
        "thermistor at 10 mHz: hysteresis, closed multivalued phi-q",
        include_str!("../presets/fig4_5.mlab"),
    ),
    (
        "fig6_7",
        "thermistor at 10 Hz: loop collapses to a line",
        include_str!("../presets/fig6_7.mlab"),
    ),
    (
        "fig8_9_switched",
        "charge-switched resistor network at 0.1 Hz: ideal memristor",
        include_str!("../presets/fig8_9_switched.mlab"),
    ),
    (
        "fig9_10_axon",
        "potassium channel at 50 mHz: pinched, charge drifts each cycle",
        include_str!("../presets/fig9_10_axon.mlab"),
    ),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, s)| *s)
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    preset_source(name).map(|src| {
        parse_experiment(src)
            .unwrap_or_else(|e| panic!("preset {name} does not parse: {e}"))
            .config
    })
}

/// Every shipped preset, sorted by name.
pub fn builtin_presets() -> Vec<ExperimentConfig> {
    PRESETS
        .iter()
        .map(|(n, _, _)| preset(n).expect("listed preset"))
        .collect()
}
