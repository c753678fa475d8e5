//! Line-oriented parser and printer for protocol sequence scripts.
//!
//! Grammar (UTF-8, `#` starts a comment):
//!
//! ```text
//! shuttle <particle: p|be> <zone: a|b|c|d>
//! pulse <type: carrier|bsb|rsb|raman_bsb|raman_rsb> <particle> theta=<expr>
//!       [phi=<expr>] [detuning_hz=<number>] [duration_s=<number>]
//! exchange theta=<expr> | exchange duration_s=<number>
//! pump <particle> | cool nbar=<number> | detect <particle>
//! ```
//!
//! `<expr>` admits numbers and the literal `pi` joined by `*` and `/`.
//! Printing a parsed sequence yields text that reparses to the identical
//! sequence (numbers are emitted with round-trip precision).

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{ExchangeSpec, PulseKind, Sequence, Step, StepKind};
use crate::trap::{Particle, ZoneId};

#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    Syntax { line: u32, column: u32, message: String },
    UnknownKeyword { line: u32, column: u32, word: String },
    MalformedNumber { line: u32, column: u32, text: String },
}

impl ParseError {
    pub fn line(&self) -> u32 {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UnknownKeyword { line, .. }
            | ParseError::MalformedNumber { line, .. } => *line,
        }
    }

    pub fn column(&self) -> u32 {
        match self {
            ParseError::Syntax { column, .. }
            | ParseError::UnknownKeyword { column, .. }
            | ParseError::MalformedNumber { column, .. } => *column,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { line, column, message } => {
                write!(f, "{line}:{column}: {message}")
            }
            ParseError::UnknownKeyword { line, column, word } => {
                write!(f, "{line}:{column}: unknown keyword `{word}`")
            }
            ParseError::MalformedNumber { line, column, text } => {
                write!(f, "{line}:{column}: malformed number `{text}`")
            }
        }
    }
}

struct Token<'a> {
    column: u32,
    text: &'a str,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let body = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, ch) in body.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token { column: s as u32 + 1, text: &body[s..idx] });
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    if let Some(s) = start {
        tokens.push(Token { column: s as u32 + 1, text: &body[s..] });
    }
    tokens
}

/// Evaluates `<expr>`: numbers and `pi` joined by `*` and `/`.
fn eval_expr(text: &str, line: u32, column: u32) -> Result<f64, ParseError> {
    let malformed = || ParseError::MalformedNumber {
        line,
        column,
        text: text.to_string(),
    };
    let mut value = 1.0_f64;
    let mut divide = false;
    let mut factor_start = 0usize;
    let bytes = text.as_bytes();
    let consume = |factor: &str, divide: bool, value: &mut f64| -> Result<(), ParseError> {
        let v = if factor == "pi" {
            core::f64::consts::PI
        } else {
            factor.parse::<f64>().map_err(|_| malformed())?
        };
        if divide {
            *value /= v;
        } else {
            *value *= v;
        }
        Ok(())
    };
    for i in 0..=bytes.len() {
        let at_op = i < bytes.len() && (bytes[i] == b'*' || bytes[i] == b'/');
        if i == bytes.len() || at_op {
            let factor = &text[factor_start..i];
            if factor.is_empty() {
                return Err(malformed());
            }
            // exponent signs like 1e-7 never collide: '*' and '/' cannot
            // appear inside a float literal
            consume(factor, divide, &mut value)?;
            if at_op {
                divide = bytes[i] == b'/';
                factor_start = i + 1;
            }
        }
    }
    Ok(value)
}

fn parse_number(text: &str, line: u32, column: u32) -> Result<f64, ParseError> {
    text.parse::<f64>().map_err(|_| ParseError::MalformedNumber {
        line,
        column,
        text: text.to_string(),
    })
}

fn parse_particle(tok: &Token<'_>, line: u32) -> Result<Particle, ParseError> {
    Particle::from_tag(tok.text).ok_or_else(|| ParseError::Syntax {
        line,
        column: tok.column,
        message: alloc::format!("unknown particle `{}` (expected p or be)", tok.text),
    })
}

/// key=value arguments after the positional tokens.
struct Args<'a> {
    entries: Vec<(Token<'a>, &'a str)>,
    line: u32,
}

impl<'a> Args<'a> {
    fn parse(tokens: &'a [Token<'a>], line: u32) -> Result<Self, ParseError> {
        let mut entries = Vec::new();
        for tok in tokens {
            let Some(eq) = tok.text.find('=') else {
                return Err(ParseError::Syntax {
                    line,
                    column: tok.column,
                    message: alloc::format!("expected key=value argument, got `{}`", tok.text),
                });
            };
            let key = &tok.text[..eq];
            let value = &tok.text[eq + 1..];
            if key.is_empty() || value.is_empty() {
                return Err(ParseError::Syntax {
                    line,
                    column: tok.column,
                    message: alloc::format!("expected key=value argument, got `{}`", tok.text),
                });
            }
            if entries.iter().any(|(t, _): &(Token<'_>, &str)| Self::key_of(t) == key) {
                return Err(ParseError::Syntax {
                    line,
                    column: tok.column,
                    message: alloc::format!("duplicate argument `{key}`"),
                });
            }
            entries.push((Token { column: tok.column, text: tok.text }, value));
        }
        Ok(Args { entries, line })
    }

    fn key_of<'t>(entry: &Token<'t>) -> &'t str {
        let eq = entry.text.find('=').unwrap();
        &entry.text[..eq]
    }

    fn take_expr(&self, key: &str) -> Result<Option<f64>, ParseError> {
        for (tok, value) in &self.entries {
            if Self::key_of(tok) == key {
                return eval_expr(value, self.line, tok.column).map(Some);
            }
        }
        Ok(None)
    }

    fn take_number(&self, key: &str) -> Result<Option<f64>, ParseError> {
        for (tok, value) in &self.entries {
            if Self::key_of(tok) == key {
                return parse_number(value, self.line, tok.column).map(Some);
            }
        }
        Ok(None)
    }

    fn check_known(&self, known: &[&str]) -> Result<(), ParseError> {
        for (tok, _) in &self.entries {
            let key = Self::key_of(tok);
            if !known.contains(&key) {
                return Err(ParseError::Syntax {
                    line: self.line,
                    column: tok.column,
                    message: alloc::format!("unknown argument `{key}`"),
                });
            }
        }
        Ok(())
    }
}

fn parse_line(tokens: &[Token<'_>], line: u32) -> Result<StepKind, ParseError> {
    let cmd = &tokens[0];
    match cmd.text {
        "shuttle" => {
            let [_, particle, zone] = tokens else {
                return Err(ParseError::Syntax {
                    line,
                    column: cmd.column,
                    message: "shuttle takes exactly two arguments: <particle> <zone>".into(),
                });
            };
            let particle = parse_particle(particle, line)?;
            let zone = ZoneId::from_tag(zone.text).ok_or_else(|| ParseError::Syntax {
                line,
                column: zone.column,
                message: alloc::format!("unknown zone `{}` (expected a, b, c or d)", zone.text),
            })?;
            Ok(StepKind::Shuttle { particle, zone })
        }
        "pulse" => {
            if tokens.len() < 3 {
                return Err(ParseError::Syntax {
                    line,
                    column: cmd.column,
                    message: "pulse needs a type, a particle and theta=<expr>".into(),
                });
            }
            let kind = PulseKind::from_tag(tokens[1].text).ok_or_else(|| {
                ParseError::UnknownKeyword {
                    line,
                    column: tokens[1].column,
                    word: tokens[1].text.to_string(),
                }
            })?;
            let particle = parse_particle(&tokens[2], line)?;
            let args = Args::parse(&tokens[3..], line)?;
            args.check_known(&["theta", "phi", "detuning_hz", "duration_s"])?;
            let theta = args.take_expr("theta")?.ok_or_else(|| ParseError::Syntax {
                line,
                column: cmd.column,
                message: "pulse requires theta=<expr>".into(),
            })?;
            Ok(StepKind::Pulse {
                kind,
                particle,
                theta,
                phi: args.take_expr("phi")?.unwrap_or(0.0),
                detuning_hz: args.take_number("detuning_hz")?.unwrap_or(0.0),
                duration_s: args.take_number("duration_s")?.unwrap_or(1.0),
            })
        }
        "exchange" => {
            let args = Args::parse(&tokens[1..], line)?;
            args.check_known(&["theta", "duration_s"])?;
            let theta = args.take_expr("theta")?;
            let duration = args.take_number("duration_s")?;
            match (theta, duration) {
                (Some(theta), None) => Ok(StepKind::Exchange(ExchangeSpec::Theta(theta))),
                (None, Some(d)) => Ok(StepKind::Exchange(ExchangeSpec::Duration(d))),
                _ => Err(ParseError::Syntax {
                    line,
                    column: cmd.column,
                    message: "exchange takes exactly one of theta=<expr> or duration_s=<number>"
                        .into(),
                }),
            }
        }
        "pump" | "detect" => {
            let [_, particle] = tokens else {
                return Err(ParseError::Syntax {
                    line,
                    column: cmd.column,
                    message: alloc::format!("{} takes exactly one particle argument", cmd.text),
                });
            };
            let particle = parse_particle(particle, line)?;
            Ok(if cmd.text == "pump" {
                StepKind::Pump { particle }
            } else {
                StepKind::Detect { particle }
            })
        }
        "cool" => {
            let args = Args::parse(&tokens[1..], line)?;
            args.check_known(&["nbar"])?;
            let nbar = args.take_number("nbar")?.ok_or_else(|| ParseError::Syntax {
                line,
                column: cmd.column,
                message: "cool requires nbar=<number>".into(),
            })?;
            Ok(StepKind::Cool { nbar })
        }
        other => Err(ParseError::UnknownKeyword {
            line,
            column: cmd.column,
            word: other.to_string(),
        }),
    }
}

/// Parses a sequence script, collecting every positioned error.
pub fn parse_sequence(text: &str) -> Result<Sequence, Vec<ParseError>> {
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u32 + 1;
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            continue;
        }
        let column = tokens[0].column;
        match parse_line(&tokens, line) {
            Ok(kind) => steps.push(Step { kind, line, column }),
            Err(err) => errors.push(err),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    if steps.is_empty() {
        return Err(alloc::vec![ParseError::Syntax {
            line: 0,
            column: 0,
            message: "sequence contains no steps".into(),
        }]);
    }
    Ok(Sequence { name: String::new(), steps })
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepKind::Shuttle { particle, zone } => write!(f, "shuttle {particle} {zone}"),
            StepKind::Pulse { kind, particle, theta, phi, detuning_hz, duration_s } => {
                write!(f, "pulse {} {particle} theta={theta}", kind.tag())?;
                if *phi != 0.0 {
                    write!(f, " phi={phi}")?;
                }
                if *detuning_hz != 0.0 {
                    write!(f, " detuning_hz={detuning_hz}")?;
                }
                if *duration_s != 1.0 {
                    write!(f, " duration_s={duration_s}")?;
                }
                Ok(())
            }
            StepKind::Exchange(ExchangeSpec::Theta(theta)) => write!(f, "exchange theta={theta}"),
            StepKind::Exchange(ExchangeSpec::Duration(d)) => {
                write!(f, "exchange duration_s={d}")
            }
            StepKind::Pump { particle } => write!(f, "pump {particle}"),
            StepKind::Cool { nbar } => write!(f, "cool nbar={nbar}"),
            StepKind::Detect { particle } => write!(f, "detect {particle}"),
        }
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{}", step.kind)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::detection_sequence_text;

    #[test]
    fn parses_two_step_script() {
        let seq = parse_sequence("shuttle p b\npulse bsb p theta=pi").unwrap();
        assert_eq!(seq.steps.len(), 2);
        assert_eq!(
            seq.steps[0].kind,
            StepKind::Shuttle { particle: Particle::Proton, zone: ZoneId::B }
        );
        match &seq.steps[1].kind {
            StepKind::Pulse { kind: PulseKind::BlueSideband, theta, .. } => {
                assert_eq!(*theta, core::f64::consts::PI);
            }
            other => panic!("unexpected step {other:?}"),
        }
    }

    #[test]
    fn parses_exchange_theta_expression() {
        let seq = parse_sequence("exchange theta=pi/2").unwrap();
        assert_eq!(
            seq.steps[0].kind,
            StepKind::Exchange(ExchangeSpec::Theta(core::f64::consts::FRAC_PI_2))
        );
        let seq = parse_sequence("exchange theta=3*pi/4").unwrap();
        assert_eq!(
            seq.steps[0].kind,
            StepKind::Exchange(ExchangeSpec::Theta(3.0 * core::f64::consts::PI / 4.0))
        );
    }

    #[test]
    fn unknown_zone_is_positioned_syntax_error() {
        let errs = parse_sequence("shuttle p q").unwrap_err();
        assert_eq!(errs.len(), 1);
        match &errs[0] {
            ParseError::Syntax { line: 1, column, message } => {
                assert_eq!(*column, 11);
                assert!(message.contains("unknown zone `q`"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn collects_every_error_with_positions() {
        let errs = parse_sequence("warp p b\nshuttle p b\npulse bsb p theta=1..5\ncool\n").unwrap_err();
        assert_eq!(errs.len(), 3);
        assert!(matches!(&errs[0], ParseError::UnknownKeyword { line: 1, word, .. } if word == "warp"));
        assert!(matches!(&errs[1], ParseError::MalformedNumber { line: 3, .. }));
        assert!(matches!(&errs[2], ParseError::Syntax { line: 4, .. }));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let seq = parse_sequence("# header\n\nshuttle be d  # trailing comment\n").unwrap();
        assert_eq!(seq.steps.len(), 1);
        assert_eq!(seq.steps[0].line, 3);
    }

    #[test]
    fn empty_script_is_an_error() {
        assert!(parse_sequence("# nothing here\n").is_err());
    }

    #[test]
    fn print_parse_roundtrip_is_idempotent() {
        let text = "shuttle p b\npulse bsb p theta=pi phi=pi/3 detuning_hz=-12.5 duration_s=0.002\nexchange theta=pi/2\npump be\ncool nbar=0.05\ndetect be\nexchange duration_s=1e-5\n";
        let first = parse_sequence(text).unwrap();
        let printed = alloc::format!("{first}");
        let second = parse_sequence(&printed).unwrap();
        assert_eq!(first, second);
        // a second print is the fixed point
        assert_eq!(printed, alloc::format!("{second}"));
    }

    #[test]
    fn canonical_sequence_text_roundtrips() {
        let text = detection_sequence_text();
        let first = parse_sequence(&text).unwrap();
        let second = parse_sequence(&alloc::format!("{first}")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn duplicate_argument_rejected() {
        let errs = parse_sequence("pulse carrier p theta=1 theta=2").unwrap_err();
        assert!(matches!(&errs[0], ParseError::Syntax { message, .. } if message.contains("duplicate")));
    }

    #[test]
    fn unknown_argument_rejected() {
        let errs = parse_sequence("pulse carrier p theta=1 power=9").unwrap_err();
        assert!(matches!(&errs[0], ParseError::Syntax { message, .. } if message.contains("unknown argument")));
    }
}
