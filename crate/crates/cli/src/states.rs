//! Parsers for state expressions and channel descriptions.
//!
//! A state is a sum of channel terms such as `c5+c8`, `c5-ic8` or
//! `c5+c6+ic7+c8+c9`; `psi1` and `psi2` name the five-channel
//! superpositions. A channel is `identity`, `depolarizing:p` or
//! `dephasing:p`.

use qmem_core::linalg::c;
use qmem_core::{ComplexVector, ProcessMatrix, PureState, C64};

use crate::error::CliError;

pub const FIRST_CHANNEL: usize = 5;

/// Channels 5, 6, ... covering `dim` paths.
pub fn default_channels(dim: usize) -> Vec<usize> {
    (FIRST_CHANNEL..FIRST_CHANNEL + dim).collect()
}

fn expand_alias(expr: &str) -> &str {
    match expr {
        "psi1" => "c5+c6+c7+c8+c9",
        "psi2" => "c5+c6+ic7+c8+c9",
        other => other,
    }
}

/// `(channel, coefficient)` terms of an expression.
pub fn parse_terms(expr: &str) -> Result<Vec<(usize, C64)>, CliError> {
    let text: String = expand_alias(expr.trim()).chars().filter(|ch| !ch.is_whitespace()).collect();
    let bad = |why: &str| CliError::Config(format!("state '{expr}': {why}"));
    let mut terms = Vec::new();
    let mut rest = text.as_str();
    while !rest.is_empty() {
        let mut sign = 1.0;
        if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        } else if let Some(r) = rest.strip_prefix('-') {
            sign = -1.0;
            rest = r;
        } else if !terms.is_empty() {
            return Err(bad("terms must be joined by + or -"));
        }
        let imaginary = rest.starts_with('i');
        if imaginary {
            rest = &rest[1..];
        }
        rest = rest
            .strip_prefix('c')
            .or_else(|| rest.strip_prefix('C'))
            .ok_or_else(|| bad("expected a channel term like c5"))?;
        let digits = rest.chars().take_while(char::is_ascii_digit).count();
        if digits == 0 {
            return Err(bad("missing channel number"));
        }
        let channel: usize = rest[..digits].parse().map_err(|_| bad("channel number"))?;
        rest = &rest[digits..];
        let coeff = if imaginary { c(0.0, sign) } else { c(sign, 0.0) };
        if terms.iter().any(|(ch, _)| *ch == channel) {
            return Err(bad("channel repeated"));
        }
        terms.push((channel, coeff));
    }
    if terms.is_empty() {
        return Err(bad("empty expression"));
    }
    Ok(terms)
}

/// Normalized state over `channels`, one amplitude per listed channel.
pub fn parse_state(expr: &str, channels: &[usize]) -> Result<PureState, CliError> {
    let terms = parse_terms(expr)?;
    let mut v = ComplexVector::zeros(channels.len());
    for (ch, coeff) in terms {
        let k = channels
            .iter()
            .position(|&x| x == ch)
            .ok_or_else(|| CliError::Config(format!("state '{expr}' uses channel {ch} outside {channels:?}")))?;
        v[k] = coeff;
    }
    Ok(PureState::normalized(v)?)
}

pub fn parse_channel(spec: &str, dim: usize) -> Result<ProcessMatrix, CliError> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let value = || -> Result<f64, CliError> {
        arg.ok_or_else(|| CliError::Config(format!("channel '{spec}' needs a parameter")))?
            .parse()
            .map_err(|_| CliError::Config(format!("channel '{spec}': parameter is not a number")))
    };
    Ok(match name {
        "identity" => ProcessMatrix::identity(dim)?,
        "depolarizing" => ProcessMatrix::depolarizing(dim, value()?)?,
        "dephasing" => ProcessMatrix::dephasing(dim, value()?)?,
        _ => return Err(CliError::Config(format!("unknown channel '{spec}'"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions() {
        let s = parse_state("c5+ic8", &[5, 6, 7, 8]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0] - c(h, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[3] - c(0.0, h)).norm() < 1e-15);
        let psi2 = parse_state("psi2", &default_channels(5)).unwrap();
        assert!((psi2.amplitudes()[2] - c(0.0, 1.0 / 5f64.sqrt())).norm() < 1e-15);
        let neg = parse_terms("c5-ic6").unwrap();
        assert_eq!(neg[1], (6, c(0.0, -1.0)));
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "c", "x5", "c5c6", "c5+c5", "c5+"] {
            assert!(parse_terms(bad).is_err(), "{bad}");
        }
        assert!(parse_state("c3", &[5, 6]).is_err());
        assert!(parse_channel("amplitude:0.1", 2).is_err());
        assert!(parse_channel("depolarizing", 2).is_err());
        assert!(parse_channel("depolarizing:0.1", 2).is_ok());
    }
}
