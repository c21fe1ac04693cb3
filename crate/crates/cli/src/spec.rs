//! Named states and channels, or JSON files.
//!
//! Channels: `rotation:θ[:l]`, `replacement:<state>`, `identity:d`,
//! `dephasing:d`, or a channel file. States: `maxcoh:m`, `psi_m:m`, `plus`,
//! `pure:a0,a1,...`, `basis:d:i`, `mixed:d`, or a state file.

use std::path::Path;

use cohsim::io::{read_channel, read_state};
use cohsim::quantum::{rotation_unitary, DensityMatrix, PureState, QuantumChannel};

use crate::CliError;

/// Input dimension used for replacement channels given by name.
pub const REPLACEMENT_DIM_IN: usize = 2;

fn bad(spec: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("`{spec}`: {why}"))
}

fn num<T: std::str::FromStr>(spec: &str, s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| bad(spec, format!("cannot parse `{s}` as a number")))
}

fn lib(spec: &str, e: cohsim::Error) -> CliError {
    match e {
        cohsim::Error::Io(io) => bad(spec, io),
        other => bad(spec, other),
    }
}

pub fn parse_state(spec: &str) -> Result<DensityMatrix, CliError> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match head {
        "maxcoh" | "psi_m" => {
            DensityMatrix::maximally_coherent(num(spec, rest)?).map_err(|e| lib(spec, e))
        }
        "plus" if rest.is_empty() => Ok(DensityMatrix::plus()),
        "mixed" => DensityMatrix::maximally_mixed(num(spec, rest)?).map_err(|e| lib(spec, e)),
        "basis" => {
            let (d, i) = rest
                .split_once(':')
                .ok_or_else(|| bad(spec, "expected basis:d:i"))?;
            DensityMatrix::basis(num(spec, d)?, num(spec, i)?).map_err(|e| lib(spec, e))
        }
        "pure" => {
            let amps = rest
                .split(',')
                .map(|a| num(spec, a))
                .collect::<Result<Vec<f64>, _>>()?;
            let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(bad(spec, "amplitudes must have a finite nonzero norm"));
            }
            let unit: Vec<f64> = amps.iter().map(|a| a / norm).collect();
            Ok(PureState::from_real(&unit)
                .map_err(|e| lib(spec, e))?
                .projector())
        }
        _ => read_state(Path::new(spec)).map_err(|e| lib(spec, e)),
    }
}

pub fn parse_channel(spec: &str) -> Result<QuantumChannel, CliError> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match head {
        "rotation" => {
            let mut parts = rest.split(':');
            let theta: f64 = num(spec, parts.next().unwrap_or(""))?;
            let l: usize = match parts.next() {
                Some(l) => num(spec, l)?,
                None => 1,
            };
            if parts.next().is_some() {
                return Err(bad(spec, "expected rotation:θ[:l]"));
            }
            QuantumChannel::from_unitary(&rotation_unitary(theta))
                .and_then(|u| u.tensor_power(l))
                .map_err(|e| lib(spec, e))
        }
        "replacement" => {
            let sigma = parse_state(rest)?;
            QuantumChannel::replacement(&sigma, REPLACEMENT_DIM_IN).map_err(|e| lib(spec, e))
        }
        "identity" => QuantumChannel::identity(num(spec, rest)?).map_err(|e| lib(spec, e)),
        "dephasing" => {
            QuantumChannel::completely_dephasing(num(spec, rest)?).map_err(|e| lib(spec, e))
        }
        _ => read_channel(Path::new(spec)).map_err(|e| lib(spec, e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_states() {
        assert_eq!(parse_state("maxcoh:3").unwrap().dim(), 3);
        assert_eq!(parse_state("plus").unwrap(), DensityMatrix::plus());
        let p = parse_state("pure:3,4").unwrap();
        assert!((p.matrix()[(0, 0)].re - 0.36).abs() < 1e-15);
        assert!(parse_state("pure:0,0").is_err());
        assert!(parse_state("maxcoh:x").is_err());
    }

    #[test]
    fn named_channels() {
        assert_eq!(parse_channel("rotation:0.3:2").unwrap().dim_in(), 4);
        assert_eq!(parse_channel("rotation:0.3").unwrap().dim_in(), 2);
        let r = parse_channel("replacement:psi_m:4").unwrap();
        assert_eq!((r.dim_in(), r.dim_out()), (2, 4));
        assert!(parse_channel("dephasing:0").is_err());
        assert!(matches!(
            parse_channel("/no/such/file.json"),
            Err(CliError::Parse(_))
        ));
    }
}
