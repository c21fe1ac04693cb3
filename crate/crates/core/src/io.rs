//! JSON text format for states and channels.
//!
//! A state is `{"dim": d, "matrix": [[[re, im], ...], ...]}`; a channel is
//! `{"dim_in": a, "dim_out": b, "matrix": ...}` holding its Choi matrix on
//! `A ⊗ B`. Numbers are written with full round-trip precision.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{ComplexMatrix, DensityMatrix, QuantumChannel};

type Rows = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
struct StateFile {
    dim: usize,
    matrix: Rows,
}

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    dim_in: usize,
    dim_out: usize,
    matrix: Rows,
}

pub fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>], dim: usize) -> Result<ComplexMatrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Parse(format!("matrix is not {dim}x{dim}")));
    }
    Ok(ComplexMatrix::from_fn(dim, dim, |r, c| {
        let [re, im] = rows[r][c];
        Complex64::new(re, im)
    }))
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn state_from_json(text: &str) -> Result<DensityMatrix> {
    let f: StateFile = serde_json::from_str(text).map_err(json_err)?;
    DensityMatrix::new(matrix_from_rows(&f.matrix, f.dim)?)
}

pub fn state_to_json(rho: &DensityMatrix) -> String {
    let f = StateFile {
        dim: rho.dim(),
        matrix: matrix_to_rows(rho.matrix()),
    };
    serde_json::to_string_pretty(&f).expect("plain data serializes")
}

/// Parses a CPTP channel; the Choi matrix is validated.
pub fn channel_from_json(text: &str) -> Result<QuantumChannel> {
    let f: ChannelFile = serde_json::from_str(text).map_err(json_err)?;
    let choi = matrix_from_rows(&f.matrix, f.dim_in * f.dim_out)?;
    QuantumChannel::from_choi(f.dim_in, f.dim_out, choi)
}

/// Parses any linear map without CPTP validation.
pub fn map_from_json(text: &str) -> Result<QuantumChannel> {
    let f: ChannelFile = serde_json::from_str(text).map_err(json_err)?;
    let choi = matrix_from_rows(&f.matrix, f.dim_in * f.dim_out)?;
    QuantumChannel::from_choi_unchecked(f.dim_in, f.dim_out, choi)
}

pub fn channel_to_json(ch: &QuantumChannel) -> String {
    let f = ChannelFile {
        dim_in: ch.dim_in(),
        dim_out: ch.dim_out(),
        matrix: matrix_to_rows(ch.choi()),
    };
    serde_json::to_string_pretty(&f).expect("plain data serializes")
}

pub fn read_state(path: &Path) -> Result<DensityMatrix> {
    state_from_json(&std::fs::read_to_string(path)?)
}

pub fn read_channel(path: &Path) -> Result<QuantumChannel> {
    channel_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_round_trip() {
        let rho = DensityMatrix::maximally_coherent(3).unwrap();
        let back = state_from_json(&state_to_json(&rho)).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn channel_round_trip_is_exact() {
        let u = QuantumChannel::from_unitary(&crate::quantum::rotation_unitary(0.7)).unwrap();
        let back = channel_from_json(&channel_to_json(&u)).unwrap();
        assert_eq!(back.choi(), u.choi());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            state_from_json(r#"{"dim": 2, "matrix": [[[1, 0]]]}"#),
            Err(Error::Parse(_))
        ));
        assert!(state_from_json("not json").is_err());
    }
}
