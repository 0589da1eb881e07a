//! JSON encodings of matrices, c-q states and c-q channels.
//!
//! A matrix is `{"dim": n, "re": [[..]], "im": [[..]]}`; a state is
//! `{"px": [..], "dimY": n, "rhoY": [matrix, ..]}`; a channel is
//! `{"dimT": n, "classical": bool, "sigmaT": [matrix, ..]}`. The `*Json`
//! types are the raw documents; conversion into the model types runs every
//! invariant check and names the offending index on failure.

use serde::{Deserialize, Serialize};

use crate::cq::{CQChannel, CQState, CLASSICAL_OFFDIAG_TOL};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self {
            dim: m.dim(),
            re: m.real_parts(),
            im: m.imag_parts(),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let rows_ok =
            |rows: &[Vec<f64>]| rows.len() == self.dim && rows.iter().all(|r| r.len() == self.dim);
        if !rows_ok(&self.re) || !rows_ok(&self.im) {
            return Err(Error::SizeMismatch(format!(
                "\"re\" and \"im\" must both be {0}x{0}",
                self.dim
            )));
        }
        ComplexMatrix::from_parts(&self.re, &self.im)
    }

    fn to_density(&self, dim: usize) -> Result<DensityOperator> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        DensityOperator::from_matrix(self.to_matrix()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub px: Vec<f64>,
    #[serde(rename = "dimY")]
    pub dim_y: usize,
    #[serde(rename = "rhoY")]
    pub rho_y: Vec<MatrixJson>,
}

impl StateJson {
    pub fn from_state(state: &CQState) -> Self {
        Self {
            px: state.px().to_vec(),
            dim_y: state.dim_y(),
            rho_y: state
                .rho_y_given_x()
                .iter()
                .map(|r| MatrixJson::from_matrix(r.matrix()))
                .collect(),
        }
    }

    pub fn to_state(&self) -> Result<CQState> {
        if self.px.len() != self.rho_y.len() {
            return Err(Error::SizeMismatch(format!(
                "px has {} entries but rhoY has {}",
                self.px.len(),
                self.rho_y.len()
            )));
        }
        let rhos = densities(&self.rho_y, self.dim_y, "rhoY")?;
        CQState::new(self.px.clone(), rhos)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelJson {
    #[serde(rename = "dimT")]
    pub dim_t: usize,
    pub classical: bool,
    #[serde(rename = "sigmaT")]
    pub sigma_t: Vec<MatrixJson>,
}

impl ChannelJson {
    pub fn from_channel(channel: &CQChannel) -> Self {
        Self {
            dim_t: channel.dim_t(),
            classical: channel.is_classical(),
            sigma_t: channel
                .sigma_t_given_x()
                .iter()
                .map(|s| MatrixJson::from_matrix(s.matrix()))
                .collect(),
        }
    }

    pub fn to_channel(&self) -> Result<CQChannel> {
        let sigmas = densities(&self.sigma_t, self.dim_t, "sigmaT")?;
        if self.classical {
            if let Some(i) = sigmas
                .iter()
                .position(|s| !s.is_diagonal(CLASSICAL_OFFDIAG_TOL))
            {
                return Err(Error::InvalidDensity(format!(
                    "sigmaT[{i}]: classical channel entry is not diagonal"
                )));
            }
        }
        CQChannel::new(sigmas, self.classical)
    }
}

fn densities(ms: &[MatrixJson], dim: usize, field: &str) -> Result<Vec<DensityOperator>> {
    if dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "dimension for {field} must be positive"
        )));
    }
    ms.iter()
        .enumerate()
        .map(|(i, m)| {
            m.to_density(dim).map_err(|e| {
                let detail = match e {
                    Error::InvalidDensity(msg) => msg,
                    other => other.to_string(),
                };
                Error::InvalidDensity(format!("{field}[{i}]: {detail}"))
            })
        })
        .collect()
}

pub fn state_to_json(state: &CQState) -> String {
    serde_json::to_string_pretty(&StateJson::from_state(state)).expect("state serializes")
}

pub fn channel_to_json(channel: &CQChannel) -> String {
    serde_json::to_string_pretty(&ChannelJson::from_channel(channel)).expect("channel serializes")
}
