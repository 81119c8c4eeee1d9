//! Plain-text model snapshots.
//!
//! ```text
//! qcp-gmm v1
//! dim <G>
//! components <K>
//! prior <p>
//! mean <G values>
//! cov <G*G values, row-major>
//! ... (prior/mean/cov repeated K times)
//! ```
//!
//! Values are whitespace separated and written with Rust's shortest
//! round-trip float formatting, so a written model reads back bit-exact.

use std::fmt::Write as _;

use super::{Component, MixtureModel};
use crate::error::{QcpError, Result};

const MAGIC: &str = "qcp-gmm v1";

impl MixtureModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "dim {}", self.dim);
        let _ = writeln!(out, "components {}", self.components.len());
        for c in &self.components {
            let _ = writeln!(out, "prior {}", c.prior);
            let _ = writeln!(out, "mean {}", join(&c.mean));
            let _ = writeln!(out, "cov {}", join(&c.covariance));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (n, magic) = lines.next().ok_or(QcpError::Parse {
            line: 1,
            message: "empty model file".into(),
        })?;
        if magic != MAGIC {
            return Err(QcpError::Parse {
                line: n,
                message: format!("expected header `{MAGIC}`"),
            });
        }
        let mut field = |key: &str| -> Result<(usize, Vec<f64>)> {
            let (n, line) = lines.next().ok_or(QcpError::Parse {
                line: 0,
                message: format!("missing `{key}` line"),
            })?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(QcpError::Parse {
                    line: n,
                    message: format!("expected `{key}`"),
                });
            }
            let values = parts
                .map(|p| {
                    p.parse::<f64>().map_err(|e| QcpError::Parse {
                        line: n,
                        message: format!("bad number `{p}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((n, values))
        };
        let single = |(n, v): (usize, Vec<f64>)| -> Result<f64> {
            match v.as_slice() {
                [x] => Ok(*x),
                _ => Err(QcpError::Parse {
                    line: n,
                    message: "expected a single value".into(),
                }),
            }
        };
        let dim = single(field("dim")?)? as usize;
        let k = single(field("components")?)? as usize;
        let mut components = Vec::with_capacity(k);
        for _ in 0..k {
            let prior = single(field("prior")?)?;
            let (n, mean) = field("mean")?;
            if mean.len() != dim {
                return Err(QcpError::Parse {
                    line: n,
                    message: format!("expected {dim} mean values"),
                });
            }
            let (n, covariance) = field("cov")?;
            if covariance.len() != dim * dim {
                return Err(QcpError::Parse {
                    line: n,
                    message: format!("expected {} covariance values", dim * dim),
                });
            }
            components.push(Component {
                prior,
                mean,
                covariance,
            });
        }
        MixtureModel::new(components)
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
