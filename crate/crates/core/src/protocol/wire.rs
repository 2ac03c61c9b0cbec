//! Length-prefixed JSON frames.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Matrix;
use crate::measures::{MeasureKind, MeasurementReport, QueryMatrix, WIRE_QUERY_TOL};

pub const DEFAULT_PORT: u16 = 7431;
pub const DEFAULT_FRAME_LIMIT: usize = 16 * 1024 * 1024;

/// Decimal places kept for projection entries on the wire.
const PROJECTION_DECIMALS: i32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Query(QueryMessage),
    Report(ReportMessage),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMessage {
    pub query_id: String,
    pub k: usize,
    pub d: usize,
    pub projection: Vec<Vec<f64>>,
    #[serde(default)]
    pub kinds: Vec<MeasureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMessage {
    pub query_id: String,
    pub seller_id: String,
    pub n_points: usize,
    pub mean_vector: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub projected_cov: Vec<Vec<f64>>,
    pub values: BTreeMap<MeasureKind, f64>,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (v * scale).round() / scale
}

impl QueryMessage {
    /// Builds a message from `q`, rounding projection entries to 8 decimals
    /// so the default query stays compact. Empty `kinds` requests everything.
    pub fn from_query(q: &QueryMatrix, kinds: &[MeasureKind], omega: Option<f64>) -> Self {
        QueryMessage {
            query_id: q.query_id.clone(),
            k: q.k(),
            d: q.dim(),
            projection: q
                .directions()
                .row_iter()
                .map(|r| r.iter().map(|&v| round_to(v, PROJECTION_DECIMALS)).collect())
                .collect(),
            kinds: kinds.to_vec(),
            omega,
        }
    }

    /// Validates shape and orthonormality (at the looser wire tolerance).
    pub fn to_query(&self) -> Result<QueryMatrix> {
        if self.projection.len() != self.k || self.projection.iter().any(|r| r.len() != self.d) {
            return Err(Error::InvalidQuery(format!(
                "projection shape does not match k = {}, d = {}",
                self.k, self.d
            )));
        }
        if let Some(w) = self.omega {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidQuery(format!("omega must be positive, got {w}")));
            }
        }
        let m = Matrix::from_rows(&self.projection).map_err(|e| Error::InvalidQuery(e.to_string()))?;
        QueryMatrix::with_tolerance(m, self.query_id.clone(), WIRE_QUERY_TOL)
    }
}

impl ReportMessage {
    pub fn from_report(r: &MeasurementReport, query_id: &str, seller_id: &str, kinds: &[MeasureKind]) -> Self {
        let wanted = |k: MeasureKind| kinds.is_empty() || kinds.contains(&k);
        let values = [
            (MeasureKind::Volume, r.volume),
            (MeasureKind::RobustVolume, r.robust_volume),
            (MeasureKind::Vendi, r.vendi),
            (MeasureKind::Dispersion, r.dispersion),
        ]
        .into_iter()
        .filter(|&(k, _)| wanted(k))
        .collect();
        ReportMessage {
            query_id: query_id.to_string(),
            seller_id: seller_id.to_string(),
            n_points: r.n_points,
            mean_vector: r.mean_vector.clone(),
            lambdas: r.lambdas.clone(),
            projected_cov: r.projected_cov.to_rows(),
            values,
        }
    }

    /// Checks field shapes against the query dimensions.
    pub fn validate(&self, k: usize, d: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Schema(format!("{what} has the wrong shape")));
        if self.mean_vector.len() != d {
            return bad("mean_vector");
        }
        if self.lambdas.len() != k {
            return bad("lambdas");
        }
        if self.projected_cov.len() != k || self.projected_cov.iter().any(|r| r.len() != k) {
            return bad("projected_cov");
        }
        if self.n_points == 0 {
            return Err(Error::Schema("n_points must be positive".into()));
        }
        Ok(())
    }

    /// Converts back to a report; every scalar diversity value must be present.
    pub fn to_report(&self) -> Result<MeasurementReport> {
        let k = self.lambdas.len();
        self.validate(k, self.mean_vector.len())?;
        let get = |kind: MeasureKind| {
            self.values
                .get(&kind)
                .copied()
                .ok_or_else(|| Error::Schema(format!("report lacks '{kind}'")))
        };
        let projected_cov = if k == 0 {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&self.projected_cov).map_err(|e| Error::Schema(e.to_string()))?
        };
        Ok(MeasurementReport {
            mean_vector: self.mean_vector.clone(),
            lambdas: self.lambdas.clone(),
            projected_cov,
            volume: get(MeasureKind::Volume)?,
            robust_volume: get(MeasureKind::RobustVolume)?,
            vendi: get(MeasureKind::Vendi)?,
            dispersion: get(MeasureKind::Dispersion)?,
            n_points: self.n_points,
        })
    }
}

pub fn encode(msg: &Message) -> Result<Vec<u8>> {
    serde_json::to_vec(msg).map_err(|e| Error::Protocol(e.to_string()))
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    let body = encode(msg)?;
    let len = u32::try_from(body.len()).map_err(|_| Error::Protocol("frame too large".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Outcome of reading one frame.
#[derive(Debug)]
pub enum Frame {
    Message(Message),
    /// The peer closed the stream before sending a length prefix.
    Closed,
}

/// Reads one frame. An oversized length prefix is rejected before any body
/// bytes are read.
pub fn read_frame<R: Read>(r: &mut R, limit: usize) -> Result<Frame> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(Frame::Closed),
            Ok(0) => return Err(Error::Protocol("truncated length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Io(e)),
        }
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > limit {
        return Err(Error::Protocol(format!("frame of {len} bytes exceeds limit {limit}")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Protocol("truncated frame".into()),
        _ => Error::Io(e),
    })?;
    serde_json::from_slice(&body)
        .map(Frame::Message)
        .map_err(|e| Error::Protocol(format!("malformed message: {e}")))
}
