//! JSON snapshots of fitted densities.
//!
//! A snapshot carries everything needed to re-evaluate and re-sample a
//! boosted density: the reference parameters, and per round the classifier
//! weights, the step size, and the cumulative log normalizer. The document
//! shape:
//!
//! ```json
//! {
//!   "dim": 2,
//!   "q0": {"type": "isotropic", "mean": [0.0, 0.0], "sigma": 1.0},
//!   "rounds": [
//!     {"classifier": {...}, "alpha": 0.5, "log_z_cum": 0.31}
//!   ]
//! }
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{BoostedDensity, Density, ReferenceDensity};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotDoc {
    dim: usize,
    q0: ReferenceDensity,
    rounds: Vec<crate::dist::BoostRound>,
}

pub fn to_json(bd: &BoostedDensity) -> Result<String> {
    let doc = SnapshotDoc {
        dim: bd.dim(),
        q0: bd.q0().clone(),
        rounds: bd.rounds().to_vec(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))
}

pub fn from_json(json: &str) -> Result<BoostedDensity> {
    let doc: SnapshotDoc = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.q0.dim() != doc.dim {
        return Err(Error::Dimension {
            expected: doc.dim,
            got: doc.q0.dim(),
        });
    }
    BoostedDensity::from_parts(doc.q0, doc.rounds)
}

pub fn write_to(bd: &BoostedDensity, mut w: impl Write) -> Result<()> {
    w.write_all(to_json(bd)?.as_bytes())?;
    Ok(())
}

pub fn read_from(mut r: impl Read) -> Result<BoostedDensity> {
    let mut buf = String::new();
    r.read_to_string(&mut buf)?;
    from_json(&buf)
}

pub fn save(bd: &BoostedDensity, path: impl AsRef<Path>) -> Result<()> {
    write_to(bd, std::fs::File::create(path)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<BoostedDensity> {
    read_from(std::fs::File::open(path)?)
}
