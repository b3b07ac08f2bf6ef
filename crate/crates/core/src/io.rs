//! Field persistence.
//!
//! Binary layout (`.frfld`): the 8 magic bytes `FRACFLD1`, `n` as a
//! little-endian `u32`, four zero bytes, `L` as a little-endian `f64`, then
//! `n` little-endian `f64` samples. The text form is the JSON object
//! `{"n": .., "L": .., "values": [..]}`.
//!
//! Neither form records the multiplier symbol; readers attach one.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground_state::{solve_q, GroundState, GroundStateError};
use crate::spectral::{Field, Grid1D, Multiplier, SpectralError};
use crate::SolverOptions;

pub const MAGIC: &[u8; 8] = b"FRACFLD1";
const HEADER_LEN: usize = 24;

/// Environment variable naming the ground-state cache directory.
pub const CACHE_ENV: &str = "FRACBEC_CACHE";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a field file (bad magic)")]
    BadMagic,
    #[error("truncated field file: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("nonzero header padding")]
    BadPadding,
    #[error(transparent)]
    Field(#[from] SpectralError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    GroundState(#[from] GroundStateError),
}

pub fn encode_binary(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.n());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&g.half_length().to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8], multiplier: Multiplier) -> Result<Field, IoError> {
    if bytes.len() < HEADER_LEN {
        return Err(IoError::Truncated {
            expected: HEADER_LEN,
            got: bytes.len(),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(IoError::BadMagic);
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let n = word(8) as usize;
    if word(12) != 0 {
        return Err(IoError::BadPadding);
    }
    let l = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = HEADER_LEN + 8 * n;
    if bytes.len() != expected {
        return Err(IoError::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    let grid = Grid1D::with_multiplier(n, l, multiplier)?;
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Field::new(&grid, values)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldJson {
    n: usize,
    #[serde(rename = "L")]
    l: f64,
    values: Vec<f64>,
}

pub fn encode_json(f: &Field) -> String {
    let doc = FieldJson {
        n: f.grid().n(),
        l: f.grid().half_length(),
        values: f.values().to_vec(),
    };
    serde_json::to_string(&doc).expect("finite floats serialize")
}

pub fn decode_json(text: &str, multiplier: Multiplier) -> Result<Field, IoError> {
    let doc: FieldJson = serde_json::from_str(text)?;
    let grid = Grid1D::with_multiplier(doc.n, doc.l, multiplier)?;
    Ok(Field::new(&grid, doc.values)?)
}

/// Writes atomically (temporary file + rename); `.json` paths get the text form.
pub fn write_field(path: &Path, f: &Field) -> Result<(), IoError> {
    let bytes = if is_json(path) {
        encode_json(f).into_bytes()
    } else {
        encode_binary(f)
    };
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_field(path: &Path, multiplier: Multiplier) -> Result<Field, IoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if is_json(path) {
        decode_json(&String::from_utf8_lossy(&bytes), multiplier)
    } else {
        decode_binary(&bytes, multiplier)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

/// Directory-backed store of solved ground states keyed by grid.
#[derive(Debug, Clone)]
pub struct GroundStateCache {
    dir: PathBuf,
}

impl GroundStateCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// The cache named by `FRACBEC_CACHE`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).map(Self::new)
    }

    pub fn path_for(&self, grid: &Grid1D) -> PathBuf {
        self.dir.join(format!(
            "q_n{}_L{}_{}.frfld",
            grid.n(),
            grid.half_length(),
            grid.multiplier()
        ))
    }

    /// Loads the cached soliton for `grid`, or solves and stores it.
    ///
    /// A cached profile whose residual exceeds `opts.tol` is re-solved.
    pub fn get_or_solve(&self, grid: &Grid1D, opts: &SolverOptions) -> Result<GroundState, IoError> {
        let path = self.path_for(grid);
        if let Ok(q) = read_field(&path, grid.multiplier()) {
            if let Ok(gs) = GroundState::from_field(q) {
                if gs.residual < opts.tol {
                    return Ok(gs);
                }
            }
        }
        let gs = solve_q(grid, opts)?;
        fs::create_dir_all(&self.dir)?;
        write_field(&path, &gs.q)?;
        Ok(gs)
    }
}

/// Uses the environment cache when configured, otherwise solves directly.
pub fn ground_state_for(grid: &Grid1D, opts: &SolverOptions) -> Result<GroundState, IoError> {
    match GroundStateCache::from_env() {
        Some(cache) => cache.get_or_solve(grid, opts),
        None => Ok(solve_q(grid, opts)?),
    }
}
