//! Versioned binary checkpoint format.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` header length, a JSON
//! header, then every layer's weights followed by its bias as little-endian
//! `f64`, blocks in [`PolicyValueNet::all_blocks`] order. Round trips of
//! `f64` networks are bit-exact.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::netcore::{Activation, Dense, Mlp, PolicyValueNet, RndNets};
use crate::rlalgos::Algorithm;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"DISCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint header: {0}")]
    Header(String),
    #[error("payload length mismatch: header describes {expected} values, file holds {found}")]
    Payload { expected: usize, found: usize },
}

/// Identity of a checkpoint: owning agent plus a per-agent sequence number.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CheckpointId {
    pub agent: String,
    pub seq: u64,
}

impl CheckpointId {
    pub fn new(agent: impl Into<String>, seq: u64) -> Self {
        Self { agent: agent.into(), seq }
    }

    /// File stem used by the pool store.
    pub fn file_stem(&self) -> String {
        format!("{}-{:06}", self.agent, self.seq)
    }
}

impl fmt::Display for CheckpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.agent, self.seq)
    }
}

/// Coarse agent class; decides pool routing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Main,
    PolicyExplorer,
    MethodExplorer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub id: CheckpointId,
    pub role: AgentRole,
    /// Free-form kind label, e.g. `policy_explorer/goal_clip`.
    pub kind: String,
    pub algorithm: Algorithm,
    pub training_step: u64,
    pub iteration: u64,
    /// Global publication counter across all agents.
    pub creation_index: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    activation: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    meta: CheckpointMeta,
    value_torso: bool,
    rnd: bool,
    blocks: Vec<Vec<LayerShape>>,
}

/// Published, immutable network snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub net: PolicyValueNet<f64>,
}

impl Checkpoint {
    pub fn new<T: Scalar>(meta: CheckpointMeta, net: &PolicyValueNet<T>) -> Self {
        Self { meta, net: net.cast() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(&self.meta, &self.net)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        decode(bytes)
    }

    /// Writes through a temporary file and renames, so readers never see a
    /// partial checkpoint.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let tmp = path.with_extension("partial");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        decode(&fs::read(path)?)
    }
}

fn shapes(m: &Mlp<f64>) -> Vec<LayerShape> {
    m.layers
        .iter()
        .map(|l| LayerShape {
            inputs: l.inputs,
            outputs: l.outputs,
            activation: l.activation.tag(),
        })
        .collect()
}

pub fn encode(meta: &CheckpointMeta, net: &PolicyValueNet<f64>) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        meta: meta.clone(),
        value_torso: net.value_torso.is_some(),
        rnd: net.rnd.is_some(),
        blocks: net.all_blocks().into_iter().map(shapes).collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + json.len() + 8 * net.all_blocks().iter().map(|m| m.param_count()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for block in net.all_blocks() {
        for layer in &block.layers {
            for v in layer.weights.iter().chain(&layer.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = &bytes[20..];
    if body.len() < hlen {
        return Err(CheckpointError::Header("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| CheckpointError::Header(e.to_string()))?;
    let payload = &body[hlen..];
    let expected: usize = header
        .blocks
        .iter()
        .flatten()
        .map(|l| l.inputs * l.outputs + l.outputs)
        .sum();
    if payload.len() != expected * 8 {
        return Err(CheckpointError::Payload {
            expected,
            found: payload.len() / 8,
        });
    }
    let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut blocks = Vec::with_capacity(header.blocks.len());
    for shape in &header.blocks {
        let mut layers = Vec::with_capacity(shape.len());
        for l in shape {
            let activation = Activation::from_tag(l.activation)
                .ok_or_else(|| CheckpointError::Header(format!("unknown activation tag {}", l.activation)))?;
            let mut d = Dense::zeros(l.inputs, l.outputs, activation);
            for w in d.weights.iter_mut().chain(d.bias.iter_mut()) {
                *w = values.next().unwrap();
            }
            layers.push(d);
        }
        blocks.push(Mlp { layers });
    }
    let want = 3 + header.value_torso as usize + 3 * header.rnd as usize;
    if blocks.len() != want {
        return Err(CheckpointError::Header(format!("expected {want} blocks, found {}", blocks.len())));
    }
    let mut it = blocks.into_iter();
    let torso = it.next().unwrap();
    let policy_head = it.next().unwrap();
    let value_torso = if header.value_torso { it.next() } else { None };
    let value_head = it.next().unwrap();
    let rnd = if header.rnd {
        Some(RndNets {
            intrinsic_value_head: it.next().unwrap(),
            predictor: it.next().unwrap(),
            target: it.next().unwrap(),
        })
    } else {
        None
    };
    let net = PolicyValueNet {
        torso,
        policy_head,
        value_torso,
        value_head,
        rnd,
    };
    net.validate().map_err(|e| CheckpointError::Header(e.to_string()))?;
    Ok(Checkpoint { meta: header.meta, net })
}
