//! History model pools: per-agent short-term (bounded FIFO), long-term
//! (periodic, append-only) and superior (screened) pools, plus the pool
//! shared by the main agent and policy explorers and the pool shared by
//! every agent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::{AgentRole, Checkpoint, CheckpointError, CheckpointId, CheckpointMeta};
use crate::elo::Certificate;
use crate::matchmaking::PoolView;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "pools.json";
pub const DEFAULT_SHMP_CAPACITY: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Shmp,
    Lhmp,
    Smp,
    Dpmp,
    Dmmp,
}

impl PoolKind {
    pub fn tag(self) -> &'static str {
        match self {
            PoolKind::Shmp => "shmp",
            PoolKind::Lhmp => "lhmp",
            PoolKind::Smp => "smp",
            PoolKind::Dpmp => "dpmp",
            PoolKind::Dmmp => "dmmp",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        [PoolKind::Shmp, PoolKind::Lhmp, PoolKind::Smp, PoolKind::Dpmp, PoolKind::Dmmp]
            .into_iter()
            .find(|k| k.tag() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoolId {
    pub kind: PoolKind,
    /// Owning agent; `None` for the shared pools.
    pub owner: Option<String>,
}

impl fmt::Display for PoolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner.as_deref().unwrap_or("shared"), self.kind.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryModelPool {
    pub id: PoolId,
    /// `None` means unbounded.
    pub capacity: Option<usize>,
    entries: VecDeque<CheckpointId>,
    pub admitted_total: u64,
    pub evicted_total: u64,
}

impl HistoryModelPool {
    pub fn new(id: PoolId, capacity: Option<usize>) -> Self {
        Self {
            id,
            capacity,
            entries: VecDeque::new(),
            admitted_total: 0,
            evicted_total: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &CheckpointId) -> bool {
        self.entries.contains(id)
    }

    pub fn entries(&self) -> impl DoubleEndedIterator<Item = &CheckpointId> + ExactSizeIterator {
        self.entries.iter()
    }

    /// Appends unless already present; returns `(admitted, evicted)`.
    fn push(&mut self, id: CheckpointId) -> (bool, Option<CheckpointId>) {
        if self.contains(&id) {
            return (false, None);
        }
        self.entries.push_back(id);
        self.admitted_total += 1;
        let evicted = match self.capacity {
            Some(c) if self.entries.len() > c => {
                self.evicted_total += 1;
                self.entries.pop_front()
            }
            _ => None,
        };
        (true, evicted)
    }

    fn remove(&mut self, id: &CheckpointId) -> bool {
        let before = self.entries.len();
        self.entries.retain(|e| e != id);
        before != self.entries.len()
    }

    pub fn view(&self) -> PoolView {
        PoolView {
            label: self.id.to_string(),
            models: self.entries.iter().cloned().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentPools {
    pub name: String,
    pub role: AgentRole,
    pub shmp: HistoryModelPool,
    pub lhmp: HistoryModelPool,
    pub smp: HistoryModelPool,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PoolError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("agent `{0}` is already registered")]
    DuplicateAgent(String),
    #[error("checkpoint {id} does not belong to agent `{agent}`")]
    WrongOwner { agent: String, id: CheckpointId },
    #[error("checkpoint {0} is not in the catalog")]
    UnknownCheckpoint(CheckpointId),
    #[error("checkpoint {0} is quarantined")]
    Quarantined(CheckpointId),
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path} has version {found}, expected {expected}")]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("manifest {path} cannot be parsed: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A rejected operation kept for inspection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub operation: String,
    pub agent: String,
    pub checkpoint: CheckpointId,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushOutcome {
    Admitted,
    Duplicate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SuperiorAdmission {
    pub smp: bool,
    pub dpmp: bool,
    pub dmmp: bool,
}

/// All pools of a run plus the catalog of checkpoint metadata they refer to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolRegistry {
    agents: Vec<AgentPools>,
    pub dpmp: HistoryModelPool,
    pub dmmp: HistoryModelPool,
    catalog: BTreeMap<String, CheckpointMeta>,
    pub quarantined: Vec<CheckpointId>,
    pub audit: Vec<AuditRecord>,
    /// Bumped on every mutation; samplers compare it to decide when to
    /// rebuild their distribution.
    pub generation: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    registry: PoolRegistry,
}

impl Default for PoolRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl PoolRegistry {
    pub fn new() -> Self {
        let shared = |kind| HistoryModelPool::new(PoolId { kind, owner: None }, None);
        Self {
            agents: Vec::new(),
            dpmp: shared(PoolKind::Dpmp),
            dmmp: shared(PoolKind::Dmmp),
            catalog: BTreeMap::new(),
            quarantined: Vec::new(),
            audit: Vec::new(),
            generation: 0,
        }
    }

    pub fn register_agent(&mut self, name: &str, role: AgentRole, shmp_capacity: usize) -> Result<(), PoolError> {
        if self.agents.iter().any(|a| a.name == name) {
            return Err(PoolError::DuplicateAgent(name.into()));
        }
        let own = |kind| PoolId {
            kind,
            owner: Some(name.to_string()),
        };
        self.agents.push(AgentPools {
            name: name.into(),
            role,
            shmp: HistoryModelPool::new(own(PoolKind::Shmp), Some(shmp_capacity)),
            lhmp: HistoryModelPool::new(own(PoolKind::Lhmp), None),
            smp: HistoryModelPool::new(own(PoolKind::Smp), None),
        });
        self.generation += 1;
        Ok(())
    }

    pub fn agents(&self) -> &[AgentPools] {
        &self.agents
    }

    pub fn agent(&self, name: &str) -> Result<&AgentPools, PoolError> {
        self.agents
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| PoolError::UnknownAgent(name.into()))
    }

    fn agent_mut(&mut self, name: &str) -> Result<&mut AgentPools, PoolError> {
        self.agents
            .iter_mut()
            .find(|a| a.name == name)
            .ok_or_else(|| PoolError::UnknownAgent(name.into()))
    }

    pub fn meta(&self, id: &CheckpointId) -> Option<&CheckpointMeta> {
        self.catalog.get(&id.file_stem())
    }

    pub fn catalog(&self) -> impl Iterator<Item = &CheckpointMeta> {
        self.catalog.values()
    }

    fn check_owner(&self, agent: &str, id: &CheckpointId) -> Result<(), PoolError> {
        self.agent(agent)?;
        if id.agent != agent {
            return Err(PoolError::WrongOwner {
                agent: agent.into(),
                id: id.clone(),
            });
        }
        if self.quarantined.contains(id) {
            return Err(PoolError::Quarantined(id.clone()));
        }
        Ok(())
    }

    /// Adds a newly published checkpoint to the agent's short-term pool and
    /// the catalog. Returns the evicted entry, if any.
    pub fn push_short_term(
        &mut self,
        agent: &str,
        meta: CheckpointMeta,
    ) -> Result<(PushOutcome, Option<CheckpointId>), PoolError> {
        self.check_owner(agent, &meta.id)?;
        let id = meta.id.clone();
        let a = self.agent_mut(agent)?;
        let (admitted, evicted) = a.shmp.push(id.clone());
        if !admitted {
            return Ok((PushOutcome::Duplicate, None));
        }
        self.catalog.insert(id.file_stem(), meta);
        self.generation += 1;
        Ok((PushOutcome::Admitted, evicted))
    }

    /// Periodic long-term snapshot. Admits iff `interval_elapsed` and the
    /// checkpoint is newer than the last long-term entry.
    pub fn snapshot_long_term(&mut self, agent: &str, id: &CheckpointId, interval_elapsed: bool) -> Result<bool, PoolError> {
        self.check_owner(agent, id)?;
        if !interval_elapsed {
            return Ok(false);
        }
        let step = self
            .meta(id)
            .ok_or_else(|| PoolError::UnknownCheckpoint(id.clone()))?
            .training_step;
        let last_step = self
            .agent(agent)?
            .lhmp
            .entries()
            .next_back()
            .and_then(|l| self.meta(l))
            .map(|m| m.training_step);
        if last_step.is_some_and(|s| s >= step) {
            return Ok(false);
        }
        let (admitted, _) = self.agent_mut(agent)?.lhmp.push(id.clone());
        if admitted {
            self.generation += 1;
        }
        Ok(admitted)
    }

    /// Routes a screened checkpoint into the superior pools. Rejections are
    /// appended to [`PoolRegistry::audit`].
    pub fn admit_superior(&mut self, agent: &str, cert: &Certificate) -> Result<SuperiorAdmission, PoolError> {
        let id = cert.id().clone();
        let check = self.check_owner(agent, &id).and_then(|_| {
            self.meta(&id)
                .map(|_| ())
                .ok_or_else(|| PoolError::UnknownCheckpoint(id.clone()))
        });
        if let Err(e) = check {
            self.audit.push(AuditRecord {
                operation: "admit_superior".into(),
                agent: agent.into(),
                checkpoint: id,
                reason: e.to_string(),
            });
            return Err(e);
        }
        let role = self.agent(agent)?.role;
        let smp = self.agent_mut(agent)?.smp.push(id.clone()).0;
        let dpmp = matches!(role, AgentRole::Main | AgentRole::PolicyExplorer) && self.dpmp.push(id.clone()).0;
        let dmmp = self.dmmp.push(id).0;
        if smp || dpmp || dmmp {
            self.generation += 1;
        }
        Ok(SuperiorAdmission { smp, dpmp, dmmp })
    }

    /// The agent's own three pools followed by the shared pools it may see.
    pub fn visible(&self, agent: &str) -> Result<Vec<&HistoryModelPool>, PoolError> {
        let a = self.agent(agent)?;
        let mut v = vec![&a.shmp, &a.lhmp, &a.smp];
        if matches!(a.role, AgentRole::Main | AgentRole::PolicyExplorer) {
            v.push(&self.dpmp);
        }
        v.push(&self.dmmp);
        Ok(v)
    }

    pub fn visible_pools(&self, agent: &str) -> Result<Vec<(PoolId, usize)>, PoolError> {
        Ok(self.visible(agent)?.into_iter().map(|p| (p.id.clone(), p.len())).collect())
    }

    /// Views restricted to `kinds`, for the sampler.
    pub fn views(&self, agent: &str, kinds: &[PoolKind]) -> Result<Vec<PoolView>, PoolError> {
        Ok(self
            .visible(agent)?
            .into_iter()
            .filter(|p| kinds.contains(&p.id.kind))
            .map(HistoryModelPool::view)
            .collect())
    }

    /// Every checkpoint some pool still holds.
    pub fn referenced(&self) -> BTreeSet<CheckpointId> {
        let mut s = BTreeSet::new();
        for a in &self.agents {
            for p in [&a.shmp, &a.lhmp, &a.smp] {
                s.extend(p.entries().cloned());
            }
        }
        s.extend(self.dpmp.entries().cloned());
        s.extend(self.dmmp.entries().cloned());
        s
    }

    fn all_pools_mut(&mut self) -> Vec<&mut HistoryModelPool> {
        let mut v: Vec<&mut HistoryModelPool> = Vec::new();
        for a in &mut self.agents {
            v.extend([&mut a.shmp, &mut a.lhmp, &mut a.smp]);
        }
        v.push(&mut self.dpmp);
        v.push(&mut self.dmmp);
        v
    }

    /// Removes `id` from every pool and marks it quarantined.
    pub fn quarantine(&mut self, id: &CheckpointId) {
        for p in self.all_pools_mut() {
            p.remove(id);
        }
        if !self.quarantined.contains(id) {
            self.quarantined.push(id.clone());
        }
        self.generation += 1;
    }

    /// Writes the manifest atomically into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!("{MANIFEST_FILE}.partial"));
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            registry: self.clone(),
        };
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        fs::write(&tmp, json).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(())
    }

    /// Loads the manifest from `dir`. Entries whose payload file is missing
    /// are quarantined and reported in the returned warnings.
    pub fn load(dir: &Path) -> Result<(Self, Vec<String>), StoreError> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| StoreError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let found = value.get("version").and_then(|v| v.as_u64()).ok_or_else(|| StoreError::Parse {
            path: path.clone(),
            message: "missing `version` field".into(),
        })? as u32;
        if found != MANIFEST_VERSION {
            return Err(StoreError::Version {
                path,
                found,
                expected: MANIFEST_VERSION,
            });
        }
        let manifest: Manifest = serde_json::from_value(value).map_err(|e| StoreError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let mut reg = manifest.registry;
        let store = CheckpointStore::new(dir);
        let mut warnings = Vec::new();
        for id in reg.referenced() {
            if !store.path(&id).is_file() {
                let msg = format!("payload for {id} missing at {}; entry quarantined", store.path(&id).display());
                log::warn!("{msg}");
                warnings.push(msg);
                reg.quarantine(&id);
            }
        }
        Ok((reg, warnings))
    }
}

/// Directory of checkpoint payload files named by checkpoint id.
#[derive(Clone, Debug)]
pub struct CheckpointStore {
    root: PathBuf,
}

impl CheckpointStore {
    pub fn new(run_dir: &Path) -> Self {
        Self {
            root: run_dir.join("checkpoints"),
        }
    }

    pub fn path(&self, id: &CheckpointId) -> PathBuf {
        self.root.join(format!("{}.ckpt", id.file_stem()))
    }

    pub fn save(&self, ck: &Checkpoint) -> Result<PathBuf, StoreError> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let p = self.path(&ck.meta.id);
        ck.save(&p)?;
        Ok(p)
    }

    pub fn load(&self, id: &CheckpointId) -> Result<Checkpoint, StoreError> {
        Ok(Checkpoint::load(&self.path(id))?)
    }

    /// Deletes payloads not referenced by `registry` or listed in `keep`.
    pub fn gc(&self, registry: &PoolRegistry, keep: &BTreeSet<CheckpointId>) -> Result<Vec<PathBuf>, StoreError> {
        let live: BTreeSet<String> = registry
            .referenced()
            .iter()
            .chain(keep)
            .map(|id| format!("{}.ckpt", id.file_stem()))
            .collect();
        let mut removed = Vec::new();
        let Ok(dir) = fs::read_dir(&self.root) else {
            return Ok(removed);
        };
        for entry in dir {
            let entry = entry.map_err(io_err(&self.root))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".ckpt") && !live.contains(&name) {
                fs::remove_file(entry.path()).map_err(io_err(&entry.path()))?;
                removed.push(entry.path());
            }
        }
        removed.sort();
        Ok(removed)
    }
}
