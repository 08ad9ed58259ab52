use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ipm::{ipm_run, IPMConfig, KKTSnapshot, StepSolver};
use crate::kkt::SubproblemData;

pub const INSTANCE_FILE: &str = "instance.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// The Newton systems of one interior point run on one subproblem.
#[derive(Debug, Clone)]
pub struct Trace {
    pub id: String,
    pub data: SubproblemData,
    pub snapshots: Vec<KKTSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub instance: String,
    pub snapshots: Vec<String>,
    pub ipm: IPMConfig,
}

pub fn snapshot_file(index: usize) -> String {
    format!("snapshot_{index:04}.json")
}

/// Runs the interior point method on `data` and keeps every Newton system.
pub fn trace_instance(id: &str, data: SubproblemData, cfg: &IPMConfig) -> Result<Trace> {
    let (snapshots, _) = ipm_run(&data, cfg, StepSolver::Direct)?;
    Ok(Trace {
        id: id.to_string(),
        data,
        snapshots,
    })
}

/// Writes the instance, one JSON file per snapshot and a manifest listing
/// them into `dir`, which is created if needed.
pub fn save_trace(trace: &Trace, cfg: &IPMConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    trace.data.save(&dir.join(INSTANCE_FILE))?;
    let mut names = Vec::with_capacity(trace.snapshots.len());
    for s in &trace.snapshots {
        let name = snapshot_file(s.index);
        fs::write(dir.join(&name), serde_json::to_string(s)?)?;
        names.push(name);
    }
    let manifest = Manifest {
        id: trace.id.clone(),
        instance: INSTANCE_FILE.to_string(),
        snapshots: names,
        ipm: *cfg,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_trace(dir: &Path) -> Result<Trace> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let data = SubproblemData::load(&dir.join(&manifest.instance))?;
    let mut snapshots = Vec::with_capacity(manifest.snapshots.len());
    for name in &manifest.snapshots {
        let s: KKTSnapshot = serde_json::from_str(&fs::read_to_string(dir.join(name))?)?;
        s.state.check_dims(&data)?;
        if s.rhs.len() != data.kkt_order() || s.solution.len() != data.kkt_order() {
            return Err(Error::Contract(format!("snapshot {name} does not match the instance dimensions")));
        }
        snapshots.push(s);
    }
    Ok(Trace {
        id: manifest.id,
        data,
        snapshots,
    })
}
