//! JSON file formats for instances, plans and exported models.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Batch, Instance, MachineSpec, PartInstance, PartType, Placement, Plan, ProcessParams};
use crate::energy::BatchAggregate;
use crate::error::{Error, Result};
use crate::milp::ModelOptions;

pub const SCHEMA_VERSION: u32 = 1;

fn check_schema(found: u32, what: &str) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported {what} schema_version {found} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopySpec {
    pub part_type: String,
    pub copies: usize,
}

/// Instance on disk: part types plus how many copies of each to print.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub machine: MachineSpec,
    pub process: ProcessParams,
    pub part_types: Vec<PartType>,
    pub instances: Vec<CopySpec>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        check_schema(file.schema_version, "instance")?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Describes an instance by consecutive runs of equal part types.
    pub fn from_instance(instance: &Instance) -> Self {
        let mut instances: Vec<CopySpec> = Vec::new();
        for p in &instance.parts {
            let id = &instance.part_types[p.part_type].id;
            match instances.last_mut() {
                Some(last) if &last.part_type == id => last.copies += 1,
                _ => instances.push(CopySpec { part_type: id.clone(), copies: 1 }),
            }
        }
        InstanceFile {
            schema_version: SCHEMA_VERSION,
            machine: instance.machine.clone(),
            process: instance.process.clone(),
            part_types: instance.part_types.clone(),
            instances,
        }
    }

    /// Expands the copies; instance ids are `<part type>-<n>` with `n`
    /// counting from 1 per type.
    pub fn to_instance(&self) -> Result<Instance> {
        let mut ids = HashSet::new();
        for t in &self.part_types {
            if !ids.insert(t.id.as_str()) {
                return Err(Error::InvalidInput(format!("part type '{}' is defined twice", t.id)));
            }
        }
        let mut counters = vec![0usize; self.part_types.len()];
        let mut parts = Vec::new();
        for spec in &self.instances {
            let t = self
                .part_types
                .iter()
                .position(|t| t.id == spec.part_type)
                .ok_or_else(|| Error::InvalidInput(format!("unknown part type '{}'", spec.part_type)))?;
            for _ in 0..spec.copies {
                counters[t] += 1;
                parts.push(PartInstance { instance_id: format!("{}-{}", spec.part_type, counters[t]), part_type: t });
            }
        }
        Instance::new(self.machine.clone(), self.process.clone(), self.part_types.clone(), parts)
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn checksum(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

/// A batch given either by placements or, for published baselines, by its
/// aggregates only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchSpec {
    Placements { placements: Vec<Placement> },
    Aggregate { aggregate: BatchAggregate },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub schema_version: u32,
    /// Checksum of the instance file the plan was made for. Aggregate plans
    /// may omit it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_checksum: Option<String>,
    pub batches: Vec<BatchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Contents of a plan file.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanContent {
    Placed(Plan),
    Aggregates(Vec<BatchAggregate>),
}

impl PlanFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PlanFile = serde_json::from_str(text)?;
        check_schema(file.schema_version, "plan")?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_plan(plan: &Plan, instance_checksum: Option<String>, provenance: Option<Provenance>) -> Self {
        PlanFile {
            schema_version: SCHEMA_VERSION,
            instance_checksum,
            batches: plan.batches.iter().map(|b| BatchSpec::Placements { placements: b.placements.clone() }).collect(),
            provenance,
        }
    }

    pub fn from_aggregates(aggregates: &[BatchAggregate], provenance: Option<Provenance>) -> Self {
        PlanFile {
            schema_version: SCHEMA_VERSION,
            instance_checksum: None,
            batches: aggregates.iter().map(|a| BatchSpec::Aggregate { aggregate: *a }).collect(),
            provenance,
        }
    }

    /// Fails when the stored checksum differs from `checksum`; aggregate
    /// plans without a checksum always pass.
    pub fn verify_checksum(&self, checksum: &str) -> Result<()> {
        match &self.instance_checksum {
            Some(c) if c != checksum => {
                Err(Error::InvalidInput(format!("plan was made for instance {c}, not {checksum}")))
            }
            None if self.batches.iter().any(|b| matches!(b, BatchSpec::Placements { .. })) => {
                Err(Error::InvalidInput("placement plan lacks an instance checksum".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn content(&self) -> Result<PlanContent> {
        let placed = self.batches.iter().filter(|b| matches!(b, BatchSpec::Placements { .. })).count();
        if placed == self.batches.len() {
            let batches = self
                .batches
                .iter()
                .enumerate()
                .map(|(index, b)| match b {
                    BatchSpec::Placements { placements } => Batch { index, placements: placements.clone() },
                    BatchSpec::Aggregate { .. } => unreachable!(),
                })
                .collect();
            Ok(PlanContent::Placed(Plan { batches }))
        } else if placed == 0 {
            Ok(PlanContent::Aggregates(
                self.batches
                    .iter()
                    .map(|b| match b {
                        BatchSpec::Aggregate { aggregate } => *aggregate,
                        BatchSpec::Placements { .. } => unreachable!(),
                    })
                    .collect(),
            ))
        } else {
            Err(Error::InvalidInput("plan mixes placement and aggregate batches".into()))
        }
    }
}

/// Sidecar of an exported LP file: what is needed to rebuild the model and
/// read a solution back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub schema_version: u32,
    pub instance_checksum: String,
    pub n_batches: usize,
    pub options: ModelOptions,
    pub variables: usize,
    pub constraints: usize,
}

impl ModelMetadata {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelMetadata = serde_json::from_str(text)?;
        check_schema(file.schema_version, "model metadata")?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
