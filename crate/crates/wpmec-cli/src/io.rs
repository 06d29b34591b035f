//! File formats: CSV metric tables (floats at 17 significant digits so
//! reruns are byte-identical), JSON configs and JSON checkpoints.

use std::fs;
use std::path::Path;

use anyhow::Context;
use wpmec_core::config::SimConfig;
use wpmec_core::mtdrl::{build_action_space, Checkpoint, CHECKPOINT_VERSION};

/// Serializes a float with 17 significant digits, enough to reproduce
/// the exact binary value on read-back.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes an RFC-4180-style CSV: header line plus one line per row.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut body = String::with_capacity(rows.len() * 64 + header.len() + 1);
    body.push_str(header);
    body.push('\n');
    for row in rows {
        body.push_str(&row.join(","));
        body.push('\n');
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Loads and validates a config file, or the defaults when absent.
pub fn load_config(path: Option<&Path>) -> anyhow::Result<SimConfig> {
    let raw = match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str::<SimConfig>(&text)
                .with_context(|| format!("parsing config {}", p.display()))?
        }
        None => SimConfig::default(),
    };
    raw.validate().map_err(anyhow::Error::new)
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> anyhow::Result<()> {
    let body = serde_json::to_string(ck)?;
    fs::write(path, body).with_context(|| format!("writing checkpoint {}", path.display()))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let ck: Checkpoint = serde_json::from_str(&text)
        .with_context(|| format!("parsing checkpoint {}", path.display()))?;
    if ck.version != CHECKPOINT_VERSION {
        anyhow::bail!(
            "checkpoint version {} unsupported (expected {})",
            ck.version,
            CHECKPOINT_VERSION
        );
    }
    Ok(ck)
}

/// Rejects a checkpoint whose networks cannot drive the requested
/// config: the observation encoding or the action space would differ.
pub fn check_compat(ck: &Checkpoint, cfg: &SimConfig) -> anyhow::Result<()> {
    if ck.config.num_devices != cfg.num_devices {
        anyhow::bail!(
            "checkpoint/config mismatch: trained with {} devices, config has {}",
            ck.config.num_devices,
            cfg.num_devices
        );
    }
    if ck.config.num_uavs != cfg.num_uavs {
        anyhow::bail!(
            "checkpoint/config mismatch: trained with {} UAVs, config has {}",
            ck.config.num_uavs,
            cfg.num_uavs
        );
    }
    if ck.config.joint_obs != cfg.joint_obs {
        anyhow::bail!("checkpoint/config mismatch: joint_obs differs");
    }
    let space = build_action_space(cfg);
    if ck.action_count != space.len() {
        anyhow::bail!(
            "checkpoint/config mismatch: action space {} vs {}",
            ck.action_count,
            space.len()
        );
    }
    Ok(())
}
