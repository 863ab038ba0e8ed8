//! Report envelopes and file emission. Every artifact embeds the scene
//! hash, the command, the seed and the full parameter set, so runs are
//! reproducible and diff-able.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub scene_hash: String,
    pub command: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub report: T,
}

pub fn scene_hash(scene_bytes: &[u8]) -> String {
    let digest = Sha256::digest(scene_bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes the envelope, prints it to stdout and writes it under
/// `output_dir/name.json`. Returns the written path.
pub fn emit_json<T: Serialize>(
    output_dir: &Path,
    name: &str,
    envelope: &Envelope<T>,
) -> std::io::Result<PathBuf> {
    let text = serde_json::to_string_pretty(envelope).expect("reports are serializable");
    println!("{text}");
    fs::create_dir_all(output_dir)?;
    let path = output_dir.join(format!("{name}.json"));
    fs::write(&path, text.as_bytes())?;
    Ok(path)
}

/// Writes CSV with a reproducibility comment line in front of the header.
pub fn emit_csv(
    output_dir: &Path,
    name: &str,
    scene_hash: &str,
    command: &str,
    params: &serde_json::Value,
    header: &str,
    rows: &[String],
) -> std::io::Result<PathBuf> {
    let mut text = format!("# scene_hash={scene_hash} command={command} params={params}\n");
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::create_dir_all(output_dir)?;
    let path = output_dir.join(format!("{name}.csv"));
    fs::write(&path, text.as_bytes())?;
    Ok(path)
}

pub fn emit_text(output_dir: &Path, file_name: &str, text: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(output_dir)?;
    let path = output_dir.join(file_name);
    fs::write(&path, text.as_bytes())?;
    Ok(path)
}
