//! Synthetic fixture generation from a JSON spec: moving-shape videos with
//! ground-truth masks, single-seed attention archives, or a whole archived
//! seed population with a planted outlier.

use crate::error::CliError;
use crate::jsonio::canonical_json;
use crate::pngio::{save_mask, save_rgb};
use clap::Args;
use s2m_core::archive::{archive_file_name, write_manifest, write_record_file, ArchiveManifest, ManifestEntry};
use s2m_core::harness::{
    make_seed_population, synth_attention, synth_video, AttentionNoiseSpec, PopulationSpec,
    SceneSpec,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON spec file; its kind field picks what gets generated.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct AttentionFixtureSpec {
    attention: AttentionNoiseSpec,
    layers: Vec<u16>,
    step_index: u16,
    seed_id: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "spec", rename_all = "snake_case")]
enum SynthSpec {
    Scene(SceneSpec),
    Attention(AttentionFixtureSpec),
    Population(PopulationSpec),
}

#[derive(Serialize)]
struct SceneMeta {
    centers: Vec<(f64, f64)>,
    clamped_frames: usize,
}

fn run_scene(spec: &SceneSpec, out_dir: &Path) -> Result<(), CliError> {
    let video = synth_video(spec)?;
    let frames_dir = out_dir.join("frames");
    let masks_dir = out_dir.join("masks");
    fs::create_dir_all(&frames_dir)?;
    fs::create_dir_all(&masks_dir)?;
    // frame and mask share a file name so the two directories pair up by
    // sorted listing
    for index in 0..video.sequence.len() {
        let name = format!("frame_{index:03}.png");
        save_rgb(&frames_dir.join(&name), &video.sequence.frames()[index])?;
        save_mask(&masks_dir.join(&name), &video.sequence.masks()[index])?;
    }
    let meta = SceneMeta {
        centers: video.centers.clone(),
        clamped_frames: video.clamped_frames,
    };
    fs::write(out_dir.join("scene.json"), canonical_json(&meta)?)?;
    Ok(())
}

fn run_attention(spec: &AttentionFixtureSpec, out_dir: &Path) -> Result<(), CliError> {
    if spec.layers.is_empty() {
        return Err(CliError::data("invalid_config", "layers must not be empty"));
    }
    let records = synth_attention(&spec.attention, &spec.layers, spec.step_index, spec.seed_id)?;
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::new();
    for record in &records {
        let file = archive_file_name(record.seed_id(), record.step_index(), record.layer_index());
        write_record_file(&out_dir.join(&file), record)?;
        entries.push(ManifestEntry {
            seed_id: record.seed_id(),
            step_index: record.step_index(),
            layer_index: record.layer_index(),
            file,
        });
    }
    write_manifest(
        out_dir,
        &ArchiveManifest {
            entries,
            outlier_seed_id: None,
        },
    )?;
    Ok(())
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    if !args.spec.exists() {
        return Err(CliError::missing_file(&args.spec));
    }
    let spec: SynthSpec = serde_json::from_slice(&fs::read(&args.spec)?)?;
    match &spec {
        SynthSpec::Scene(scene) => run_scene(scene, &args.out_dir),
        SynthSpec::Attention(fixture) => run_attention(fixture, &args.out_dir),
        SynthSpec::Population(population) => {
            fs::create_dir_all(&args.out_dir)?;
            make_seed_population(population, &args.out_dir)?;
            Ok(())
        }
    }
}
