//! Placement sampling: draw candidate object transforms on a grid over a
//! placement region, reject candidates that leave the frame or the region,
//! and render one composite per accepted placement.

use crate::error::CliError;
use crate::jsonio::emit_json;
use crate::pngio::{load_mask, load_rgb, save_rgb};
use clap::Args;
use rayon::prelude::*;
use s2m_core::compositor::{make_target_frame, sample_placements, PlacementSample};
use serde::Serialize;
use std::fs;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct SamplePlacementsArgs {
    /// First frame holding the object pixels.
    #[arg(long)]
    pub first: PathBuf,
    /// Object mask PNG aligned with the first frame.
    #[arg(long)]
    pub mask: PathBuf,
    /// Placement-region mask PNG; object centroids must land inside it.
    #[arg(long)]
    pub placement: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale_max: f64,
    /// Rotation bounds in degrees.
    #[arg(long, default_value_t = 0.0)]
    pub rot_min: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rot_max: f64,
    /// Spacing in pixels between candidate grid positions.
    #[arg(long, default_value_t = 8)]
    pub grid_step: usize,
    /// Number of candidates to draw.
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for placements.json and placement_NNN.png frames.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct PlacementEntry<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(flatten)]
    sample: &'a PlacementSample,
}

#[derive(Serialize)]
struct PlacementReport<'a> {
    requested: usize,
    rng_seed: u64,
    samples: Vec<PlacementEntry<'a>>,
}

pub fn run(args: &SamplePlacementsArgs) -> Result<(), CliError> {
    let first = load_rgb(&args.first)?;
    let mask = load_mask(&args.mask)?;
    let placement = load_mask(&args.placement)?;
    let samples = sample_placements(
        &placement,
        &mask,
        (args.scale_min, args.scale_max),
        (args.rot_min, args.rot_max),
        args.grid_step,
        args.count,
        args.seed,
    )?;
    let valid: Vec<&PlacementSample> = samples.iter().filter(|s| s.valid).collect();
    if args.count > 0 && valid.is_empty() {
        return Err(CliError::data(
            "no_valid_placement",
            format!("all {} candidates were rejected", samples.len()),
        ));
    }
    fs::create_dir_all(&args.out_dir)?;
    // the first frame doubles as the background so each render shows the
    // object in both its original and placed positions
    let rendered = valid
        .par_iter()
        .map(|sample| make_target_frame(&first, &mask, &first, &sample.transform))
        .collect::<Result<Vec<_>, _>>()?;
    for (index, (frame, _)) in rendered.iter().enumerate() {
        save_rgb(
            &args.out_dir.join(format!("placement_{index:03}.png")),
            frame,
        )?;
    }

    let mut next_file = 0usize;
    let entries: Vec<PlacementEntry> = samples
        .iter()
        .map(|sample| {
            let file = if sample.valid {
                let name = format!("placement_{next_file:03}.png");
                next_file += 1;
                Some(name)
            } else {
                None
            };
            PlacementEntry { file, sample }
        })
        .collect();
    emit_json(
        Some(&args.out_dir.join("placements.json")),
        &PlacementReport {
            requested: args.count,
            rng_seed: args.seed,
            samples: entries,
        },
    )
}
