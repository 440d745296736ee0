//! Object-level evaluation of a rendered sequence: pair each frame PNG with
//! the same-named mask PNG, embed the object crops, and report similarity,
//! drift, motion-completion, and end-state metrics.

use crate::error::CliError;
use crate::jsonio::emit_json;
use crate::pngio::{load_mask, load_rgb};
use clap::Args;
use rayon::prelude::*;
use s2m_core::metrics::{
    crop_object, full_report_embedded, BuiltinEmbedder, Embedder, EmbeddedSequence,
    MaskedSequence,
};
use std::path::{Path, PathBuf};

#[derive(Debug, Args)]
pub struct EvalObjArgs {
    /// Directory of frame PNGs, consumed in file-name order.
    #[arg(long)]
    pub frames_dir: PathBuf,
    /// Directory of mask PNGs; each frame needs a mask of the same name.
    #[arg(long)]
    pub masks_dir: PathBuf,
    /// Mask describing where the object should end up.
    #[arg(long)]
    pub target_mask: PathBuf,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn png_files_sorted(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::missing_file(dir));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|path| {
            path.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn run(args: &EvalObjArgs) -> Result<(), CliError> {
    let frame_files = png_files_sorted(&args.frames_dir)?;
    if frame_files.is_empty() {
        return Err(CliError::data(
            "empty_sequence",
            format!("no PNG frames in {}", args.frames_dir.display()),
        ));
    }
    let mask_files: Vec<PathBuf> = frame_files
        .iter()
        .map(|frame| {
            let name = frame.file_name().expect("listed files have names");
            let mask = args.masks_dir.join(name);
            if mask.exists() {
                Ok(mask)
            } else {
                Err(CliError::missing_file(&mask))
            }
        })
        .collect::<Result<_, _>>()?;

    let frames = frame_files
        .par_iter()
        .map(|path| load_rgb(path))
        .collect::<Result<Vec<_>, _>>()?;
    let masks = mask_files
        .par_iter()
        .map(|path| load_mask(path))
        .collect::<Result<Vec<_>, _>>()?;
    let target = load_mask(&args.target_mask)?;

    let sequence = MaskedSequence::new(frames, masks)?;
    let embedder = BuiltinEmbedder;
    let embedded = (0..sequence.len())
        .into_par_iter()
        .map(|index| {
            crop_object(&sequence.frames()[index], &sequence.masks()[index], index).map(|crop| {
                if crop.empty {
                    None
                } else {
                    Some(embedder.embed(&crop))
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let embedded = EmbeddedSequence::from_parts(embedded);
    let report = full_report_embedded(&sequence, &target, &embedder, &embedded)?;
    emit_json(args.out.as_deref(), &report)
}
